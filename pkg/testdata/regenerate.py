"""Rebuild the checked-in format vectors from the real writers.

Run from the repository root after changing the snapshot or CSV
writers, then commit the results:

    python3 testdata/regenerate.py

The hex list below is the canonical payload of sample_state.pwv1 in
on-disk order (second index outermost, component innermost).  The
format tests in tests/ and plots/tests/ carry the same list frozen
separately, so a writer change that breaks byte layout shows up as a
mismatch against files this script did not touch.
"""

from __future__ import annotations

import pathlib
import shutil
import tempfile

import numpy as np

from porowave.fieldio import dump_energy, write_array
from porowave.harness import assemble, load_config, main
from porowave.solver import advance, initialize_state
from porowave.verify import ConvergenceResult, ErrorReport, fit_rate
from porowave.verify import write_convergence_csv

ROOT = pathlib.Path(__file__).resolve().parent.parent
OUT = ROOT / "testdata"

SAMPLE_HEX = [
    "0x0.0p+0", "-0x0.0p+0", "0x1.0000000000000p+0",
    "-0x1.0000000000000p+0", "0x1.0000000000000p-1", "-0x1.0000000000000p+1",
    "0x1.921fb54442d18p+1", "-0x1.5bf0a8b145769p+1", "0x0.0000000000001p-1022",
    "-0x0.0000000000001p-1022", "0x1.fffffffffffffp+1023", "0x1.0000000000000p-1022",
    "0x1.0000000000001p+0", "0x1.fffffffffffffp-1", "0x1.7e43c8800759cp+996",
    "-0x1.56e1fc2f8f359p-997", "0x1.5555555555555p-1", "-0x1.b6db6db6db6dbp-2",
    "0x1.e848080000000p+19", "-0x1.e848080000000p+19", "0x1.6a09e667f3bcdp+0",
    "0x1.62e42fefa39efp-1", "0x1.fe185ca57c517p+78", "-0x1.7a4da290c1653p-63",
    "-0x1.0000000000000p-4", "0x1.0000000000000p-3", "-0x1.8000000000000p-3",
    "0x1.0000000000000p-2", "-0x1.4000000000000p-2", "0x1.8000000000000p-2",
    "-0x1.c000000000000p-2", "0x1.0000000000000p-1", "-0x1.41b2f769cf0e0p-2",
    "0x1.921fb54442d18p+2", "-0x1.78fdb9effea46p+6", "0x1.3a28c59d5433bp+10",
    "-0x1.41b2f769cf0e0p-3", "0x1.e28c731eb6950p+0", "-0x1.5fdbbe9bba775p+4",
    "0x1.f6a7a2955385ep+7", "0x1.0000000000000p-10", "0x1.0000000000000p-3",
    "0x1.0000000000000p+0", "0x1.0000000000000p+3", "0x1.0000000000000p+10",
    "0x1.0000000000000p+30", "0x1.0000000000000p-30", "0x1.0000000000000p+52",
]


def write_sample_state() -> None:
    payload = np.array([float.fromhex(h) for h in SAMPLE_HEX])
    # payload order is (j, i, component); the array wants (i, j, component)
    data = payload.reshape(2, 3, 8).transpose(1, 0, 2)
    write_array(OUT / "sample_state.pwv1", data, sidecar={
        "kind": "state",
        "components": 8,
        "n1": 3,
        "n2": 2,
        "time": repr(0.0),
    })


def write_femur_energy() -> None:
    config = load_config(ROOT / "configs" / "femur_pulse.ini")
    setup = assemble(config, n=64)
    state = initialize_state(setup.grid, setup.field)
    state = advance(state, setup.t_end, setup.step)
    dump_energy(state, OUT / "femur64_energy.pwv1",
                aux_stem=OUT / "femur64.grid")


def write_convergence_sample() -> None:
    reports = [
        ErrorReport(norm1=4.1e-3, norm_max=3.0e-2, dims=(50, 50), time=1.0,
                    scenario="open pores", weighting="area"),
        ErrorReport(norm1=1.0e-3, norm_max=1.4e-2, dims=(100, 100), time=1.0,
                    scenario="open pores", weighting="area"),
        ErrorReport(norm1=2.6e-4, norm_max=7.1e-3, dims=(200, 200), time=1.0,
                    scenario="open pores", weighting="area"),
    ]
    result = ConvergenceResult(
        reports=tuple(reports),
        fit_norm1=fit_rate([(r.dims[0], r.norm1) for r in reports]),
        fit_max=fit_rate([(r.dims[0], r.norm_max) for r in reports]),
    )
    write_convergence_csv(OUT / "convergence_sample.csv", result)


def write_zeta_sample() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        rc = main(["zeta-sweep",
                   "--config", str(ROOT / "configs" / "zeta_sandstone_shale.ini"),
                   "--out", tmp])
        if rc != 0:
            raise SystemExit(f"zeta-sweep failed with exit code {rc}")
        shutil.copy(pathlib.Path(tmp) / "zeta_zeta.csv",
                    OUT / "zeta_sample.csv")


if __name__ == "__main__":
    write_sample_state()
    write_femur_energy()
    write_convergence_sample()
    write_zeta_sample()
    for p in sorted(OUT.iterdir()):
        if p.name != "regenerate.py":
            print(f"{p.name}: {p.stat().st_size} bytes")
