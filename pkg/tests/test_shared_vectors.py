"""The checked-in format vectors under testdata/ stay locked to the
writers: these files are what downstream tools parse, so a layout
change must fail here instead of silently shifting bytes."""

import struct
from pathlib import Path

import numpy as np

from porowave.fieldio import MAGIC, read_array, read_sidecar, write_array

TESTDATA = Path(__file__).resolve().parent.parent / "testdata"

# canonical payload of sample_state.pwv1 in on-disk order (second grid
# index outermost, component index innermost); testdata/regenerate.py
# and plots/tests/test_formats.py carry the same list
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


def _payload() -> bytes:
    return b"".join(struct.pack("<d", float.fromhex(h)) for h in SAMPLE_HEX)


def test_sample_state_bytes_are_canonical():
    blob = (TESTDATA / "sample_state.pwv1").read_bytes()
    assert blob == MAGIC + struct.pack("<III", 3, 2, 8) + _payload()


def test_writer_reproduces_the_vector_exactly(tmp_path):
    arr = read_array(TESTDATA / "sample_state.pwv1")
    assert arr.shape == (3, 2, 8)
    out = tmp_path / "rewrite.pwv1"
    write_array(out, arr)
    assert out.read_bytes() == (TESTDATA / "sample_state.pwv1").read_bytes()


def test_sample_sidecar_round_trips():
    meta = read_sidecar(TESTDATA / "sample_state.pwv1.meta")
    assert meta == {"kind": "state", "components": "8", "n1": "3",
                    "n2": "2", "time": "0.0"}


def test_femur_energy_vector_is_consistent():
    energy = read_array(TESTDATA / "femur64_energy.pwv1")
    assert energy.shape == (64, 64, 1)
    assert np.isfinite(energy).all() and energy.max() > 0.0
    meta = read_sidecar(TESTDATA / "femur64_energy.pwv1.meta")
    assert meta["n1"] == "64" and meta["n2"] == "64"
    mat = read_array(TESTDATA / meta["material_map"])
    assert set(np.unique(mat)) == {0.0, 1.0, 2.0}
    xy = read_array(TESTDATA / meta["centroids"])
    assert xy.shape == (64, 64, 2)
