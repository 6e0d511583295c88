import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splatgen.errors import CountMismatch, MalformedHeader
from splatgen.gaussians import GaussianSet
from splatgen.ply_io import export_ply, import_ply


def _roundtrip(tmp_path, gset):
    p = tmp_path / "set.ply"
    export_ply(gset, p)
    return import_ply(p)


def test_roundtrip_simple(tmp_path):
    rng = np.random.default_rng(0)
    gset = GaussianSet(
        rng.uniform(-1, 1, (16, 3)).astype(np.float32),
        rng.uniform(0, 1, (16, 3)).astype(np.float32),
        rng.uniform(0, 1, 16).astype(np.float32),
        0.12,
        (1.0, 0.0, 0.0, 0.0),
    )
    back = _roundtrip(tmp_path, gset)
    assert np.array_equal(np.asarray(back.means, np.float32), np.asarray(gset.means, np.float32))
    assert np.array_equal(np.asarray(back.colors, np.float32), np.asarray(gset.colors, np.float32))
    assert np.array_equal(np.asarray(back.opacities, np.float32), np.asarray(gset.opacities, np.float32))
    assert back.scale == gset.scale
    assert tuple(back.rotation) == tuple(gset.rotation)


@given(
    n=st.integers(1, 64),
    seed=st.integers(0, 2**31 - 1),
    scale=st.floats(1e-3, 0.5),
)
@settings(max_examples=100, deadline=None)
def test_roundtrip_bit_exact_float32(tmp_path_factory, n, seed, scale):
    rng = np.random.default_rng(seed)
    means = rng.uniform(-1, 1, (n, 3)).astype(np.float32)
    colors = rng.uniform(0, 1, (n, 3)).astype(np.float32)
    opac = rng.uniform(0, 1, n).astype(np.float32)
    q = rng.normal(size=4)
    q = tuple(q / np.linalg.norm(q))
    gset = GaussianSet(means, colors, opac, float(np.float32(scale)), q)
    p = tmp_path_factory.mktemp("ply") / "g.ply"
    export_ply(gset, p)
    back = import_ply(p)
    assert np.asarray(back.means, np.float32).tobytes() == means.tobytes()
    assert np.asarray(back.colors, np.float32).tobytes() == colors.tobytes()
    assert np.asarray(back.opacities, np.float32).tobytes() == opac.tobytes()
    assert back.scale == gset.scale


def test_truncated_payload(tmp_path):
    gset = GaussianSet(np.zeros((4, 3)), np.full((4, 3), 0.5), np.full(4, 0.5), 0.1)
    p = tmp_path / "t.ply"
    export_ply(gset, p)
    raw = p.read_bytes()
    p.write_bytes(raw[:-8])
    with pytest.raises(CountMismatch):
        import_ply(p)


def test_not_a_ply(tmp_path):
    p = tmp_path / "nope.ply"
    p.write_bytes(b"OFF\n0 0 0\n")
    with pytest.raises(MalformedHeader):
        import_ply(p)


def test_missing_scale_comment(tmp_path):
    gset = GaussianSet(np.zeros((2, 3)), np.full((2, 3), 0.5), np.full(2, 0.5), 0.1)
    p = tmp_path / "s.ply"
    export_ply(gset, p)
    raw = p.read_bytes().replace(b"comment agg_scale", b"comment old_scale")
    p.write_bytes(raw)
    with pytest.raises(MalformedHeader):
        import_ply(p)
