"""Grid conventions, transform unitarity, and field dump round-trips."""

from __future__ import annotations

import numpy as np
import pytest

from qdot.grid import Grid, load_field, save_field


def _rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)


def test_positions_follow_periodic_convention():
    g = Grid((8,), (4.0,), (-2.0,))
    z = g.axis_positions(0)
    assert z[0] == -2.0
    np.testing.assert_allclose(np.diff(z), 0.5)
    # right endpoint excluded: last point is origin + L - dz
    assert z[-1] == pytest.approx(1.5)


def test_momenta_are_monotonic_and_centered():
    g = Grid((8,), (4.0,), (0.0,))
    k = g.axis_momenta(0)
    dk = 2.0 * np.pi / 4.0
    np.testing.assert_allclose(k, dk * (np.arange(8) - 4))
    assert k[4] == 0.0


@pytest.mark.parametrize("n", [1, 0, -2])
def test_tiny_axis_rejected(n):
    with pytest.raises(ValueError):
        Grid((n,), (1.0,), (0.0,))


@pytest.mark.parametrize("n", [3, 5])
def test_odd_axis_momenta_symmetric(n):
    # no unpaired Nyquist point on an odd axis
    grid = Grid((n,), (2.0,), (0.0,))
    k = grid.axis_momenta(0)
    assert np.allclose(np.sort(k), np.sort(-k))
    field = np.sin(2.0 * np.pi * np.arange(n) / n) + 0.25
    back = grid.to_position(grid.to_momentum(field))
    assert np.allclose(back, field, atol=1e-12)


def test_mismatched_metadata_rejected():
    with pytest.raises(ValueError):
        Grid((4, 4), (1.0,), (0.0, 0.0))
    with pytest.raises(ValueError):
        Grid((4,), (-1.0,), (0.0,))


def test_spacing_and_cell_volume():
    g = Grid((10, 4, 8), (5.0, 2.0, 4.0), (0.0, 0.0, 0.0))
    assert g.spacing == (0.5, 0.5, 0.5)
    assert g.cell_volume == pytest.approx(0.125)


def test_transform_round_trip_and_parseval():
    g = Grid((12, 8, 6), (6.0, 4.0, 3.0), (0.0, -2.0, -1.5))
    f = _rng(1).normal(size=g.shape) + 1j * _rng(2).normal(size=g.shape)
    ft = g.to_momentum(f)
    back = g.to_position(ft)
    np.testing.assert_allclose(back, f, atol=1e-12)
    # unitary transform preserves the l2 norm exactly
    assert np.linalg.norm(ft) == pytest.approx(np.linalg.norm(f), rel=1e-13)


def test_plane_wave_lands_in_single_bin():
    g = Grid((16,), (8.0,), (-4.0,))
    k = g.axis_momenta(0)
    target = 10  # some nonzero bin
    wave = np.exp(1j * k[target] * g.axis_positions(0)) / np.sqrt(16)
    ft = g.to_momentum(wave)
    mags = np.abs(ft)
    assert mags[target] == pytest.approx(1.0, abs=1e-12)
    mags[target] = 0.0
    assert mags.max() < 1e-12


def test_spinor_axis_is_not_transformed():
    g = Grid((8, 6), (4.0, 3.0), (0.0, 0.0))
    f = _rng(3).normal(size=(8, 6, 2)) + 0j
    ft = g.to_momentum(f)
    assert ft.shape == (8, 6, 2)
    # transforming each spinor component separately must agree
    for s in range(2):
        np.testing.assert_allclose(ft[..., s], g.to_momentum(f[..., s]), atol=1e-12)


def test_field_shape_checked():
    g = Grid((8, 6), (4.0, 3.0), (0.0, 0.0))
    with pytest.raises(ValueError):
        g.to_momentum(np.zeros((6, 8)))


def test_drop_axis():
    g = Grid((8, 6, 4), (4.0, 3.0, 2.0), (0.0, -1.0, -0.5))
    g2 = g.drop_axis(2)
    assert g2 == Grid((8, 6), (4.0, 3.0), (0.0, -1.0))


@pytest.mark.parametrize(
    "field",
    [
        _rng(4).normal(size=(6, 4, 8)),
        _rng(5).normal(size=(6, 4, 8)) + 1j * _rng(6).normal(size=(6, 4, 8)),
        _rng(7).normal(size=(6, 4, 8, 2)) + 1j * _rng(8).normal(size=(6, 4, 8, 2)),
    ],
    ids=["real", "complex", "spinor"],
)
def test_dump_round_trip(tmp_path, field):
    g = Grid((6, 4, 8), (3.0, 2.0, 4.0), (-1.5, 0.0, -2.0))
    path = tmp_path / "field.bin"
    save_field(path, g, field)
    g2, back = load_field(path)
    assert g2 == g
    np.testing.assert_array_equal(back, field.astype(back.dtype))


def test_dump_round_trip_2d(tmp_path):
    g = Grid((4, 6), (2.0, 3.0), (0.0, 0.0))
    field = _rng(9).normal(size=(4, 6))
    path = tmp_path / "f2.bin"
    save_field(path, g, field)
    g2, back = load_field(path)
    assert g2 == g
    np.testing.assert_array_equal(back, field)


def test_dump_rejects_bad_magic(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOTMAGIC" + b"\x00" * 64)
    with pytest.raises(ValueError, match="magic"):
        load_field(path)


def test_dump_rejects_real_spinor(tmp_path):
    g = Grid((4,), (2.0,), (0.0,))
    with pytest.raises(ValueError):
        save_field(tmp_path / "x.bin", g, np.zeros((4, 2)))


def test_dump_header_is_little_endian_layout(tmp_path):
    g = Grid((4,), (2.0,), (-1.0,))
    path = tmp_path / "h.bin"
    save_field(path, g, np.zeros(4))
    raw = path.read_bytes()
    assert raw[:8] == b"QDFIELD1"
    assert int.from_bytes(raw[8:16], "little") == 1  # one axis
    assert int.from_bytes(raw[16:24], "little") == 4  # points
    assert np.frombuffer(raw[24:40], dtype="<f8").tolist() == [2.0, -1.0]
    assert int.from_bytes(raw[40:48], "little") == 1  # real scalar
