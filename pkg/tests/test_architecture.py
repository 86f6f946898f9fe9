import numpy as np
import pytest

from dfrcbeam.architecture import (ArchitectureSpec, AnalogPrecoder,
                                   feasibility_check, project_analog,
                                   random_feasible)


def _rand(shape, seed):
    rng = np.random.default_rng(seed)
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_spec_validation():
    with pytest.raises(ValueError):
        ArchitectureSpec("partial", 9, 2)
    with pytest.raises(ValueError):
        ArchitectureSpec("dynamic", 8, 2)                       # missing L
    with pytest.raises(ValueError):
        ArchitectureSpec("dynamic", 8, 4, n_phase_shifters=2)   # L < n_rf
    with pytest.raises(ValueError):
        ArchitectureSpec("dynamic", 4, 2, n_phase_shifters=10)  # budget > n_t
    with pytest.raises(ValueError):
        ArchitectureSpec("diagonal", 8, 2)


def test_phase_shifter_counts():
    assert ArchitectureSpec("full", 32, 4).phase_shifter_count() == 128
    assert ArchitectureSpec("partial", 32, 4).phase_shifter_count() == 32
    assert ArchitectureSpec("dynamic", 32, 4,
                            n_phase_shifters=64).phase_shifter_count() == 64


def test_project_full_idempotent_on_unit_modulus():
    spec = ArchitectureSpec("full", 4, 2)
    x = np.exp(1j * _rand((4, 2), 0).real)
    out = project_analog(x, spec).matrix
    assert np.allclose(out, x)
    again = project_analog(out, spec).matrix
    assert np.array_equal(out, again)


def test_project_full_strips_modulus():
    spec = ArchitectureSpec("full", 2, 1)
    x = 2.0 * np.exp(1j * np.pi / 4) * np.ones((2, 1))
    out = project_analog(x, spec).matrix
    assert np.allclose(out, np.exp(1j * np.pi / 4) * np.ones((2, 1)))


def test_project_full_matches_phase_grid_search():
    # grid-search oracle: nearest point over phases quantized to 2^12 levels
    spec = ArchitectureSpec("full", 2, 1)
    x = _rand((2, 1), 5)
    proj = project_analog(x, spec).matrix
    phases = 2.0 * np.pi * np.arange(4096) / 4096
    cand = np.exp(1j * phases)
    best = 0.0
    for row in range(2):
        best += np.min(np.abs(x[row, 0] - cand) ** 2)
    assert abs(np.linalg.norm(x - proj) ** 2 - best) < 1e-3


def test_project_partial_support():
    spec = ArchitectureSpec("partial", 4, 2)
    out = project_analog(_rand((4, 2), 1), spec).matrix
    assert np.allclose(np.abs(out[:2, 0]), 1.0)
    assert np.allclose(np.abs(out[2:, 1]), 1.0)
    assert np.all(out[2:, 0] == 0) and np.all(out[:2, 1] == 0)


def test_project_zero_entries_get_phase_zero():
    spec = ArchitectureSpec("full", 2, 2)
    out = project_analog(np.zeros((2, 2), dtype=complex), spec).matrix
    assert np.allclose(out, 1.0)


def test_project_shape_mismatch():
    with pytest.raises(ValueError):
        project_analog(np.zeros((3, 2)), ArchitectureSpec("full", 4, 2))


def test_projection_never_increases_distance():
    # nearest-point property vs random feasible competitors (full, partial)
    rng = np.random.default_rng(2)
    for kind, nt, nrf in [("full", 6, 2), ("partial", 6, 2)]:
        spec = ArchitectureSpec(kind, nt, nrf)
        for trial in range(50):
            x = _rand((nt, nrf), 100 + trial)
            proj = project_analog(x, spec).matrix
            d0 = np.linalg.norm(x - proj)
            f = random_feasible(spec, 1000 + trial).matrix
            assert d0 <= np.linalg.norm(x - f) + 1e-12


def test_dynamic_full_budget_reduces_to_full():
    full = ArchitectureSpec("full", 6, 2)
    dyn = ArchitectureSpec("dynamic", 6, 2, n_phase_shifters=12)
    x = _rand((6, 2), 9)
    assert np.allclose(project_analog(x, dyn).matrix,
                       project_analog(x, full).matrix)


def test_dynamic_greedy_selects_largest():
    spec = ArchitectureSpec("dynamic", 4, 2, n_phase_shifters=4)
    x = np.array([[3.0, 0.1], [0.2, 4.0], [2.0, 0.3], [0.1, 3.5]],
                 dtype=complex)
    out = project_analog(x, spec)
    assert set(np.flatnonzero(out.support[:, 0])) == {0, 2}
    assert set(np.flatnonzero(out.support[:, 1])) == {1, 3}


def test_feasibility_trivials():
    spec = ArchitectureSpec("full", 2, 1)
    bad = AnalogPrecoder(np.array([[0.5], [1.0]], dtype=complex), spec)
    ok, report = feasibility_check(bad)
    assert not ok and "(0, 0)" in report[0]

    pspec = ArchitectureSpec("partial", 4, 2)
    m = random_feasible(pspec, 0).matrix.copy()
    m[3, 0] = 1.0   # off-block entry
    ok, report = feasibility_check(AnalogPrecoder(m, pspec))
    assert not ok


def test_projection_output_always_feasible():
    # property: project_analog output passes feasibility_check, 1000 trials
    specs = [ArchitectureSpec("full", 8, 2),
             ArchitectureSpec("partial", 8, 2),
             ArchitectureSpec("dynamic", 8, 2, n_phase_shifters=8)]
    for trial in range(1000):
        spec = specs[trial % 3]
        x = _rand((8, 2), trial)
        ok, report = feasibility_check(project_analog(x, spec))
        assert ok, report


def test_random_feasible_examples():
    full = random_feasible(ArchitectureSpec("full", 2, 2), 3)
    assert np.allclose(np.abs(full.matrix), 1.0)

    part = random_feasible(ArchitectureSpec("partial", 4, 2), 3)
    assert part.support.sum() == 4

    dyn = random_feasible(ArchitectureSpec("dynamic", 8, 2, n_phase_shifters=8), 3)
    assert dyn.support.sum() == 8
    assert np.all(dyn.support.sum(axis=0) == 4)


def test_random_feasible_deterministic():
    spec = ArchitectureSpec("dynamic", 8, 2, n_phase_shifters=8)
    a = random_feasible(spec, 5).matrix
    b = random_feasible(spec, 5).matrix
    assert np.array_equal(a, b)


def test_switch_map_one_per_column():
    spec = ArchitectureSpec("dynamic", 8, 2, n_phase_shifters=8)
    g = random_feasible(spec, 1).switch_map()
    assert g.shape == (8, 8)
    assert np.all(g.sum(axis=0) == 1)
