import time

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kdvtbc.asymptotic import asymptotic_kernels
from kdvtbc.diagnostics import energy_increases, relative_l2_error
from kdvtbc.kernels import KernelError, Kernels, exact_kernels
from kdvtbc.model import Grid, ModelParams, SchemeRatios, derive_ratios, interior, sample_initial
from kdvtbc.reference import SpectralConfig, discrete_whole_line
from kdvtbc.scheme import (TRACE_NAMES, BoundaryHistory, SchemeError, SolverState, assemble,
                           assemble_dirichlet, convolution_source, run, run_dirichlet,
                           snapshot_steps, step)

CASE1 = ModelParams(0, 0, 1e-3)
CASE3 = ModelParams(2, 1e-3, 1e-3)


def setup(params, J=32, dt=1e-3, N=0, length=None):
    grid = Grid(0, 1, 1.0 / J, dt, N)
    ratios = derive_ratios(params, grid)
    kernels = exact_kernels(ratios, length or max(N + 2, 64))
    return grid, ratios, kernels, assemble(ratios, kernels, grid.J)


def test_stencil_constants_pure_dispersion():
    r = SchemeRatios(0.0, 4.0, 0.0, 0.0, 0.0)
    assert (r.c_minus, r.c_zero, r.c_plus) == (2.0, 1.0, -2.0)


def test_stencil_constants_general():
    r = derive_ratios(CASE3, Grid(0, 1, 1e-2, 1e-3))
    assert r.c_minus == pytest.approx(-38.2, rel=1e-12)
    assert r.c_zero == pytest.approx(84.0, rel=1e-12)
    assert r.c_plus == pytest.approx(-41.8, rel=1e-12)


@pytest.mark.parametrize("params", [CASE1, CASE3])
def test_matrix_rows(params):
    grid, ratios, kernels, m = setup(params)
    A, B = m.dense()
    cm, c0, cp = ratios.c_minus, ratios.c_zero, ratios.c_plus
    n = grid.size
    for i in range(2, n - 2):
        assert np.array_equal(A[i, i - 2:i + 3], [-1, cm, c0, cp, 1])
        assert np.array_equal(B[i, i - 2:i + 3], [1, cp, c0, cm, -1])
        assert np.count_nonzero(A[i]) <= 5
    ss0, ps0, su0, pu0 = kernels.head()
    for r in (0, 1):
        assert np.array_equal(A[r, r:r + 3], [pu0, -su0, 1])
        assert np.count_nonzero(B[r]) == 1 and B[r, r + 2] == -1
    for r in (n - 2, n - 1):
        assert np.array_equal(A[r, r - 2:r + 1], [ps0, -ss0, 1])
        assert np.count_nonzero(B[r]) == 1 and B[r, r] == -1
    rows = A[2:n - 2].sum(axis=1)
    assert np.allclose(rows, rows[0])


def test_banded_solve_matches_dense(rng):
    grid, _, _, m = setup(CASE3)
    A, B = m.dense()
    v = rng.standard_normal(grid.size)
    assert np.allclose(m.apply_A(v), A @ v, rtol=1e-14, atol=1e-12)
    assert np.allclose(m.apply_B(v), B @ v, rtol=1e-14, atol=1e-12)
    assert np.allclose(m.solve(v), np.linalg.solve(A, v), rtol=1e-10, atol=1e-12)


def test_assemble_rejects_small_grid():
    r = SchemeRatios(0.0, 4.0, 0.0, 0.0, 0.0)
    with pytest.raises(SchemeError):
        assemble(r, Kernels(*np.zeros((4, 3))), 4)


def brute_source(kernels, traces, n, size):
    s = np.zeros(size)
    t = {name: traces[:, i] for i, name in enumerate(TRACE_NAMES)}
    for k in range(n + 1):
        w = n + 1 - k
        s[0] += kernels.su[w] * t["u_m1"][k] - kernels.pu[w] * t["u_m2"][k]
        s[1] += kernels.su[w] * t["u_0"][k] - kernels.pu[w] * t["u_m1"][k]
        s[-2] += kernels.ss[w] * t["u_J"][k] - kernels.ps[w] * t["u_Jm1"][k]
        s[-1] += kernels.ss[w] * t["u_Jp1"][k] - kernels.ps[w] * t["u_J"][k]
    return s


def test_source_matches_double_loop(rng):
    grid, _, kernels, _ = setup(CASE3, length=60)
    h = BoundaryHistory(grid.size, 4)
    for _ in range(50):
        h.append(rng.standard_normal(grid.size))
    n = 49
    got = convolution_source(kernels, h, n, grid.size)
    want = brute_source(kernels, h.traces, n, grid.size)
    assert np.allclose(got, want, rtol=0, atol=1e-13 * np.max(np.abs(want)))
    assert np.count_nonzero(got[2:-2]) == 0


def test_source_zero_history():
    grid, _, kernels, _ = setup(CASE1)
    h = BoundaryHistory(grid.size)
    h.append(np.zeros(grid.size))
    assert np.array_equal(convolution_source(kernels, h, 0, grid.size), np.zeros(grid.size))


def test_source_sifts_single_pulse():
    grid, _, kernels, _ = setup(CASE1)
    h = BoundaryHistory(grid.size)
    u = np.zeros(grid.size)
    u[2] = 1.0  # u_0 at step 0
    h.append(u)
    for _ in range(3):
        h.append(np.zeros(grid.size))
    s = convolution_source(kernels, h, 3, grid.size)
    assert s[1] == kernels.su[4]
    assert s[0] == 0 and s[-1] == 0 and s[-2] == 0


def test_source_needs_enough_kernels():
    grid, _, kernels, _ = setup(CASE1, length=3)
    h = BoundaryHistory(grid.size)
    for _ in range(3):
        h.append(np.zeros(grid.size))
    with pytest.raises(KernelError, match="extend kernels"):
        convolution_source(kernels, h, 2, grid.size)


def test_history_traces():
    h = BoundaryHistory(10, capacity=1)
    for k in range(5):
        h.append(np.arange(10.0) + 100 * k)
    assert len(h) == 5
    assert np.array_equal(h.trace("u_0"), 2 + 100 * np.arange(5.0))
    assert np.array_equal(h.trace("u_Jp2"), 9 + 100 * np.arange(5.0))


def test_zero_state_stays_zero():
    grid, _, kernels, m = setup(CASE3, N=200)
    state = SolverState.start(np.zeros(grid.size))
    for _ in range(200):
        step(state, m, kernels)
    assert np.all(state.u == 0)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(a, b):
    grid, _, kernels, m = setup(CASE3, N=30)
    rng = np.random.default_rng(7)
    u, v = rng.standard_normal(grid.size), rng.standard_normal(grid.size)

    def advance(w):
        st_ = SolverState.start(w)
        for _ in range(30):
            step(st_, m, kernels)
        return st_.u

    lhs = advance(a * u + b * v)
    rhs = a * advance(u) + b * advance(v)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * (1 + np.max(np.abs(rhs))))


def test_no_op_run():
    grid = Grid(0, 1, 2.0**-6, 1e-3, 0)
    u0 = sample_initial("gaussian", grid)
    k = exact_kernels(derive_ratios(CASE1, grid), 2)
    rep = run(CASE1, grid, k, u0, reference=lambda t: interior(u0))
    assert np.isnan(rep.E_P)
    assert len(rep.energy) == 1
    assert np.array_equal(rep.final, u0)


def test_run_extends_short_exact_kernels():
    grid = Grid.from_final_time(0, 1, 2.0**-6, 1e-3, 0.05)
    u0 = sample_initial("gaussian", grid)
    k = exact_kernels(derive_ratios(CASE1, grid), 5)
    rep = run(CASE1, grid, k, u0)
    full = run(CASE1, grid, exact_kernels(derive_ratios(CASE1, grid), grid.N + 2), u0)
    assert np.array_equal(rep.final, full.final)


def test_run_rejects_short_asymptotic_kernels():
    grid = Grid.from_final_time(0, 1, 2.0**-6, 1e-3, 0.05)
    k = asymptotic_kernels(CASE1, grid.dt, grid.dx, 3)
    with pytest.raises(KernelError):
        run(CASE1, grid, k, sample_initial("gaussian", grid))


def test_run_rejects_wrong_field_length():
    grid = Grid.from_final_time(0, 1, 2.0**-6, 1e-3, 0.01)
    with pytest.raises(SchemeError):
        run(CASE1, grid, exact_kernels(derive_ratios(CASE1, grid), 20), np.zeros(grid.J + 1))


@pytest.mark.parametrize("params,profile,T", [(CASE1, "gaussian", 0.3), (CASE3, "wavepacket", 0.2),
                                              (ModelParams(0, 1e-3, 1e-3), "gaussian", 0.3)])
def test_exact_boundary_reproduces_discrete_whole_line(params, profile, T):
    grid = Grid.from_final_time(0, 1, 2.0**-8, 1e-3, T)
    u0 = sample_initial(profile, grid)
    oracle = discrete_whole_line(u0, params, grid, grid.N, SpectralConfig(max_domain_factor=2**14))
    rep = run(params, grid, exact_kernels(derive_ratios(params, grid), grid.N + 2), u0,
              reference=lambda t: oracle(int(round(t / grid.dt))), snapshots=20)
    assert rep.E_P < 1e-10
    assert rep.max_relative_residual < 1e-10


def test_case1_energy_over_1000_steps():
    grid = Grid.from_final_time(0, 1, 2.0**-8, 1e-3, 1.0)
    u0 = sample_initial("gaussian", grid)
    rep = run(CASE1, grid, exact_kernels(derive_ratios(CASE1, grid), grid.N + 2), u0)
    assert len(energy_increases(rep.energy)) == 0
    assert np.all(rep.energy >= 0)


def test_dirichlet_closure_pins_ghosts():
    grid = Grid.from_final_time(0, 1, 2.0**-7, 1e-3, 0.05)
    m = assemble_dirichlet(derive_ratios(CASE1, grid), grid.J)
    u = m.solve(m.apply_B(sample_initial("gaussian", grid)))
    assert np.max(np.abs(u[[0, 1, -2, -1]])) < 1e-20
    out = run_dirichlet(CASE1, grid, sample_initial("gaussian", grid), [0, 3, 50])
    assert sorted(out) == [0, 3, 50]
    assert len(out[3]) == grid.J + 1


def test_dirichlet_agrees_with_tbc_on_large_domain():
    dx, dt, T = 2.0**-7, 1e-3, 0.2
    grid = Grid.from_final_time(0, 1, dx, dt, T)
    big = Grid.from_final_time(-31.5, 32.5, dx, dt, T)
    rep = run(CASE1, grid, exact_kernels(derive_ratios(CASE1, grid), grid.N + 2),
              sample_initial("gaussian", grid), snapshots=10)
    d = run_dirichlet(CASE1, big, sample_initial("gaussian", big), rep.snapshot_steps)
    off = int(round(31.5 / dx))
    for k, n in enumerate(rep.snapshot_steps):
        assert relative_l2_error(rep.snapshots[k], d[n][off:off + grid.J + 1], grid) < 1e-10


def test_snapshot_steps():
    assert snapshot_steps(0, 10).tolist() == [0]
    assert snapshot_steps(10, 100).tolist() == list(range(11))
    s = snapshot_steps(4000, 100)
    assert s[0] == 0 and s[-1] == 4000 and len(s) == 101


def test_cost_growth_with_steps():
    # O(J N + N^2): doubling N costs at most 1.5x the quadratic model
    grid_a = Grid.from_final_time(0, 1, 2.0**-8, 1e-3, 1.0)
    grid_b = Grid.from_final_time(0, 1, 2.0**-8, 1e-3, 2.0)
    k = exact_kernels(derive_ratios(CASE1, grid_b), grid_b.N + 2)
    times = []
    for g in (grid_a, grid_b):
        u0 = sample_initial("gaussian", g)
        t0 = time.perf_counter()
        run(CASE1, g, k, u0, snapshots=1)
        times.append(time.perf_counter() - t0)
    assert times[1] / times[0] <= 1.5 * 4
