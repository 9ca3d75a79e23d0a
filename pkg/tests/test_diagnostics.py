import numpy as np
import pytest
from hypothesis import given, strategies as st

from kdvtbc.diagnostics import (ConvergenceRow, DiagnosticsError, RunReport, convergence_csv,
                                convergence_table, decay_fit, discrete_energy,
                                dissipativity_matrices, dissipativity_sweep, energy_increases,
                                l2_norm, relative_l2_error, trapezoid_weights)
from kdvtbc.kernels import exact_kernels
from kdvtbc.model import Grid, ModelParams, derive_ratios, new_field, sample_initial

CASE1 = ModelParams(0, 0, 1e-3)
GRID = Grid(0, 1, 2.0**-6, 1e-3)


def test_relative_error_identity_and_scaling():
    u = sample_initial("gaussian", GRID)
    assert relative_l2_error(u, u, GRID) == 0.0
    assert relative_l2_error(2 * u, u, GRID) == pytest.approx(1.0, rel=1e-15)


@pytest.mark.parametrize("j", [0, 7, GRID.J])
def test_relative_error_single_node(j):
    ref = sample_initial("gaussian", GRID)[2:-2]
    u = ref.copy()
    u[j] += 0.25
    w = trapezoid_weights(GRID.J, GRID.dx)
    want = 0.25 * np.sqrt(w[j]) / l2_norm(ref, GRID)
    assert relative_l2_error(u, ref, GRID) == pytest.approx(want, rel=1e-14)


def test_relative_error_rejects_zero_reference():
    with pytest.raises(DiagnosticsError):
        relative_l2_error(np.ones(GRID.J + 1), np.zeros(GRID.J + 1), GRID)


def test_relative_error_rejects_mismatch():
    with pytest.raises(DiagnosticsError):
        relative_l2_error(np.ones(5), np.ones(5), GRID)


def test_energy_examples():
    assert discrete_energy(new_field(GRID), GRID, CASE1) == 0
    u = new_field(GRID)
    u[3:GRID.J + 3] = 1.0  # nodes 1..J
    assert discrete_energy(u, GRID, CASE1) == GRID.J / 2
    g = Grid(0, 6, 1.0, 1e-3)
    e1 = new_field(g)
    e1[3] = 1.0
    assert discrete_energy(e1, g, ModelParams(0, 1, 1)) == 1.5


def test_energy_needs_ghosts():
    with pytest.raises(DiagnosticsError):
        discrete_energy(np.ones(GRID.J + 1), GRID, CASE1)


@given(st.floats(0, 1), st.integers(0, 2**32 - 1))
def test_energy_nonnegative(alpha, seed):
    u = np.random.default_rng(seed).standard_normal(GRID.size)
    assert discrete_energy(u, GRID, ModelParams(0, alpha, 1e-3)) >= 0


def test_energy_increases_tolerance():
    e = [1.0, 1.0 + 1e-13, 1.0 + 1e-9, 0.5]
    assert energy_increases(e).tolist() == [1]


def ratios_case1():
    return derive_ratios(CASE1, Grid(0, 1, 2.0**-8, 1e-3))


def test_boundary_matrices_hermitian_and_trace():
    r = ratios_case1()
    k = exact_kernels(r, 400)
    th = 0.7
    sym = tuple(np.asarray(v).item() for v in k.symbols(np.exp(1j * th)))
    A_s, A_u, es, eu = dissipativity_matrices(th, sym, r)
    assert np.array_equal(A_s, A_s.conj().T)
    assert np.array_equal(A_u, A_u.conj().T)
    ss, ps, su, pu = sym
    z = np.exp(1j * th)
    w = abs(z + 1) ** 2
    alpha_s = w / 2 * (-ps).real
    beta_s = w / 2 * (ss * ss - ps + (r.a - 2) * ss).real - r.mu * np.sin(th) * ss.imag
    assert np.trace(A_s).real == pytest.approx(alpha_s + beta_s, abs=1e-12)
    assert es == pytest.approx(np.linalg.eigvalsh(A_s)[0], abs=1e-14)


def test_boundary_matrices_reject_degenerate_angle():
    with pytest.raises(DiagnosticsError):
        dissipativity_matrices(5e-4, (0, 0, 0, 0), ratios_case1())
    with pytest.raises(DiagnosticsError):
        dissipativity_matrices(np.pi - 1e-4, (0, 0, 0, 0), ratios_case1())


def test_dissipativity_sweep_case1_is_reported():
    r = ratios_case1()
    rows = dissipativity_sweep(exact_kernels(r, 2000), r, np.linspace(0.01, np.pi - 0.01, 40))
    assert rows.shape == (40, 3)
    assert np.all(np.isfinite(rows))


def test_decay_fit_exact_power():
    n = np.arange(1, 2001, dtype=float)
    seq = np.concatenate([[1.0], n**-1.5])
    slope, r2 = decay_fit(seq, 10, 1000)
    assert slope == pytest.approx(-1.5, abs=1e-12)
    assert r2 == pytest.approx(1.0, abs=1e-12)


def test_decay_fit_perturbed():
    n = np.arange(0, 2001, dtype=float)
    seq = 5 * np.where(n > 0, n, 1) ** -1.5 * (1 + 0.01 * np.sin(n))
    slope, _ = decay_fit(seq, 10, 1000)
    assert -1.52 <= slope <= -1.48


def test_decay_fit_errors():
    with pytest.raises(DiagnosticsError, match="10 points"):
        decay_fit(np.ones(30), 10, 18)
    seq = np.ones(100)
    seq[20] = 0
    with pytest.raises(DiagnosticsError):
        decay_fit(seq, 10, 50)


def test_convergence_table_h2():
    hs = [2.0**-k for k in range(7, 11)]
    rows = convergence_table(hs, [3 * h**2 for h in hs])
    assert rows[0].order is None
    for r in rows[1:]:
        assert abs(r.order - 2.0) <= 1e-12
        assert r.monotone


def test_convergence_table_nonhalving():
    hs = [4e-2, 2e-2, 1e-2, 5e-3, 3e-3]
    rows = convergence_table(hs, [h**2 for h in hs])
    assert all(abs(r.order - 2) < 1e-12 for r in rows[1:])


def test_convergence_table_flags_saturation():
    rows = convergence_table([1, 0.5, 0.25], [1e-3, 2e-4, 3e-4])
    assert rows[1].monotone and not rows[2].monotone
    assert rows[2].order < 0


def test_convergence_table_errors():
    with pytest.raises(DiagnosticsError, match=">= 3"):
        convergence_table([1, 0.5], [1, 0.25])
    with pytest.raises(DiagnosticsError):
        convergence_table([1, 0.5, 0.25], [1, 0.25])


def test_convergence_table_failed_point():
    rows = convergence_table([1, 0.5, 0.25], [1e-2, float("nan"), 1e-4])
    assert rows[1].order is None and rows[2].order is None


def test_convergence_csv():
    text = convergence_csv([ConvergenceRow(0.5, 0.25, None), ConvergenceRow(0.25, 0.0625, 2.0)])
    assert text == "h,E_P,order\n0.5,0.25,\n0.25,0.0625,2.0\n"


def make_report():
    return RunReport(errors=np.array([0.1, 0.3, 0.2]), error_steps=np.array([0, 1, 2]),
                     energy=np.array([2.0, 1.5, 1.0]), residuals=np.array([1e-16, 0.0]),
                     u_norms=np.array([1.0, 0.5]), snapshot_steps=np.array([0, 2]),
                     snapshots=np.array([[1.0, 2.0], [3.0, 4.0]]), x=np.array([0.0, 1.0]),
                     dt=0.5)


def test_report_fields():
    rep = make_report()
    assert rep.E_P == 0.3
    assert rep.max_relative_residual == 1e-16
    s = rep.summary()
    assert s["steps"] == 2 and s["energy_increases"] == 0 and s["E_P"] == 0.3


def test_report_csv_formats():
    rep = make_report()
    assert rep.series_csv() == ("step,t,err,energy\n0,0.0,0.1,2.0\n1,0.5,0.3,1.5\n"
                                "2,1.0,0.2,1.0\n")
    assert rep.snapshots_csv() == "t,x,u\n0.0,0.0,1.0\n0.0,1.0,2.0\n1.0,0.0,3.0\n1.0,1.0,4.0\n"


def test_report_without_errors():
    rep = make_report()
    rep.errors, rep.error_steps = np.array([]), np.array([], dtype=int)
    assert np.isnan(rep.E_P)
    assert rep.summary()["E_P"] is None
