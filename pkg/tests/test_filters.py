import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ilcbench.errors import (
    InfeasibleDesignError,
    InvalidParameterError,
    InversionSingularityError,
    PreviewBudgetError,
)
from ilcbench.filters import (
    NoncausalFilter,
    apply_noncausal,
    band_mask,
    design_inverse_L,
    design_Q,
    zero_phase_magnitude,
)
from ilcbench.ilc import check_convergence
from ilcbench.signal_lti import Frf, Signal, TransferFunction, default_grid, lifted_matrix, simulate

TS = 1e-3


def random_filter(rng, max_pre=6, max_past=6):
    p = int(rng.integers(0, max_pre + 1))
    n = p + int(rng.integers(1, max_past + 2))
    return NoncausalFilter(rng.normal(size=n), p, TS)


def interior_signal(rng, n=2000, pad=300):
    x = np.zeros(n)
    x[pad:-pad] = rng.normal(size=n - 2 * pad)
    return Signal(x, TS)


# ---------------------------------------------------------------- apply_noncausal


def test_preview_shift_moves_impulse_back():
    d = 4
    out = apply_noncausal(NoncausalFilter.shift(-d, TS), Signal.impulse(20, TS, at=d))
    assert np.array_equal(out.samples, Signal.impulse(20, TS, at=0).samples)


def test_identity_filter_is_identity(rng):
    x = Signal(rng.normal(size=30), TS)
    assert apply_noncausal(NoncausalFilter.identity(TS), x) == x


def test_apply_noncausal_matches_lifted(rng):
    filt = random_filter(rng)
    x = Signal(rng.normal(size=128), TS)
    np.testing.assert_allclose(apply_noncausal(filt, x).samples, lifted_matrix(filt, 128).matrix @ x.samples,
                               atol=1e-10)


@given(st.integers(0, 10_000), st.integers(1, 200))
def test_apply_noncausal_lifted_property(seed, n):
    rng = np.random.default_rng(seed)
    filt = random_filter(rng, 10, 10)
    x = Signal(rng.normal(size=n), TS)
    np.testing.assert_allclose(apply_noncausal(filt, x).samples, lifted_matrix(filt, n).matrix @ x.samples,
                               atol=1e-10)


@given(st.integers(0, 10_000))
def test_filter_algebra_in_frequency(seed):
    rng = np.random.default_rng(seed)
    a, b = random_filter(rng), random_filter(rng)
    w = np.linspace(1.0, np.pi / TS, 40)
    np.testing.assert_allclose(a.compose(b).response(w), a.response(w) * b.response(w), atol=1e-10)
    np.testing.assert_allclose(a.adjoint().response(w), np.conj(a.response(w)), atol=1e-12)
    np.testing.assert_allclose((a + b).response(w), a.response(w) + b.response(w), atol=1e-12)


def test_adjoint_is_lifted_transpose(rng):
    f = random_filter(rng)
    np.testing.assert_array_equal(lifted_matrix(f.adjoint(), 40).matrix, lifted_matrix(f, 40).matrix.T)


# ---------------------------------------------------------------- design_inverse_L


@pytest.mark.parametrize("d", [1, 3, 7])
def test_inverse_of_delay_is_pure_preview(d):
    L = design_inverse_L(TransferFunction.delay(d, TS), 20)
    assert L.n_preview == d
    assert L.tap(-d) == 1.0
    assert np.count_nonzero(L.taps) == 1


def test_inverse_of_static_gain():
    L = design_inverse_L(TransferFunction.gain(4.0, TS), 0)
    assert L.n_preview == 0 and np.count_nonzero(L.taps) == 1
    assert L.tap(0) == pytest.approx(0.25, rel=1e-15)


def test_inverse_nmp_residual(rng):
    model = TransferFunction([0.0, 1.0, 1.2], [1.0, -0.5], TS)  # zero at z = -1.2, one delay
    L = design_inverse_L(model, 200)
    assert 0 < L.n_preview <= 200
    x = interior_signal(rng)
    back = simulate(model, apply_noncausal(L, x))
    assert (back - x).norm() / x.norm() < 1e-6


def test_inverse_printer_residual(rng, printer):
    x = interior_signal(rng, 6000, 2500)  # causal tail of the printer inverse is long
    back = simulate(printer.sc.PS, apply_noncausal(printer.L_exact, x))
    assert (back - x).norm() / x.norm() < 1e-6


def test_inverse_response_matches_reciprocal(printer):
    w = printer.grid
    np.testing.assert_allclose(printer.L_exact.response(w) * printer.frf.siso, 1.0,
                               atol=max(1e-8, printer.L_exact.truncation_error * np.max(np.abs(printer.frf.siso))))


def test_inverse_unit_circle_zero_rejected():
    with pytest.raises(InversionSingularityError):
        design_inverse_L(TransferFunction([0.0, 1.0, 1.0], [1.0, -0.5], TS), 200)  # zero at -1


def test_inverse_integrator_rejected():
    with pytest.raises(InversionSingularityError):
        design_inverse_L(TransferFunction([0.0, 1.0], [1.0, -1.0], TS), 200)


def test_inverse_budget_error_reports_required():
    model = TransferFunction([0.0, 1.0, 1.05], [1.0], TS)  # slow anticausal decay
    with pytest.raises(PreviewBudgetError) as exc:
        design_inverse_L(model, 50)
    assert exc.value.required > 50
    L = design_inverse_L(model, exc.value.required)
    assert L.n_preview == exc.value.required


def test_inverse_negative_budget():
    with pytest.raises(InvalidParameterError):
        design_inverse_L(TransferFunction.gain(1.0, TS), -1)


# ---------------------------------------------------------------- zero-phase magnitude


def test_zero_phase_identity():
    grid = default_grid(TS, 50)
    np.testing.assert_allclose(zero_phase_magnitude(NoncausalFilter.identity(TS), grid).siso, 1.0)


def test_zero_phase_averager():
    grid = default_grid(TS, 50)
    h = zero_phase_magnitude(NoncausalFilter([0.5, 0.5], 0, TS), grid).siso
    np.testing.assert_allclose(h, np.cos(grid * TS / 2) ** 2, atol=1e-14)


@given(st.integers(0, 10_000))
def test_zero_phase_is_squared_magnitude(seed):
    rng = np.random.default_rng(seed)
    qt = random_filter(rng, 5, 12)
    grid = default_grid(TS, 80)
    h = zero_phase_magnitude(qt, grid).siso
    assert np.max(np.abs(h.imag)) <= 1e-12 * max(1.0, np.max(np.abs(h)))
    np.testing.assert_allclose(h.real, np.abs(qt.response(grid)) ** 2, atol=1e-10)


# ---------------------------------------------------------------- design_Q


def test_design_Q_degenerate_identity(printer):
    Q = design_Q(printer.frf, printer.L_exact, printer.mask)
    assert Q == NoncausalFilter.identity(TS)
    assert Q.margin > 0.5


def test_design_Q_accurate_model(printer):
    Q, frf, w = printer.Q, printer.frf, printer.grid
    mod = np.abs(1 - frf.siso * printer.L_acc.response(w))
    q = Q.response(w)
    viol = printer.mask & (mod >= 1.0)
    assert viol.any()
    assert np.all(np.abs(q[viol]) < 1.0 / mod[viol])
    # passband: about one where the loop already contracts with margin at low frequency
    low = printer.mask & (w / 2 / np.pi < 5.0)
    np.testing.assert_allclose(q[low].real, 1.0, atol=0.01)


def test_design_Q_rigid_body_passes(printer):
    rep_raw = check_convergence(printer.frf, printer.L_rigid, printer.I, printer.mask)
    assert not rep_raw.passed
    Q = design_Q(printer.frf, printer.L_rigid, printer.mask)
    rep = check_convergence(printer.frf, printer.L_rigid, Q, printer.mask)
    assert rep.passed
    assert 1.0 - rep.sup_rho == pytest.approx(Q.margin, abs=1e-12)


@pytest.mark.parametrize("which", ["Q", "rigid"])
def test_design_Q_zero_phase(printer, which):
    Q = printer.Q if which == "Q" else design_Q(printer.frf, printer.L_rigid, printer.mask)
    h = Q.response(printer.grid)
    assert np.max(np.abs(h.imag)) <= 1e-10
    assert np.min(h.real) >= -1e-10
    assert np.max(h.real) <= 1.0 + 1e-10


def test_design_Q_infeasible_reports_frequency():
    grid = default_grid(TS, 100)
    frf = Frf(grid, -np.ones(grid.size, dtype=complex), TS)  # |1 - GS L| = 2 everywhere
    with pytest.raises(InfeasibleDesignError) as exc:
        design_Q(frf, NoncausalFilter.identity(TS), band_mask(grid, 1.0, 400.0))
    assert exc.value.worst_frequency / (2 * np.pi) >= 1.0


def test_design_Q_empty_mask(printer):
    with pytest.raises(InvalidParameterError):
        design_Q(printer.frf, printer.L_acc, np.zeros(printer.grid.size, dtype=bool))
