"""Frequency-domain ILC: convergence certificate, learning update, trial
loop, fixed-point prediction and a finite-time (lifted) cross-check.

The update is ``f_{j+1} = Q (f_j + alpha L e_j)`` with two-sided FIR ``L`` and
``Q`` applied over the whole record. Monotone convergence in the l2 norm
holds when ``|Q (1 - GS L)| < 1`` at every frequency of interest; the
residual then converges to ``e_inf = (1 - Q) / (1 - Q (1 - GS L)) e_0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionError,
    FixedPointUndefinedError,
    InvalidParameterError,
    SimulationOverflowError,
)
from .filters import NoncausalFilter, _resolve_mask, apply_noncausal
from .signal_lti import (
    Frf,
    LiftedOperator,
    Signal,
    TransferFunction,
    check_ts,
    default_grid,
    freq_response,
    impulse_response,
    lifted_matrix,
    tf_response,
)

DIVERGENCE_FACTOR = 1e3


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    grid: np.ndarray  # rad/s
    rho: np.ndarray  # over the full grid
    mask: np.ndarray
    sup_rho: float
    worst_frequency: float  # rad/s, argmax of rho on the mask

    @property
    def verdict(self) -> str:
        return "pass" if self.sup_rho < 1.0 else "fail"

    @property
    def passed(self) -> bool:
        return self.sup_rho < 1.0

    def to_dict(self) -> dict:
        return {
            "grid_rad_s": self.grid.tolist(),
            "rho": self.rho.tolist(),
            "mask": self.mask.astype(int).tolist(),
            "sup_rho": float(self.sup_rho),
            "worst_frequency_hz": float(self.worst_frequency / (2 * np.pi)),
            "verdict": self.verdict,
        }


def _report(w, rho, mask) -> ConvergenceReport:
    m = _resolve_mask(mask, w.size)
    rm = np.where(m, rho, -np.inf)
    k = int(np.argmax(rm))
    return ConvergenceReport(np.array(w), np.asarray(rho, dtype=float), m, float(rho[k]), float(w[k]))


def check_convergence(frf_GS: Frf, L: NoncausalFilter, Q: NoncausalFilter, mask=None) -> ConvergenceReport:
    """Evaluate ``rho(w) = |Q(w)| |1 - GS(w) L(w)|`` on the FRF grid."""
    check_ts(frf_GS.ts, L.ts)
    check_ts(frf_GS.ts, Q.ts)
    w = frf_GS.frequencies
    rho = np.abs(Q.response(w)) * np.abs(1.0 - frf_GS.siso * L.response(w))
    return _report(w, rho, mask)


def _filter_matrix(F, n, ts):
    """Normalise a filter matrix (nested lists, ``None`` = zero) to ``n x n``."""
    if isinstance(F, NoncausalFilter):
        # one filter on every channel
        return [[F if i == j else None for j in range(n)] for i in range(n)]
    rows = [list(r) for r in F]
    if len(rows) != n or any(len(r) != n for r in rows):
        raise DimensionError(f"filter matrix must be {n}x{n}")
    for r in rows:
        for f in r:
            if f is not None:
                check_ts(ts, f.ts)
    return rows


def _matrix_response(F, w):
    n = len(F)
    out = np.zeros((w.size, n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            if F[i][j] is not None:
                out[:, i, j] = F[i][j].response(w)
    return out


def check_convergence_mimo(frf_GS: Frf, L, Q, mask=None) -> ConvergenceReport:
    """``rho(w) = sigma_max(Q(w) (I - GS(w) L(w)))`` for square systems.

    ``L`` and ``Q`` are nested lists of filters (``None`` for zero entries)
    or a single filter used on every diagonal entry.
    """
    no, ni = frf_GS.shape
    if no != ni:
        raise DimensionError(f"MIMO check needs a square FRF, got {no}x{ni}")
    w = frf_GS.frequencies
    Lm = _matrix_response(_filter_matrix(L, no, frf_GS.ts), w)
    Qm = _matrix_response(_filter_matrix(Q, no, frf_GS.ts), w)
    M = Qm @ (np.eye(no) - frf_GS.values @ Lm)
    rho = np.linalg.svd(M, compute_uv=False)[:, 0]
    return _report(w, rho, mask)


def _check_alpha(alpha):
    if not (np.isfinite(alpha) and 0.0 < alpha <= 1.0):
        raise InvalidParameterError(f"learning gain must lie in (0, 1], got {alpha!r}")


def _windowed(e: Signal, skip: int) -> Signal:
    if skip <= 0:
        return e
    x = e.samples.copy()
    x[:skip] = 0.0
    return Signal(x, e.ts)


def ilc_update(f_j: Signal, e_j: Signal, L: NoncausalFilter, Q: NoncausalFilter,
               alpha: float = 1.0, skip: int = 0) -> Signal:
    """``f_{j+1} = Q (f_j + alpha L e_j)``.

    The first ``skip`` error samples are ignored. Correcting them would need
    feedforward before the record starts (the preview of ``L``), which is
    lost; learning from them anyway injects a spurious transient.
    """
    _check_alpha(alpha)
    f_j._other(e_j)
    return apply_noncausal(Q, f_j + alpha * apply_noncausal(L, _windowed(e_j, skip)))


@dataclass(frozen=True, eq=False)
class TrialHistory:
    """Iterates of one learning run. ``f[j]`` was applied in task ``j`` and
    produced ``e[j]``. MIMO runs store tuples of per-channel signals."""

    f: list
    e: list
    e_norms: np.ndarray
    f_norms: np.ndarray
    diverged: bool = False
    first_rising: int | None = None  # first j with ||e_j|| > ||e_{j-1}||
    f_next: object = field(default=None, repr=False)  # update computed from the last task

    @property
    def n_tasks(self) -> int:
        return len(self.e)

    @property
    def f_inf(self):
        """Best available estimate of the converged feedforward."""
        return self.f_next if self.f_next is not None else self.f[-1]

    def rows(self):
        """``(task, ||e||_2, ||f||_2)`` per task."""
        return [(j, float(a), float(b)) for j, (a, b) in enumerate(zip(self.e_norms, self.f_norms))]


def _first_rising(norms):
    up = np.flatnonzero(np.diff(norms) > 0)
    return int(up[0] + 1) if up.size else None


def _stack_norm(x):
    if isinstance(x, Signal):
        return x.norm()
    return float(np.sqrt(sum(s.norm() ** 2 for s in x)))


def _learn(task, update, f0, n_iter, task_offset):
    f, e, en, fn = [], [], [], []
    fj = f0
    diverged = False
    f_next = None
    for j in range(n_iter + 1):
        try:
            ej = task(fj, task_offset + j)
        except SimulationOverflowError as exc:
            raise SimulationOverflowError(str(exc), index=exc.index, iteration=j) from exc
        f.append(fj)
        e.append(ej)
        en.append(_stack_norm(ej))
        fn.append(_stack_norm(fj))
        if not np.isfinite(en[-1]) or en[-1] > DIVERGENCE_FACTOR * en[0]:
            diverged = True
            break
        fj = update(fj, ej)
        f_next = fj
    en = np.array(en)
    return TrialHistory(f, e, en, np.array(fn), diverged, _first_rising(en), f_next)


def run_ilc(sc, r: Signal, L: NoncausalFilter, Q: NoncausalFilter, alpha: float = 1.0,
            n_iter: int = 10, f0: Signal | None = None, task_offset: int = 0,
            skip: int | None = None) -> TrialHistory:
    """Alternate tasks and updates starting at ``f_0`` (zero by default).

    Performs ``n_iter`` updates, so ``n_iter + 1`` tasks are recorded. The
    run stops early and is flagged as diverged once ``||e_j||`` exceeds
    ``1e3 ||e_0||``. ``skip`` defaults to the preview length of ``L``, see
    :func:`ilc_update`.
    """
    from .plant_lab import run_task

    if n_iter < 0:
        raise InvalidParameterError("n_iter must be >= 0")
    _check_alpha(alpha)
    skip = L.n_preview if skip is None else int(skip)
    f0 = Signal.zeros(len(r), r.ts) if f0 is None else f0
    return _learn(lambda f, k: run_task(sc, r, f, k).e,
                  lambda f, e: ilc_update(f, e, L, Q, alpha, skip), f0, n_iter, task_offset)


def _apply_matrix(F, x):
    n = len(F)
    out = []
    for i in range(n):
        acc = np.zeros(len(x[0]))
        for j in range(n):
            if F[i][j] is not None:
                acc += apply_noncausal(F[i][j], x[j]).samples
        out.append(Signal(acc, x[0].ts))
    return tuple(out)


def ilc_update_mimo(f_j, e_j, L, Q, alpha: float = 1.0, skip: int = 0):
    """Matrix version of :func:`ilc_update` on tuples of channel signals."""
    _check_alpha(alpha)
    n = len(f_j)
    Lm = _filter_matrix(L, n, f_j[0].ts)
    Qm = _filter_matrix(Q, n, f_j[0].ts)
    le = _apply_matrix(Lm, tuple(_windowed(e, skip) for e in e_j))
    return _apply_matrix(Qm, tuple(a + alpha * b for a, b in zip(f_j, le)))


def _max_preview(F, n, ts):
    return max((f.n_preview for row in _filter_matrix(F, n, ts) for f in row if f is not None), default=0)


def run_ilc_mimo(sc, r, L, Q, alpha: float = 1.0, n_iter: int = 10,
                 skip: int | None = None) -> TrialHistory:
    """Learning loop on a :class:`~ilcbench.plant_lab.CoupledScenario`;
    ``r`` is a tuple of per-axis references."""
    from .plant_lab import run_task_mimo

    _check_alpha(alpha)
    r = tuple(r)
    skip = _max_preview(L, len(r), r[0].ts) if skip is None else int(skip)
    f0 = tuple(Signal.zeros(len(x), x.ts) for x in r)
    return _learn(lambda f, k: run_task_mimo(sc, r, f, k),
                  lambda f, e: ilc_update_mimo(f, e, L, Q, alpha, skip), f0, n_iter, 0)


# --------------------------------------------------------------------------
# Fixed point
# --------------------------------------------------------------------------


def _model_at(model, w):
    if isinstance(model, TransferFunction):
        return tf_response(model, w)
    # Frf: linear interpolation of real and imaginary parts, held at the ends
    g = model.siso
    return np.interp(w, model.frequencies, g.real) + 1j * np.interp(w, model.frequencies, g.imag)


def _model_frf(model, grid):
    if isinstance(model, Frf):
        return model
    return freq_response(model, default_grid(model.ts) if grid is None else grid)


def _fixed_point_check(model, L, Q, mask, grid):
    rep = check_convergence(_model_frf(model, grid), L, Q, mask)
    if not rep.passed:
        raise FixedPointUndefinedError(
            f"learning loop does not contract (sup rho = {rep.sup_rho:.4g} at "
            f"{rep.worst_frequency / 2 / np.pi:.4g} Hz); no fixed point")


def _spectral_apply(model, L, Q, x: Signal, transfer) -> Signal:
    check_ts(x.ts, L.ts)
    n = len(x)
    m = 1 << int(np.ceil(np.log2(max(4 * n, 2))))
    w = 2 * np.pi * np.fft.rfftfreq(m, x.ts)
    T = transfer(_model_at(model, w), Q.response(w), L.response(w))
    y = np.fft.irfft(np.fft.rfft(x.samples, m) * T, m)
    # anything the noncausal transfer puts before t=0 wraps to the buffer end
    return Signal(y[:n], x.ts)


def asymptotic_error(model, L: NoncausalFilter, Q: NoncausalFilter, e0: Signal,
                     mask=None, grid=None) -> Signal:
    """Fixed point ``e_inf = (1 - Q) / (1 - Q (1 - GS L)) e_0``.

    ``model`` is the process sensitivity as a transfer function (evaluated
    exactly on the DFT bins) or as an FRF (interpolated). The record is
    zero-padded to at least four times its length before transforming, so
    the result approximates linear rather than circular filtering. Raises
    :class:`FixedPointUndefinedError` unless the learning loop contracts on
    the mask.
    """
    _fixed_point_check(model, L, Q, mask, grid)
    return _spectral_apply(model, L, Q, e0, lambda g, q, l: (1.0 - q) / (1.0 - q * (1.0 - g * l)))


def asymptotic_feedforward(model, L: NoncausalFilter, Q: NoncausalFilter, e0: Signal,
                           mask=None, grid=None) -> Signal:
    """Converged feedforward ``f_inf = Q L / (1 - Q (1 - GS L)) e_0``, with the
    same spectral evaluation and precondition as :func:`asymptotic_error`."""
    _fixed_point_check(model, L, Q, mask, grid)
    return _spectral_apply(model, L, Q, e0, lambda g, q, l: q * l / (1.0 - q * (1.0 - g * l)))


# --------------------------------------------------------------------------
# Finite-time cross-check
# --------------------------------------------------------------------------


def _process_sensitivity(model):
    if isinstance(model, TransferFunction):
        return model
    ps = getattr(model, "PS", None)
    if not isinstance(ps, TransferFunction):
        raise InvalidParameterError("expected a SISO scenario or a process-sensitivity transfer function")
    return ps


def _composed(J: TransferFunction, L: NoncausalFilter, n: int) -> NoncausalFilter:
    """``J L`` as a two-sided filter, exact on lags ``< n``."""
    h = impulse_response(J, n + L.n_preview + 1)
    return NoncausalFilter(np.convolve(h, L.taps), L.n_preview, J.ts)


def lifted_contraction_oracle(sc, L, Q, N: int = 2000) -> float:
    """Largest singular value of the ``N x N`` lifted iteration matrix
    ``Q_N (I - (J L)_N)``, with ``J`` the process sensitivity of ``sc`` (a
    scenario or the transfer function itself).

    The product ``J L`` is formed before lifting. Lifting the factors
    separately drops the feedforward that the preview of ``L`` places before
    the first sample; with a high-gain inverse that start-up corner alone can
    carry a gain far above the frequency-domain value, see
    :func:`finite_record_gain`. ``L`` and ``Q`` may also be given directly as
    :class:`LiftedOperator` (e.g. an exact lifted inverse), in which case
    ``J_N L_N`` is used as is.
    """
    if N < 1:
        raise InvalidParameterError("N must be >= 1")
    J = _process_sensitivity(sc)
    if isinstance(L, LiftedOperator):
        JL = lifted_matrix(J, N).matrix @ L.matrix
    else:
        JL = lifted_matrix(_composed(J, L, N), N).matrix
    Qn = Q.matrix if isinstance(Q, LiftedOperator) else lifted_matrix(Q, N).matrix
    if JL.shape != (N, N) or Qn.shape != (N, N):
        raise DimensionError("lifted operators must be N x N")
    return float(np.linalg.norm(Qn @ (np.eye(N) - JL), 2))


def finite_record_gain(sc, L: NoncausalFilter, Q: NoncausalFilter, N: int = 2000,
                       skip: int = 0) -> float:
    """Largest singular value of ``Q_N (I - J_N L_N W)`` with every factor
    lifted separately and ``W`` zeroing the first ``skip`` error samples.

    This is the operator a finite record actually applies. Its gap to the
    frequency-domain ``sup rho`` measures the start-up effect.
    """
    J = lifted_matrix(_process_sensitivity(sc), N).matrix
    Ln = lifted_matrix(L, N).matrix.copy()
    Ln[:, :skip] = 0.0
    Qn = lifted_matrix(Q, N).matrix
    return float(np.linalg.norm(Qn @ (np.eye(N) - J @ Ln), 2))
