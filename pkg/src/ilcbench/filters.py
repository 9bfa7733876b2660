"""Two-sided FIR filters: learning filter by model inversion and zero-phase
robustness filter.

A :class:`NoncausalFilter` acts on a complete record, so it may use future
samples (preview). ``taps[i]`` multiplies ``x[t - lag]`` with
``lag = i - n_preview``; negative lags are preview.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.signal import firwin, kaiserord, lfilter

from .errors import (
    InfeasibleDesignError,
    InvalidParameterError,
    InversionSingularityError,
    PreviewBudgetError,
)
from .signal_lti import Frf, Signal, TransferFunction, _check_grid, check_ts, default_grid

UNIT_CIRCLE_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class NoncausalFilter:
    taps: np.ndarray
    n_preview: int
    ts: float
    truncation_error: float = 0.0
    margin: float | None = None

    def __post_init__(self):
        taps = np.array(self.taps, dtype=float).ravel()
        if taps.size == 0 or not np.all(np.isfinite(taps)):
            raise InvalidParameterError("filter needs a finite, non-empty tap vector")
        p = int(self.n_preview)
        if p < 0:
            raise InvalidParameterError("n_preview must be >= 0")
        # always cover lag 0 so that the causal/anticausal split is explicit
        if p > taps.size - 1:
            taps = np.r_[taps, np.zeros(p - taps.size + 1)]
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)
        object.__setattr__(self, "n_preview", p)
        object.__setattr__(self, "ts", float(self.ts))

    @classmethod
    def identity(cls, ts):
        return cls([1.0], 0, ts)

    @classmethod
    def zero(cls, ts):
        return cls([0.0], 0, ts)

    @classmethod
    def shift(cls, lag: int, ts, gain: float = 1.0):
        """``gain * z^(-lag)``; a negative lag is a pure preview."""
        if lag >= 0:
            return cls(np.r_[np.zeros(lag), gain], 0, ts)
        return cls(np.r_[gain, np.zeros(-lag)], -lag, ts)

    @classmethod
    def from_tf(cls, tf: TransferFunction, n_taps: int):
        """Causal FIR truncation of a transfer function's impulse response."""
        x = np.zeros(n_taps)
        x[0] = 1.0
        return cls(lfilter(tf.num, tf.den, x), 0, tf.ts)

    @property
    def n_past(self) -> int:
        return self.taps.size - 1 - self.n_preview

    @property
    def lags(self) -> np.ndarray:
        return np.arange(self.taps.size) - self.n_preview

    def tap(self, lag: int) -> float:
        i = lag + self.n_preview
        return float(self.taps[i]) if 0 <= i < self.taps.size else 0.0

    def response(self, w) -> np.ndarray:
        """Frequency response at ``w`` (rad/s), no range checks."""
        w = np.asarray(w, dtype=float)
        ph = np.exp(-1j * np.outer(w * self.ts, self.lags))
        return ph @ self.taps

    def freq_response(self, grid=None) -> Frf:
        grid = default_grid(self.ts) if grid is None else grid
        w = _check_grid(grid, self.ts)
        return Frf(w, self.response(w), self.ts)

    def adjoint(self) -> "NoncausalFilter":
        """Time-reversed filter; its response is the complex conjugate."""
        return NoncausalFilter(self.taps[::-1], self.n_past, self.ts)

    def compose(self, other: "NoncausalFilter") -> "NoncausalFilter":
        check_ts(self.ts, other.ts)
        return NoncausalFilter(np.convolve(self.taps, other.taps),
                               self.n_preview + other.n_preview, self.ts,
                               truncation_error=self.truncation_error + other.truncation_error)

    def __mul__(self, other):
        if isinstance(other, NoncausalFilter):
            return self.compose(other)
        return NoncausalFilter(self.taps * float(other), self.n_preview, self.ts,
                               self.truncation_error * abs(float(other)), self.margin)

    __rmul__ = __mul__

    def __add__(self, other: "NoncausalFilter") -> "NoncausalFilter":
        check_ts(self.ts, other.ts)
        p = max(self.n_preview, other.n_preview)
        q = max(self.n_past, other.n_past)
        out = np.zeros(p + q + 1)
        out[p - self.n_preview: p - self.n_preview + self.taps.size] += self.taps
        out[p - other.n_preview: p - other.n_preview + other.taps.size] += other.taps
        return NoncausalFilter(out, p, self.ts,
                               truncation_error=self.truncation_error + other.truncation_error)

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __eq__(self, other):
        if not isinstance(other, NoncausalFilter):
            return NotImplemented
        return (self.n_preview == other.n_preview and self.ts == other.ts
                and np.array_equal(self.taps, other.taps))

    __hash__ = None


def apply_noncausal(filt: NoncausalFilter, x: Signal) -> Signal:
    """Two-sided convolution over the record with zero extension."""
    check_ts(filt.ts, x.ts)
    n = len(x)
    full = np.convolve(x.samples, filt.taps)
    p = filt.n_preview
    return Signal(full[p: p + n], x.ts)


# --------------------------------------------------------------------------
# Learning filter: stable inversion
# --------------------------------------------------------------------------


def _decay_length(radius: float, tol: float) -> int:
    if radius <= 0.0:
        return 1
    return int(np.ceil(np.log(tol) / np.log(radius))) + 1


def _series(poly_ascending, n):
    """First ``n`` coefficients of ``1 / poly`` as a power series."""
    x = np.zeros(n)
    x[0] = 1.0
    return lfilter([1.0], poly_ascending, x)


def design_inverse_L(model: TransferFunction, preview_budget: int, tol: float = 1e-10,
                     max_past: int | None = 20000) -> NoncausalFilter:
    """Two-sided FIR approximation of ``1 / model``.

    Zeros inside the unit circle are inverted causally, zeros outside are
    inverted anticausally (stable inversion) and a pure delay becomes pure
    preview. Each series is cut once its geometric decay passes ``tol``
    (relative). The causal part is additionally capped at ``max_past`` taps,
    which is harmless on records shorter than the cap.

    ``truncation_error`` on the result bounds ``sup_w |L(w) - 1/model(w)|``
    by the l1 norm of the discarded taps.
    """
    if model.is_zero:
        raise InversionSingularityError("cannot invert the zero system")
    poles = model.poles()
    if np.any(np.abs(poles - 1.0) < UNIT_CIRCLE_TOL):
        raise InversionSingularityError(
            "model has a pole at z=1 (integrator in the loop); inverting such a "
            "process sensitivity is not supported")
    zeros = model.zeros()
    on_circle = np.abs(np.abs(zeros) - 1.0) < UNIT_CIRCLE_TOL
    if np.any(on_circle):
        hint = ""
        if np.any(np.abs(zeros - 1.0) < UNIT_CIRCLE_TOL):
            hint = " (a zero at z=1 usually means an integrator in the controller; unsupported)"
        raise InversionSingularityError(
            f"model has zeros on the unit circle: {np.round(zeros[on_circle], 8).tolist()}{hint}")
    if preview_budget < 0:
        raise InvalidParameterError("preview_budget must be >= 0")

    d = model.delay_samples
    lead = model.num[d]
    inside = zeros[np.abs(zeros) < 1.0]
    outside = zeros[np.abs(zeros) > 1.0]

    # anticausal factor 1/prod(1 - o q) = z^M / prod(-o) * 1/prod(1 - z/o)
    n_out = outside.size
    if n_out:
        rho_a = float(np.max(1.0 / np.abs(outside)))
        n_anti = _decay_length(rho_a, tol)
        required = d + n_out + n_anti - 1
        if required > preview_budget:
            raise PreviewBudgetError(
                f"stable inversion needs {required} preview samples for tol={tol:g}, "
                f"budget is {preview_budget}", required)
        c = _series(np.real(np.poly(1.0 / outside)), 2 * n_anti)
        scale = float(np.real(np.prod(-outside)))
        anti_full = c / scale
        anti_tail = float(np.sum(np.abs(anti_full[n_anti:])))
        anti = anti_full[:n_anti]
        # lags -(M + n) for n = 0..n_anti-1, stored most-negative first
        anti_filter = NoncausalFilter(np.r_[anti[::-1], np.zeros(n_out)], n_out + n_anti - 1, model.ts)
    else:
        if d > preview_budget:
            raise PreviewBudgetError(
                f"model delay of {d} samples exceeds preview budget {preview_budget}", d)
        anti_filter = NoncausalFilter.identity(model.ts)
        anti_tail = 0.0

    # causal factor den / (lead * prod(1 - z_i q))
    mp = np.real(np.poly(inside)) * lead if inside.size else np.array([lead])
    rho_c = float(np.max(np.abs(inside))) if inside.size else 0.0
    n_causal = max(_decay_length(rho_c, tol), 1) + model.den.size
    if max_past is not None:
        n_causal = min(n_causal, max_past + 1)
    x = np.zeros(2 * n_causal)
    x[0] = 1.0
    h = lfilter(model.den, mp, x)
    causal_tail = float(np.sum(np.abs(h[n_causal:])))
    causal = NoncausalFilter(h[:n_causal], 0, model.ts)

    L = NoncausalFilter.shift(-d, model.ts).compose(anti_filter).compose(causal)
    err = (anti_tail * np.sum(np.abs(causal.taps))
           + causal_tail * np.sum(np.abs(anti_filter.taps)) + anti_tail * causal_tail)
    return NoncausalFilter(L.taps, L.n_preview, model.ts, truncation_error=float(err))


# --------------------------------------------------------------------------
# Robustness filter
# --------------------------------------------------------------------------


def band_mask(grid, f_lo_hz: float = 0.0, f_hi_hz: float = np.inf) -> np.ndarray:
    """Boolean mask selecting ``f_lo_hz <= w/2pi <= f_hi_hz``."""
    f = np.asarray(grid) / (2 * np.pi)
    return (f >= f_lo_hz) & (f <= f_hi_hz)


def _resolve_mask(mask, n):
    if mask is None:
        return np.ones(n, dtype=bool)
    m = np.asarray(mask, dtype=bool)
    if m.shape != (n,):
        raise InvalidParameterError(f"mask must have shape ({n},), got {m.shape}")
    if not m.any():
        raise InvalidParameterError("frequency mask selects no grid points")
    return m


def lowpass_prototype(cutoff: float, ts: float, ripple_db: float = 60.0,
                      rel_width: float = 0.5) -> NoncausalFilter:
    """Symmetric Kaiser-windowed lowpass, centred on lag 0.

    ``cutoff`` is in rad/s (amplitude 0.5 point); the transition band spans
    ``rel_width * cutoff``.
    """
    nyq = np.pi / ts
    wc = cutoff / nyq
    width = min(rel_width * wc, 2.0 * (1.0 - wc), 2.0 * wc)
    numtaps, beta = kaiserord(ripple_db, width)
    numtaps |= 1  # odd length keeps the centre tap on lag 0
    h = firwin(numtaps, wc, window=("kaiser", beta))
    return NoncausalFilter(h / _peak_gain(h), numtaps // 2, ts)


def _peak_gain(h) -> float:
    """``max_w |H(w)|`` of an FIR, located on a dense FFT and refined locally,
    so the scaled prototype never exceeds unit gain (passband ripple)."""
    m = 1 << 16
    mag = np.abs(np.fft.rfft(h, m))
    k = int(np.argmax(mag))
    k_idx = np.arange(h.size)
    neg = lambda th: -np.abs(np.sum(h * np.exp(-1j * th * k_idx)))
    step = 2 * np.pi / m
    lo, hi = max(0.0, (k - 1) * step), min(np.pi, (k + 1) * step)
    res = minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return max(float(mag[k]), -float(res.fun))


def zero_phase(qt: NoncausalFilter) -> NoncausalFilter:
    """``qt* qt``: the filter followed by its adjoint, real and nonnegative response."""
    return qt.adjoint().compose(qt)


def zero_phase_magnitude(qt: NoncausalFilter, grid=None) -> Frf:
    """Response of ``qt* qt`` on ``grid``; equals ``|qt(w)|^2``."""
    return zero_phase(qt).freq_response(grid)


def design_Q(frf_GS: Frf, L: NoncausalFilter, mask=None, margin: float = 0.1,
             min_margin: float = 0.02, shrink: float = 0.9) -> NoncausalFilter:
    """Zero-phase lowpass robustness filter.

    The cutoff starts at the lowest masked frequency where ``|1 - GS L|``
    reaches ``1 - margin`` and is lowered by ``shrink`` until
    ``|Q| |1 - GS L| < 1 - min_margin`` on the whole mask. When the
    learning loop already contracts with ``margin`` to spare, ``Q = 1``.
    The achieved margin ``1 - sup |Q (1 - GS L)|`` is stored on the filter.
    """
    check_ts(frf_GS.ts, L.ts)
    w = frf_GS.frequencies
    m = _resolve_mask(mask, w.size)
    mod = np.abs(1.0 - frf_GS.siso * L.response(w))
    wm, modm = w[m], mod[m]
    hit = np.flatnonzero(modm >= 1.0 - margin)
    if hit.size == 0:
        return NoncausalFilter([1.0], 0, L.ts, margin=float(1.0 - modm.max()))
    if hit[0] == 0:
        raise InfeasibleDesignError(
            f"|1 - GS L| = {modm[0]:.3g} already at the lowest masked frequency "
            f"{wm[0] / 2 / np.pi:.4g} Hz", float(wm[0]))
    cutoff = wm[hit[0]]
    worst = float(wm[np.argmax(modm)])
    while cutoff > wm[0]:
        Q = zero_phase(lowpass_prototype(cutoff, L.ts))
        rho = np.abs(Q.response(wm)) * modm
        if rho.max() < 1.0 - min_margin:
            return NoncausalFilter(Q.taps, Q.n_preview, L.ts, margin=float(1.0 - rho.max()))
        worst = float(wm[np.argmax(rho)])
        cutoff *= shrink
    raise InfeasibleDesignError(
        f"no cutoff above {wm[0] / 2 / np.pi:.4g} Hz achieves |Q(1 - GS L)| < 1; "
        f"worst frequency {worst / 2 / np.pi:.4g} Hz", worst)
