"""Discrete-time signals, rational transfer functions and lifted operators.

Polynomials are stored in ascending powers of the unit delay ``q = z^-1``,
the same convention as :func:`scipy.signal.lfilter`, so a transfer function
``b0 + b1 q + ...`` over ``a0 + a1 q + ...`` is simulated by
``lfilter(num, den, u)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import toeplitz
from scipy.signal import cont2discrete, lfilter

from .errors import (
    AliasingError,
    DimensionError,
    FrequencyRangeError,
    IncompatibleSignalsError,
    InstabilityError,
    InvalidParameterError,
    SimulationOverflowError,
)

STABILITY_RADIUS = 1.0 - 1e-9


def _readonly(x, dtype=float):
    arr = np.array(x, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def same_ts(a: float, b: float) -> bool:
    return abs(a - b) <= 1e-12 * max(abs(a), abs(b))


def check_ts(a: float, b: float) -> None:
    if not same_ts(a, b):
        raise IncompatibleSignalsError(f"sample time mismatch: {a!r} vs {b!r}")


# --------------------------------------------------------------------------
# Signal
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Signal:
    """Finite, uniformly sampled real sequence."""

    samples: np.ndarray
    ts: float

    def __post_init__(self):
        x = _readonly(self.samples)
        if x.ndim != 1 or x.size < 1:
            raise InvalidParameterError("signal must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(x)):
            raise InvalidParameterError("signal samples must be finite")
        if not (np.isfinite(self.ts) and self.ts > 0):
            raise InvalidParameterError(f"sample time must be > 0, got {self.ts!r}")
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "ts", float(self.ts))

    @classmethod
    def zeros(cls, n: int, ts: float) -> "Signal":
        return cls(np.zeros(n), ts)

    @classmethod
    def impulse(cls, n: int, ts: float, at: int = 0) -> "Signal":
        x = np.zeros(n)
        x[at] = 1.0
        return cls(x, ts)

    def __len__(self):
        return self.samples.size

    @property
    def t(self) -> np.ndarray:
        return np.arange(len(self)) * self.ts

    def norm(self) -> float:
        return float(np.linalg.norm(self.samples))

    def _other(self, other):
        if isinstance(other, Signal):
            check_ts(self.ts, other.ts)
            if len(other) != len(self):
                raise IncompatibleSignalsError(
                    f"length mismatch: {len(self)} vs {len(other)}")
            return other.samples
        return other

    def __add__(self, other):
        return Signal(self.samples + self._other(other), self.ts)

    __radd__ = __add__

    def __sub__(self, other):
        return Signal(self.samples - self._other(other), self.ts)

    def __rsub__(self, other):
        return Signal(self._other(other) - self.samples, self.ts)

    def __mul__(self, k):
        return Signal(self.samples * float(k), self.ts)

    __rmul__ = __mul__

    def __truediv__(self, k):
        return Signal(self.samples / float(k), self.ts)

    def __neg__(self):
        return Signal(-self.samples, self.ts)

    def __eq__(self, other):
        if not isinstance(other, Signal):
            return NotImplemented
        return self.ts == other.ts and np.array_equal(self.samples, other.samples)

    __hash__ = None


# --------------------------------------------------------------------------
# Transfer functions
# --------------------------------------------------------------------------


def _trim_trailing(c: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return np.zeros(1)
    return c[: nz[-1] + 1]


def _poly_add(a, b):
    n = max(len(a), len(b))
    out = np.zeros(n)
    out[: len(a)] += a
    out[: len(b)] += b
    return out


def _deflate(c: np.ndarray, root: complex) -> np.ndarray:
    """Divide the q-polynomial ``c`` by the factor vanishing at ``z = root``.

    Leading zeros (pure delay) are kept exact. Division runs forward in q
    for roots inside the unit circle and backward otherwise, which keeps the
    recursion well conditioned.
    """
    nz = np.flatnonzero(c)
    d = int(nz[0]) if nz.size else 0
    body = c[d:]
    if abs(root.imag) > 1e-12 * max(1.0, abs(root)):
        factor = np.array([1.0, -2.0 * root.real, abs(root) ** 2])
    else:
        factor = np.array([1.0, -root.real])
    m = len(body) - len(factor) + 1
    if m < 1:
        raise InvalidParameterError("cannot deflate: polynomial degree too low")
    if abs(root) <= 1.0:
        g = np.zeros(m)
        for k in range(m):
            acc = body[k]
            for i in range(1, len(factor)):
                if k - i >= 0:
                    acc -= factor[i] * g[k - i]
            g[k] = acc
    else:
        quot, _ = np.polydiv(body[::-1], factor[::-1])
        g = np.real(quot[::-1])
    return np.r_[np.zeros(d), g]


def _common_roots(zn, zd, tol):
    """Greedy one-to-one matching of numerator and denominator roots."""
    used = np.zeros(len(zn), dtype=bool)
    pairs = []
    for p in zd:
        if p.imag < -1e-12 * max(1.0, abs(p)):
            continue  # conjugate handled with its partner
        if len(zn) == 0:
            break
        dist = np.abs(zn - p)
        dist[used] = np.inf
        k = int(np.argmin(dist))
        if dist[k] <= tol * max(1.0, abs(p)):
            used[k] = True
            if abs(p.imag) > 1e-12 * max(1.0, abs(p)):
                dist2 = np.abs(zn - np.conj(p))
                dist2[used] = np.inf
                k2 = int(np.argmin(dist2))
                if dist2[k2] > tol * max(1.0, abs(p)):
                    used[k] = False
                    continue
                used[k2] = True
            pairs.append(p)
    return pairs


@dataclass(frozen=True, eq=False)
class TransferFunction:
    """Discrete-time rational system ``num(q) / den(q)`` with ``q = z^-1``.

    The denominator is normalised so that ``den[0] == 1``. Systems with
    ``den[0] == 0`` would need future inputs and are rejected; two-sided
    operators are represented by :class:`ilcbench.filters.NoncausalFilter`.
    """

    num: np.ndarray
    den: np.ndarray
    ts: float

    def __post_init__(self):
        num = _trim_trailing(np.atleast_1d(np.asarray(self.num, dtype=float)))
        den = _trim_trailing(np.atleast_1d(np.asarray(self.den, dtype=float)))
        if num.ndim != 1 or den.ndim != 1:
            raise InvalidParameterError("coefficients must be 1-D")
        if not (np.all(np.isfinite(num)) and np.all(np.isfinite(den))):
            raise InvalidParameterError("coefficients must be finite")
        if den[0] == 0.0:
            raise InvalidParameterError(
                "leading denominator coefficient is zero (improper / noncausal system)")
        if not (np.isfinite(self.ts) and self.ts > 0):
            raise InvalidParameterError(f"sample time must be > 0, got {self.ts!r}")
        a0 = den[0]
        object.__setattr__(self, "num", _readonly(num / a0))
        object.__setattr__(self, "den", _readonly(den / a0))
        object.__setattr__(self, "ts", float(self.ts))

    @classmethod
    def gain(cls, k: float, ts: float) -> "TransferFunction":
        return cls([k], [1.0], ts)

    @classmethod
    def delay(cls, d: int, ts: float) -> "TransferFunction":
        return cls(np.r_[np.zeros(d), 1.0], [1.0], ts)

    @property
    def delay_samples(self) -> int:
        """Number of leading zero numerator coefficients (input-output delay)."""
        nz = np.flatnonzero(self.num)
        return int(nz[0]) if nz.size else 0

    @property
    def strictly_proper(self) -> bool:
        return self.num[0] == 0.0

    @property
    def is_zero(self) -> bool:
        return not np.any(self.num)

    def poles(self) -> np.ndarray:
        return np.roots(self.den)

    def zeros(self) -> np.ndarray:
        return np.roots(self.num) if not self.is_zero else np.array([])

    def is_stable(self, radius: float = STABILITY_RADIUS) -> bool:
        p = self.poles()
        return bool(np.all(np.abs(p) < radius))

    def dc_gain(self) -> float:
        return float(np.sum(self.num) / np.sum(self.den))

    def minreal(self, tol: float = 1e-7) -> "TransferFunction":
        """Cancel pole/zero pairs closer than ``tol`` (relative)."""
        num, den = self.num.copy(), self.den.copy()
        if self.is_zero:
            return TransferFunction([0.0], [1.0], self.ts)
        if len(num) == len(den) and np.allclose(num * den[0], den * num[0], rtol=0, atol=1e-14 * np.max(np.abs(den))):
            if num[0] != 0:
                return TransferFunction([num[0] / den[0]], [1.0], self.ts)
        pairs = _common_roots(np.roots(num), np.roots(den), tol)
        for p in pairs:
            num = _deflate(num, p)
            den = _deflate(den, p)
        return TransferFunction(num, den, self.ts)

    def __mul__(self, other):
        if isinstance(other, TransferFunction):
            check_ts(self.ts, other.ts)
            return TransferFunction(np.convolve(self.num, other.num),
                                    np.convolve(self.den, other.den), self.ts)
        return TransferFunction(self.num * float(other), self.den, self.ts)

    __rmul__ = __mul__

    def __add__(self, other):
        if not isinstance(other, TransferFunction):
            other = TransferFunction.gain(float(other), self.ts)
        check_ts(self.ts, other.ts)
        if len(self.den) == len(other.den) and np.array_equal(self.den, other.den):
            return TransferFunction(_poly_add(self.num, other.num), self.den, self.ts)
        num = _poly_add(np.convolve(self.num, other.den), np.convolve(other.num, self.den))
        return TransferFunction(num, np.convolve(self.den, other.den), self.ts)

    __radd__ = __add__

    def __neg__(self):
        return TransferFunction(-self.num, self.den, self.ts)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __eq__(self, other):
        if not isinstance(other, TransferFunction):
            return NotImplemented
        return (self.ts == other.ts and np.array_equal(self.num, other.num)
                and np.array_equal(self.den, other.den))

    __hash__ = None

    def __repr__(self):
        return f"TransferFunction(num={self.num.tolist()}, den={self.den.tolist()}, ts={self.ts})"


# --------------------------------------------------------------------------
# Continuous modal plant and ZOH discretisation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Mode:
    residue: float  # 1/kg
    damping: float
    omega: float  # rad/s


@dataclass(frozen=True)
class ContinuousModal:
    """Rigid-body mass plus flexible modes, optionally behind a first-order
    actuator lag ``a / (s + a)`` (``actuator_bandwidth = a`` in rad/s)."""

    mass: float
    modes: tuple = ()
    actuator_bandwidth: float | None = None

    def terms(self):
        """Continuous ``(num, den)`` pairs (descending powers of s), one per mode."""
        out = [(np.array([1.0]), np.array([self.mass, 0.0, 0.0]))]
        for md in self.modes:
            out.append((np.array([md.residue]),
                        np.array([1.0, 2 * md.damping * md.omega, md.omega ** 2])))
        if self.actuator_bandwidth is not None:
            a = self.actuator_bandwidth
            out = [(n * a, np.convolve(d, [1.0, a])) for n, d in out]
        return out

    def evaluate(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=complex)
        g = 1.0 / (self.mass * s ** 2)
        for md in self.modes:
            g = g + md.residue / (s ** 2 + 2 * md.damping * md.omega * s + md.omega ** 2)
        if self.actuator_bandwidth is not None:
            g = g * self.actuator_bandwidth / (s + self.actuator_bandwidth)
        return g


def make_modal_plant(mass: float, modes: Sequence = (), actuator_bandwidth: float | None = None) -> ContinuousModal:
    """Build ``G(s) = 1/(m s^2) + sum_i r_i / (s^2 + 2 z_i w_i s + w_i^2)``.

    ``modes`` holds :class:`Mode` objects or ``(residue, damping, omega)``
    tuples.
    """
    if not (np.isfinite(mass) and mass > 0):
        raise InvalidParameterError(f"mass must be > 0, got {mass!r}")
    parsed = []
    for md in modes:
        md = md if isinstance(md, Mode) else Mode(*map(float, md))
        if not (np.isfinite(md.omega) and md.omega > 0):
            raise InvalidParameterError(f"mode frequency must be > 0, got {md.omega!r}")
        if not (0.0 <= md.damping < 1.0):
            raise InvalidParameterError(f"mode damping must lie in [0, 1), got {md.damping!r}")
        if not np.isfinite(md.residue):
            raise InvalidParameterError("mode residue must be finite")
        parsed.append(md)
    if actuator_bandwidth is not None and not (np.isfinite(actuator_bandwidth) and actuator_bandwidth > 0):
        raise InvalidParameterError(f"actuator bandwidth must be > 0, got {actuator_bandwidth!r}")
    return ContinuousModal(float(mass), tuple(parsed),
                           None if actuator_bandwidth is None else float(actuator_bandwidth))


def discretize_zoh(model: ContinuousModal, ts: float) -> TransferFunction:
    """Exact zero-order-hold discretisation, mode by mode, summed."""
    if not (np.isfinite(ts) and ts > 0):
        raise InvalidParameterError(f"sample time must be > 0, got {ts!r}")
    nyq = np.pi / ts
    for md in model.modes:
        if md.omega >= nyq:
            raise AliasingError(
                f"mode at {md.omega:.6g} rad/s is at or above the Nyquist frequency {nyq:.6g} rad/s")
    # every term shares the actuator pole; factor it out once instead of
    # multiplying it into the common denominator and cancelling afterwards
    pa = None
    if model.actuator_bandwidth is not None:
        pa = np.exp(-model.actuator_bandwidth * ts)
    total = None
    for n, d in model.terms():
        numd, dend, _ = cont2discrete((n, d), ts, method="zoh")
        numd = np.atleast_2d(numd)[0]
        b = np.zeros(len(dend))
        b[len(dend) - len(numd):] = numd
        # strictly proper terms have an exact zero feedthrough; drop rounding residue
        b[np.abs(b) < 1e-13 * np.max(np.abs(b))] = 0.0
        a = np.asarray(dend, dtype=float)
        if pa is not None:
            a = _deflate(a, complex(pa))
        tf = TransferFunction(b, a, ts)
        total = tf if total is None else total + tf
    if pa is not None:
        total = TransferFunction(total.num, np.convolve(total.den, [1.0, -pa]), ts)
    return total


# --------------------------------------------------------------------------
# Simulation and frequency response
# --------------------------------------------------------------------------


def simulate(sys: TransferFunction, u: Signal) -> Signal:
    """Zero-initial-condition response of ``sys`` to ``u``."""
    check_ts(sys.ts, u.ts)
    with np.errstate(all="ignore"):
        y = lfilter(sys.num, sys.den, u.samples)
    bad = np.flatnonzero(~np.isfinite(y))
    if bad.size:
        raise SimulationOverflowError(
            f"simulation produced non-finite output at sample {bad[0]}", int(bad[0]))
    return Signal(y, u.ts)


def default_grid(ts: float, n: int = 400, f_min_hz: float = 1.0) -> np.ndarray:
    """Log-spaced grid from ``2*pi*f_min_hz`` to Nyquist, in rad/s."""
    return np.logspace(np.log10(2 * np.pi * f_min_hz), np.log10(np.pi / ts), n)


def _check_grid(grid, ts):
    w = np.asarray(grid, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise FrequencyRangeError("frequency grid must be a non-empty 1-D array")
    nyq = np.pi / ts
    if np.any(w <= 0) or np.any(w > nyq * (1 + 1e-12)):
        raise FrequencyRangeError(
            f"grid points must lie in (0, {nyq:.6g}] rad/s for Ts={ts}")
    if np.any(np.diff(w) <= 0):
        raise FrequencyRangeError("frequency grid must be strictly increasing")
    return w


@dataclass(frozen=True, eq=False)
class Frf:
    """Frequency response samples; ``values`` has shape ``(n_freq, n_out, n_in)``."""

    frequencies: np.ndarray
    values: np.ndarray
    ts: float

    def __post_init__(self):
        w = _check_grid(self.frequencies, self.ts)
        v = np.array(self.values, dtype=complex)
        if v.ndim == 1:
            v = v[:, None, None]
        if v.ndim != 3 or v.shape[0] != w.size:
            raise DimensionError(f"values shape {v.shape} does not match grid of {w.size}")
        if not np.all(np.isfinite(v)):
            raise InvalidParameterError("FRF values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "frequencies", _readonly(w))
        object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.values.shape[1:]

    @property
    def siso(self) -> np.ndarray:
        if self.shape != (1, 1):
            raise DimensionError(f"FRF is {self.shape[0]}x{self.shape[1]}, not scalar")
        return self.values[:, 0, 0]

    def __mul__(self, other):
        if isinstance(other, Frf):
            check_ts(self.ts, other.ts)
            if not np.array_equal(self.frequencies, other.frequencies):
                raise IncompatibleSignalsError("FRFs live on different grids")
            return Frf(self.frequencies, np.matmul(self.values, other.values), self.ts)
        return Frf(self.frequencies, self.values * other, self.ts)

    __rmul__ = __mul__


def tf_response(sys: TransferFunction, w) -> np.ndarray:
    """Evaluate ``sys`` at ``z = exp(j w Ts)`` without range checks."""
    q = np.exp(-1j * np.asarray(w, dtype=float) * sys.ts)
    return np.polyval(sys.num[::-1], q) / np.polyval(sys.den[::-1], q)


def freq_response(sys, grid) -> Frf:
    """Frequency response of a transfer function or a nested list of them."""
    if isinstance(sys, TransferFunction):
        w = _check_grid(grid, sys.ts)
        return Frf(w, tf_response(sys, w), sys.ts)
    rows = [list(r) for r in sys]
    ts = rows[0][0].ts
    w = _check_grid(grid, ts)
    vals = np.empty((w.size, len(rows), len(rows[0])), dtype=complex)
    for i, row in enumerate(rows):
        if len(row) != len(rows[0]):
            raise DimensionError("ragged transfer matrix")
        for j, g in enumerate(row):
            check_ts(g.ts, ts)
            vals[:, i, j] = tf_response(g, w)
    return Frf(w, vals, ts)


def closed_loop_maps(G: TransferFunction, K: TransferFunction):
    """Return ``(S, PS)`` with ``S = 1/(1+GK)`` and ``PS = G S``.

    Internal stability is checked on the unreduced characteristic
    polynomial, so hidden unstable cancellations are still reported.
    """
    check_ts(G.ts, K.ts)
    char = _poly_add(np.convolve(G.den, K.den), np.convolve(G.num, K.num))
    if not np.any(char):
        raise InvalidParameterError("1 + GK is identically zero")
    roots = np.roots(_trim_trailing(char))
    bad = roots[np.abs(roots) >= STABILITY_RADIUS]
    if bad.size:
        raise InstabilityError(
            f"closed loop unstable: roots {np.round(bad, 6).tolist()}", bad)
    S = TransferFunction(np.convolve(G.den, K.den), char, G.ts).minreal()
    PS = TransferFunction(np.convolve(G.num, K.den), char, G.ts).minreal()
    return S, PS


# --------------------------------------------------------------------------
# Lifted (finite-time) operators
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LiftedOperator:
    matrix: np.ndarray
    ts: float

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise DimensionError("lifted operator must be a non-empty square matrix")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def apply(self, x: Signal) -> Signal:
        check_ts(self.ts, x.ts)
        return Signal(self.matrix @ x.samples, x.ts)

    def __matmul__(self, other):
        if isinstance(other, LiftedOperator):
            check_ts(self.ts, other.ts)
            return LiftedOperator(self.matrix @ other.matrix, self.ts)
        if isinstance(other, Signal):
            return self.apply(other)
        return self.matrix @ other


def impulse_response(sys: TransferFunction, n: int) -> np.ndarray:
    """First ``n`` Markov parameters by direct long division of num/den."""
    b, a = sys.num, sys.den
    h = np.zeros(n)
    na = len(a)
    for k in range(n):
        acc = b[k] if k < len(b) else 0.0
        top = min(k, na - 1)
        if top:
            acc -= np.dot(a[1: top + 1], h[k - 1::-1][:top])
        h[k] = acc
    return h


def lifted_matrix(sys, n: int) -> LiftedOperator:
    """``n x n`` convolution matrix of a causal system or a two-sided filter.

    Column ``k`` holds the impulse response started at sample ``k`` and
    truncated to the window.
    """
    if n < 1:
        raise InvalidParameterError("lifted size must be >= 1")
    if isinstance(sys, TransferFunction):
        col = impulse_response(sys, n)
        return LiftedOperator(toeplitz(col, np.r_[col[0], np.zeros(n - 1)]), sys.ts)
    # two-sided FIR: taps[i] acts at lag i - n_preview
    taps = np.asarray(sys.taps, dtype=float)
    p = sys.n_preview
    col = np.zeros(n)
    row = np.zeros(n)
    causal = taps[p:]
    m = min(n, causal.size)
    col[:m] = causal[:m]
    anti = taps[:p][::-1]  # lags -1, -2, ...
    m = min(n - 1, anti.size)
    row[1: 1 + m] = anti[:m]
    row[0] = col[0]
    return LiftedOperator(toeplitz(col, row), sys.ts)
