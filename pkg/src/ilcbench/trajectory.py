"""Point-to-point motion profiles with bounded derivatives.

The highest derivative (snap for 4th order, jerk for 3rd order) is a
bang-bang signal held constant over each sample; lower derivatives are its
exact polynomial integrals evaluated at the sample instants, so summing
the held top derivative reproduces every other signal without drift.

Phase durations from the continuous-time construction are rounded up to
whole samples, after which the top-derivative amplitude is scaled down so
the move ends exactly at the requested displacement. Rounding up never
raises any peak, so every bound still holds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidParameterError
from .signal_lti import Signal

_EPS = 1e-9  # slack when rounding durations to whole samples


@dataclass(frozen=True)
class Bounds:
    v_max: float
    a_max: float
    j_max: float
    s_max: float | None = None

    def check(self, need_snap: bool):
        vals = [self.v_max, self.a_max, self.j_max] + ([self.s_max] if need_snap else [])
        for name, v in zip(("v_max", "a_max", "j_max", "s_max"), vals):
            if v is None or not np.isfinite(v) or v <= 0:
                raise InvalidParameterError(f"bound {name} must be finite and > 0, got {v!r}")


@dataclass(frozen=True, eq=False)
class MotionProfile:
    position: Signal
    velocity: Signal
    acceleration: Signal
    jerk: Signal
    snap: Signal | None
    bounds: Bounds
    durations: tuple  # phase durations in samples (n1, n2, ...)
    switch_indices: np.ndarray  # samples where the top derivative changes value
    peak: float  # amplitude of the top derivative actually used

    @property
    def ts(self) -> float:
        return self.position.ts

    @property
    def n_move(self) -> int:
        """Number of samples during which the axis moves."""
        order = 4 if self.snap is not None else 3
        n = self.durations
        if order == 4:
            return 8 * n[0] + 4 * n[1] + 2 * n[2] + n[3]
        return 4 * n[0] + 2 * n[1] + n[2]

    def derivative(self, k: int) -> Signal:
        """k-th derivative of position (0..4)."""
        return (self.position, self.velocity, self.acceleration, self.jerk, self.snap)[k]


def _integrate(top: np.ndarray, order: int, ts: float):
    """Exact integration of a held ``order``-th derivative.

    Returns the list [position, velocity, ..., top] sampled at k*ts.
    """
    n = top.size
    states = np.zeros((order, n))  # rows: position .. (order-1)-th derivative
    x = np.zeros(order)
    fact = [1.0, 1.0, 2.0, 6.0, 24.0]
    for k in range(n - 1):
        states[:, k] = x
        u = top[k]
        nxt = np.empty(order)
        for i in range(order):
            acc = 0.0
            for m in range(i, order):
                acc += x[m] * ts ** (m - i) / fact[m - i]
            acc += u * ts ** (order - i) / fact[order - i]
            nxt[i] = acc
        x = nxt
    states[:, n - 1] = x
    return [states[i] for i in range(order)] + [top]


def _ceil_samples(t, ts):
    return int(np.ceil(t / ts - _EPS)) if t > 0 else 0


def _build(top_pattern, order, amplitude, ts, pre, post, sign, bounds, durations, n_total=None):
    seq = []
    for level, n in top_pattern:
        seq.extend([level * amplitude] * n)
    n_pre = _ceil_samples(pre, ts)
    n_post = _ceil_samples(post, ts)
    if n_total is not None:
        n_post = int(n_total) - n_pre - len(seq) - 1
        if n_post < 0:
            raise InvalidParameterError(
                f"record of {n_total} samples is too short: the move alone needs {n_pre + len(seq) + 1}")
    top = np.r_[np.zeros(n_pre), np.array(seq, dtype=float), np.zeros(n_post + 1)]
    sigs = _integrate(top, order, ts)
    sigs = [sign * s for s in sigs]
    switch = np.flatnonzero(np.diff(top) != 0) + 1
    out = [Signal(s, ts) for s in sigs]
    if order == 3:
        pos, vel, acc, jerk = out
        snap = None
    else:
        pos, vel, acc, jerk, snap = out
    return MotionProfile(pos, vel, acc, jerk, snap, bounds, tuple(durations), switch, float(amplitude))


def fourth_order_phases(distance: float, b: Bounds):
    """Continuous-time durations ``(t1, t2, t3, t4)`` of the symmetric
    15-phase profile: snap pulses, constant jerk, constant acceleration and
    constant velocity."""
    s, j, a, v, D = b.s_max, b.j_max, b.a_max, b.v_max, distance
    t1 = min((D / (8 * s)) ** 0.25, (v / (2 * s)) ** (1 / 3), (a / s) ** 0.5, j / s)
    jp = s * t1
    c_a = a / jp - t1
    c_v = (-3 * t1 + np.sqrt(t1 ** 2 + 4 * v / jp)) / 2
    f = lambda t2: 2 * jp * (t1 + t2) * (2 * t1 + t2) ** 2 - D
    c_d = brentq(f, 0.0, (D / (2 * jp)) ** (1 / 3) + 1.0) if f(0.0) < 0 else 0.0
    t2 = max(0.0, min(c_a, c_v, c_d))
    ap = jp * (t1 + t2)
    A, B = 2 * t1 + t2, 4 * t1 + 2 * t2
    c_v3 = v / ap - A
    c_d3 = (-(A + B) + np.sqrt((B - A) ** 2 + 4 * D / ap)) / 2
    t3 = max(0.0, min(c_v3, c_d3))
    vp = ap * (A + t3)
    t4 = max(0.0, D / vp - (B + t3))
    return t1, t2, t3, t4


def third_order_phases(distance: float, b: Bounds):
    """Continuous-time durations ``(t1, t2, t3)``: jerk pulses, constant
    acceleration, constant velocity."""
    j, a, v, D = b.j_max, b.a_max, b.v_max, distance
    t1 = min((D / (2 * j)) ** (1 / 3), (v / j) ** 0.5, a / j)
    ap = j * t1
    c_v = v / ap - t1
    c_d = (-3 * t1 + np.sqrt(t1 ** 2 + 4 * D / ap)) / 2
    t2 = max(0.0, min(c_v, c_d))
    vp = ap * (t1 + t2)
    t3 = max(0.0, D / vp - (2 * t1 + t2))
    return t1, t2, t3


def fourth_order_profile(displacement: float, bounds: Bounds, ts: float,
                         pre_rest: float = 0.0, post_rest: float = 0.0,
                         n_total: int | None = None) -> MotionProfile:
    """Snap-limited symmetric point-to-point profile.

    ``pre_rest`` and ``post_rest`` (seconds) pad the move with standstill.
    If ``n_total`` is given, the trailing standstill is sized so the record
    has exactly that many samples and ``post_rest`` is ignored.
    """
    if not np.isfinite(displacement) or displacement == 0:
        raise InvalidParameterError("displacement must be finite and nonzero")
    if not (np.isfinite(ts) and ts > 0):
        raise InvalidParameterError("sample time must be > 0")
    bounds.check(need_snap=True)
    D = abs(displacement)
    t = fourth_order_phases(D, bounds)
    n1 = max(1, _ceil_samples(t[0], ts))
    n2, n3, n4 = (_ceil_samples(x, ts) for x in t[1:])
    T1, T2, T3, T4 = (n * ts for n in (n1, n2, n3, n4))
    amp = D / (T1 * (T1 + T2) * (2 * T1 + T2 + T3) * (4 * T1 + 2 * T2 + T3 + T4))
    half = [(1, n1), (0, n2), (-1, n1), (0, n3), (-1, n1), (0, n2), (1, n1)]
    pattern = half + [(0, n4)] + [(-lvl, n) for lvl, n in half]
    return _build(pattern, 4, amp, ts, pre_rest, post_rest, np.sign(displacement),
                  bounds, (n1, n2, n3, n4), n_total)


def third_order_profile(displacement: float, bounds: Bounds, ts: float,
                        pre_rest: float = 0.0, post_rest: float = 0.0,
                        n_total: int | None = None) -> MotionProfile:
    """Jerk-limited symmetric point-to-point profile (no snap signal)."""
    if not np.isfinite(displacement) or displacement == 0:
        raise InvalidParameterError("displacement must be finite and nonzero")
    if not (np.isfinite(ts) and ts > 0):
        raise InvalidParameterError("sample time must be > 0")
    bounds.check(need_snap=False)
    D = abs(displacement)
    t = third_order_phases(D, bounds)
    n1 = max(1, _ceil_samples(t[0], ts))
    n2, n3 = (_ceil_samples(x, ts) for x in t[1:])
    T1, T2, T3 = (n * ts for n in (n1, n2, n3))
    amp = D / (T1 * (T1 + T2) * (2 * T1 + T2 + T3))
    pattern = [(1, n1), (0, n2), (-1, n1), (0, n3), (-1, n1), (0, n2), (1, n1)]
    return _build(pattern, 3, amp, ts, pre_rest, post_rest, np.sign(displacement),
                  bounds, (n1, n2, n3), n_total)
