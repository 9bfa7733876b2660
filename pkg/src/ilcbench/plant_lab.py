"""Virtual printer: flexible plant under PD feedback with encoder
quantisation and stochastic plus repeating output disturbances.

The task error follows ``e = S (r - G f) - S v`` with ``v`` entering at the
plant output. Quantisation only affects the measured position used to
report the error; it does not feed back into the loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import IncompatibleSignalsError, InvalidParameterError
from .signal_lti import (
    Mode,
    Signal,
    TransferFunction,
    check_ts,
    closed_loop_maps,
    discretize_zoh,
    make_modal_plant,
    simulate,
)
from .trajectory import Bounds, MotionProfile, fourth_order_profile


def pd_controller(kp: float, kd: float, ts: float) -> TransferFunction:
    """``K = kp + kd (1 - z^-1) / Ts`` (backward-difference derivative)."""
    if not (np.isfinite(kp) and kp > 0):
        raise InvalidParameterError(f"kp must be > 0, got {kp!r}")
    if not (np.isfinite(kd) and kd >= 0):
        raise InvalidParameterError(f"kd must be >= 0, got {kd!r}")
    return TransferFunction([kp + kd / ts, -kd / ts], [1.0], ts)


@dataclass(frozen=True, eq=False)
class Scenario:
    G: TransferFunction
    K: TransferFunction
    encoder_resolution: float = 0.0
    noise_std: float = 0.0
    repeating_disturbance: Signal | None = None
    rng_seed: int = 0
    S: TransferFunction = field(init=False, repr=False)
    PS: TransferFunction = field(init=False, repr=False)

    def __post_init__(self):
        check_ts(self.G.ts, self.K.ts)
        for name in ("encoder_resolution", "noise_std"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise InvalidParameterError(f"{name} must be finite and >= 0, got {v!r}")
        if self.repeating_disturbance is not None:
            check_ts(self.G.ts, self.repeating_disturbance.ts)
        S, PS = closed_loop_maps(self.G, self.K)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "PS", PS)

    @property
    def ts(self) -> float:
        return self.G.ts

    def noise_free(self) -> "Scenario":
        """Same loop without noise, quantisation or repeating disturbance."""
        return replace(self, encoder_resolution=0.0, noise_std=0.0, repeating_disturbance=None)

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (self.G == other.G and self.K == other.K
                and self.encoder_resolution == other.encoder_resolution
                and self.noise_std == other.noise_std
                and self.repeating_disturbance == other.repeating_disturbance
                and self.rng_seed == other.rng_seed)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class TaskResult:
    e: Signal  # measured error r - quantised position
    y: Signal  # true position
    f_applied: Signal


def _quantize(x: np.ndarray, q: float) -> np.ndarray:
    if q == 0:
        return x
    return np.round(x / q) * q


def task_noise(sc: Scenario, n: int, task_index: int) -> np.ndarray:
    """White disturbance of task ``task_index``; seeded by (rng_seed, task_index)."""
    if sc.noise_std == 0:
        return np.zeros(n)
    rng = np.random.default_rng([int(sc.rng_seed), int(task_index)])
    return rng.normal(0.0, sc.noise_std, n)


def run_task(sc: Scenario, r: Signal, f: Signal, task_index: int) -> TaskResult:
    """Simulate one task of the feedback loop with feedforward ``f``."""
    check_ts(sc.ts, r.ts)
    check_ts(sc.ts, f.ts)
    n = len(r)
    if len(f) != n:
        raise IncompatibleSignalsError(f"reference has {n} samples, feedforward {len(f)}")
    v = task_noise(sc, n, task_index)
    if sc.repeating_disturbance is not None:
        if len(sc.repeating_disturbance) != n:
            raise IncompatibleSignalsError("repeating disturbance length differs from reference")
        v = v + sc.repeating_disturbance.samples
    e_true = simulate(sc.S, r).samples - simulate(sc.PS, f).samples
    if np.any(v):
        e_true = e_true - simulate(sc.S, Signal(v, sc.ts)).samples
    y = r.samples - e_true
    e = r.samples - _quantize(y, sc.encoder_resolution)
    return TaskResult(Signal(e, sc.ts), Signal(y, sc.ts), f)


# --------------------------------------------------------------------------
# Canonical printer scenario (all numbers are modelling choices)
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PrinterParams:
    ts: float = 1e-3
    mass: float = 0.5  # kg-equivalent (input in V)
    belt_freq_hz: float = 35.0
    belt_damping: float = 0.05
    belt_residue: float = 1.0  # 1/kg; mass * residue = 0.5
    actuator_bandwidth_hz: float = 300.0
    bandwidth_hz: float = 8.0  # PD crossover target
    pd_damping: float = 0.7
    encoder_resolution: float = 1e-6
    noise_std: float = 2e-6
    rng_seed: int = 2020

    @property
    def kp(self) -> float:
        wc = 2 * np.pi * self.bandwidth_hz
        return self.mass * wc ** 2

    @property
    def kd(self) -> float:
        wc = 2 * np.pi * self.bandwidth_hz
        return 2 * self.pd_damping * self.mass * wc

    def modal(self, mass=None, belt_freq_hz=None, belt_damping=None, belt_residue=None,
              with_belt=True):
        m = self.mass if mass is None else mass
        modes = []
        if with_belt:
            modes.append(Mode(self.belt_residue if belt_residue is None else belt_residue,
                              self.belt_damping if belt_damping is None else belt_damping,
                              2 * np.pi * (self.belt_freq_hz if belt_freq_hz is None else belt_freq_hz)))
        return make_modal_plant(m, modes, 2 * np.pi * self.actuator_bandwidth_hz)


PRINTER = PrinterParams()

# printer reference: 0.1 m move inside a 1.5 s record
PRINTER_BOUNDS = Bounds(v_max=0.5, a_max=5.0, j_max=200.0, s_max=2e4)
PRINTER_MOVE = dict(displacement=0.1, pre_rest=0.3, n_total=1500)


def default_printer_scenario(params: PrinterParams = PRINTER) -> Scenario:
    """Rigid-body mass plus one lightly damped belt mode behind an actuator
    lag, PD feedback at 1 kHz, 1 um encoder and 2 um white noise."""
    G = discretize_zoh(params.modal(), params.ts)
    K = pd_controller(params.kp, params.kd, params.ts)
    return Scenario(G, K, params.encoder_resolution, params.noise_std, None, params.rng_seed)


def printer_reference(displacement: float = PRINTER_MOVE["displacement"],
                      params: PrinterParams = PRINTER) -> MotionProfile:
    return fourth_order_profile(displacement, PRINTER_BOUNDS, params.ts,
                                PRINTER_MOVE["pre_rest"], n_total=PRINTER_MOVE["n_total"])


# identified design model: belt mode 6% high, 50% more damping, mass 2% high
ACCURATE_MODEL = dict(mass=0.51, belt_freq_hz=37.1, belt_damping=0.075)


def printer_models(params: PrinterParams = PRINTER):
    """Design models of the printer's process sensitivity.

    Returns ``(rigid, accurate)``. ``rigid`` knows only the mass, ``accurate``
    adds the belt mode with the parameter errors of an identified model.
    """
    K = pd_controller(params.kp, params.kd, params.ts)
    G_rigid = discretize_zoh(params.modal(with_belt=False), params.ts)
    G_acc = discretize_zoh(params.modal(**ACCURATE_MODEL), params.ts)
    return closed_loop_maps(G_rigid, K)[1], closed_loop_maps(G_acc, K)[1]


# --------------------------------------------------------------------------
# Coupled two-axis scenario
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CoupledScenario:
    """Square MIMO loop given directly by its closed-loop maps.

    ``e = S r - PS f - S v`` channel-wise, with ``S`` diagonal (one entry
    per axis) and ``PS`` a full matrix of transfer functions.
    """

    S: tuple  # per-axis sensitivity
    PS: tuple  # PS[i][j]: feedforward j -> (negated) error i
    noise_std: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        n = len(self.S)
        ps = tuple(tuple(row) for row in self.PS)
        if len(ps) != n or any(len(row) != n for row in ps):
            raise InvalidParameterError(f"PS must be {n}x{n}")
        for row in ps:
            for g in row:
                check_ts(self.S[0].ts, g.ts)
        object.__setattr__(self, "S", tuple(self.S))
        object.__setattr__(self, "PS", ps)

    @property
    def ts(self) -> float:
        return self.S[0].ts

    @property
    def n_axes(self) -> int:
        return len(self.S)


def coupled_printer_scenario(coupling: float = 1.2, params: PrinterParams = PRINTER) -> CoupledScenario:
    """Two identical printer axes with cross-coupling of one sample delay.

    ``PS = ps [[1, c z^-1], [c z^-1, 1]]``; ``det = ps^2 (1 - c^2 z^-2)`` has
    zeros at ``+-c``, so for ``c > 1`` the coupled system is non-minimum
    phase even though each axis alone is not. Ignoring the coupling leaves
    ``I - PS L`` with singular value ``c`` at every frequency.
    """
    sc = default_printer_scenario(params).noise_free()
    cross = sc.PS * TransferFunction([0.0, coupling], [1.0], params.ts)
    return CoupledScenario((sc.S, sc.S), ((sc.PS, cross), (cross, sc.PS)))


def run_task_mimo(sc: CoupledScenario, r, f, task_index: int):
    """One task of the coupled loop; ``r`` and ``f`` are tuples per axis."""
    n = sc.n_axes
    if len(r) != n or len(f) != n:
        raise IncompatibleSignalsError(f"expected {n} channels")
    out = []
    for i in range(n):
        e = simulate(sc.S[i], r[i]).samples
        for j in range(n):
            if np.any(f[j].samples):
                e = e - simulate(sc.PS[i][j], f[j]).samples
        if sc.noise_std:
            rng = np.random.default_rng([int(sc.rng_seed), int(task_index), i])
            v = Signal(rng.normal(0.0, sc.noise_std, len(r[i])), sc.ts)
            e = e - simulate(sc.S[i], v).samples
        out.append(Signal(e, sc.ts))
    return tuple(out)
