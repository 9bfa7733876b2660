"""Basis-function ILC: feedforward restricted to ``f = Psi(r) theta`` with
columns derived from the reference, so learned parameters carry over when
the reference changes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve

from .errors import DimensionError, InvalidParameterError, SingularUpdateError
from .filters import NoncausalFilter
from .signal_lti import LiftedOperator, Signal, check_ts
from .trajectory import MotionProfile

GENERATORS = ("position", "velocity", "acceleration", "jerk", "snap")
_ORDER = {name: k for k, name in enumerate(GENERATORS)}
JITTER = 1e-12  # relative diagonal jitter of the normal equations


@dataclass(frozen=True)
class BasisSpec:
    generators: tuple = ("acceleration",)

    def __post_init__(self):
        g = tuple(self.generators)
        if not g:
            raise InvalidParameterError("basis needs at least one generator")
        bad = [x for x in g if x not in _ORDER]
        if bad:
            raise InvalidParameterError(f"unknown basis generators {bad}; choose from {GENERATORS}")
        object.__setattr__(self, "generators", g)

    @property
    def size(self) -> int:
        return len(self.generators)


def _derivative(r, k: int) -> np.ndarray:
    if isinstance(r, MotionProfile):
        d = r.derivative(k)
        if d is not None:
            return d.samples
        r = r.position
    x = r.samples
    for _ in range(k):
        # central differences inside, one-sided at the ends
        x = np.gradient(x, r.ts)
    return x


def build_basis(r, spec: BasisSpec) -> np.ndarray:
    """``N x p`` matrix whose column ``k`` is generator ``k`` applied to ``r``.

    ``r`` is a :class:`Signal` or a :class:`MotionProfile`; profiles supply
    their exact derivatives.
    """
    sig = r.position if isinstance(r, MotionProfile) else r
    if not np.all(np.isfinite(sig.samples)):
        raise InvalidParameterError("reference must be finite")
    return np.column_stack([_derivative(r, _ORDER[g]) for g in spec.generators])


def feedforward_from_params(theta, r, spec: BasisSpec) -> Signal:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.size,):
        raise DimensionError(f"theta must have {spec.size} entries, got shape {theta.shape}")
    ts = r.ts
    return Signal(build_basis(r, spec) @ theta, ts)


def update_params(theta, e: Signal, r, spec: BasisSpec, model_J: LiftedOperator,
                  w_e: float = 1.0, w_dtheta: float = 0.0) -> np.ndarray:
    """One least-squares parameter step through the lifted model.

    Minimises ``w_e ||e - J Psi dtheta||^2 + w_dtheta ||dtheta||^2`` by the
    regularised normal equations. Columns are scaled to unit norm before
    solving, which leaves the minimiser unchanged.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.size,) or not np.all(np.isfinite(theta)):
        raise DimensionError(f"theta must hold {spec.size} finite entries")
    if not (w_e > 0 and w_dtheta >= 0 and np.isfinite(w_e) and np.isfinite(w_dtheta)):
        raise InvalidParameterError("weights need w_e > 0 and w_dtheta >= 0")
    check_ts(model_J.ts, e.ts)
    psi = build_basis(r, spec)
    if psi.shape[0] != model_J.n or len(e) != model_J.n:
        raise DimensionError("reference, error and lifted model must share the record length")
    phi = model_J.matrix @ psi
    scale = np.linalg.norm(phi, axis=0)
    if w_dtheta == 0.0 and (np.any(scale == 0) or np.linalg.matrix_rank(phi / np.where(scale, scale, 1)) < spec.size):
        raise SingularUpdateError("basis columns are linearly dependent through the model")
    d = np.where(scale > 0, 1.0 / np.where(scale > 0, scale, 1.0), 1.0)
    ps = phi * d
    A = w_e * ps.T @ ps + w_dtheta * np.diag(d ** 2)
    A = A + JITTER * np.trace(A) / spec.size * np.eye(spec.size)
    b = w_e * ps.T @ e.samples
    return theta + d * solve(A, b, assume_a="pos")


def run_basis_ilc(sc, r, spec: BasisSpec, model_J: LiftedOperator, n_iter: int = 10,
                  theta0=None, w_e: float = 1.0, w_dtheta: float = 0.0, task_offset: int = 0):
    """Learning loop on parameters; returns ``(thetas, errors)``, one per task."""
    from .plant_lab import run_task

    theta = np.zeros(spec.size) if theta0 is None else np.asarray(theta0, dtype=float)
    thetas, errors = [], []
    for j in range(n_iter + 1):
        e = run_task(sc, _position(r), feedforward_from_params(theta, r, spec), task_offset + j).e
        thetas.append(theta)
        errors.append(e)
        theta = update_params(theta, e, r, spec, model_J, w_e, w_dtheta)
    return thetas, errors


def _position(r) -> Signal:
    return r.position if isinstance(r, MotionProfile) else r


@dataclass(frozen=True)
class ReferenceChangeReport:
    switch_task: int
    feedback: tuple  # ||e_j||_2 per task, f = 0
    signal_ilc: tuple
    basis_ilc: tuple
    thetas: tuple  # basis parameters used in each task

    def to_dict(self) -> dict:
        return {
            "switch_task": self.switch_task,
            "feedback": list(self.feedback),
            "signal_ilc": list(self.signal_ilc),
            "basis_ilc": list(self.basis_ilc),
            "thetas": [list(map(float, t)) for t in self.thetas],
        }


def demonstrate_reference_change(sc, r_a, r_b, L: NoncausalFilter, Q: NoncausalFilter,
                                 spec: BasisSpec, model_J: LiftedOperator, n_tasks: int = 20,
                                 switch_task: int = 10, alpha: float = 1.0,
                                 w_e: float = 1.0, w_dtheta: float = 0.0) -> ReferenceChangeReport:
    """Feedback only, signal ILC and basis ILC on a task sequence whose
    reference switches from ``r_a`` to ``r_b`` at ``switch_task``.

    The signal learner keeps its feedforward across the switch, the basis
    learner keeps its parameters and rebuilds ``Psi`` from the new reference.
    """
    from .ilc import ilc_update
    from .plant_lab import run_task

    pa, pb = _position(r_a), _position(r_b)
    pa._other(pb)
    if not 0 < switch_task < n_tasks:
        raise InvalidParameterError("switch_task must lie strictly inside the task range")
    zero = Signal.zeros(len(pa), pa.ts)
    fb, sig, bas, thetas = [], [], [], []
    f = zero
    theta = np.zeros(spec.size)
    for j in range(n_tasks):
        r = r_a if j < switch_task else r_b
        rp = _position(r)
        fb.append(run_task(sc, rp, zero, j).e.norm())
        e = run_task(sc, rp, f, j).e
        sig.append(e.norm())
        f = ilc_update(f, e, L, Q, alpha, L.n_preview)
        eb = run_task(sc, rp, feedforward_from_params(theta, r, spec), j).e
        bas.append(eb.norm())
        thetas.append(theta)
        theta = update_params(theta, eb, r, spec, model_J, w_e, w_dtheta)
    return ReferenceChangeReport(switch_task, tuple(fb), tuple(sig), tuple(bas), tuple(thetas))
