"""Split repeated-task errors into a reproducible part (the sample mean,
which learning can cancel) and task-specific residuals (which it cannot).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IncompatibleSignalsError, InvalidParameterError
from .signal_lti import Signal, check_ts


@dataclass(frozen=True, eq=False)
class ErrorEnsemble:
    errors: tuple

    def __post_init__(self):
        errs = tuple(self.errors)
        if len(errs) < 2:
            raise InvalidParameterError("an ensemble needs at least two tasks")
        n, ts = len(errs[0]), errs[0].ts
        for e in errs[1:]:
            check_ts(ts, e.ts)
            if len(e) != n:
                raise IncompatibleSignalsError("all tasks must have the same length")
        object.__setattr__(self, "errors", errs)

    @property
    def n_exp(self) -> int:
        return len(self.errors)

    @property
    def ts(self) -> float:
        return self.errors[0].ts

    def matrix(self) -> np.ndarray:
        """Tasks as rows."""
        return np.vstack([e.samples for e in self.errors])


def sample_mean(ens: ErrorEnsemble) -> Signal:
    # mean of deviations from the first task: exact when all tasks agree
    mat = ens.matrix()
    return Signal(mat[0] + (mat[1:] - mat[0]).sum(axis=0) / ens.n_exp, ens.ts)


def decompose(ens: ErrorEnsemble):
    """Return ``(m_e, [e_j - m_e])``."""
    m = sample_mean(ens)
    return m, [e - m for e in ens.errors]


@dataclass(frozen=True)
class PerformanceReport:
    n_exp: int
    mean_norm: float  # ||m_e||_2
    task_norms: tuple  # ||e_j||_2
    residual_norms: tuple  # ||e_j - m_e||_2
    residual_rms: float  # sqrt(mean_j ||e_j - m_e||^2), the floor left after learning
    improvement_factor: float | None  # mean_norm / residual_rms; None when unbounded
    unbounded: bool

    def to_dict(self) -> dict:
        return {
            "n_exp": self.n_exp,
            "mean_norm_2": self.mean_norm,
            "task_norms_2": list(self.task_norms),
            "residual_norms_2": list(self.residual_norms),
            "residual_rms_2": self.residual_rms,
            "improvement_factor": self.improvement_factor,
            "improvement_unbounded": self.unbounded,
        }


def performance_bound(ens: ErrorEnsemble) -> PerformanceReport:
    """Norms of the decomposition and the predicted ILC improvement factor.

    The factor is ``||m_e||`` over the RMS of residual norms. With identical
    tasks the residual is zero; the factor is then reported as unbounded
    (``improvement_factor=None``) rather than as infinity.
    """
    m, res = decompose(ens)
    rn = tuple(float(r.norm()) for r in res)
    rms = float(np.sqrt(np.mean(np.square(rn))))
    mn = float(m.norm())
    unbounded = rms == 0.0
    factor = None if unbounded else mn / rms
    return PerformanceReport(ens.n_exp, mn, tuple(float(e.norm()) for e in ens.errors),
                             rn, rms, factor, unbounded)


def collect_ensemble(sc, r: Signal, n_exp: int = 10, f: Signal | None = None,
                     first_task: int = 0) -> ErrorEnsemble:
    """Run ``n_exp`` tasks with fixed feedforward (zero by default)."""
    from .plant_lab import run_task

    f = Signal.zeros(len(r), r.ts) if f is None else f
    return ErrorEnsemble(tuple(run_task(sc, r, f, first_task + k).e for k in range(n_exp)))
