"""Experiment configuration: JSON schema with explicit units, validation
that reports every violation at once, and construction of the simulation
objects.
"""

from __future__ import annotations

import json
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError
from .filters import NoncausalFilter, band_mask, design_inverse_L, design_Q
from .ilc_basis import GENERATORS, BasisSpec
from .plant_lab import Scenario, pd_controller
from .signal_lti import Mode, TransferFunction, closed_loop_maps, default_grid, discretize_zoh, make_modal_plant
from .trajectory import Bounds, fourth_order_profile, third_order_profile


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ModeSpec(_Model):
    residue_per_kg: float = Field(gt=0, allow_inf_nan=False)
    damping: float = Field(ge=0, lt=1)
    freq_hz: float = Field(gt=0, allow_inf_nan=False)


class ModalPlantSpec(_Model):
    kind: Literal["modal"] = "modal"
    mass_kg: float = Field(gt=0, allow_inf_nan=False)
    modes: list[ModeSpec] = []
    actuator_bandwidth_hz: Optional[float] = Field(default=None, gt=0, allow_inf_nan=False)


class TfPlantSpec(_Model):
    """Discrete transfer function in ascending powers of ``z^-1``."""

    kind: Literal["tf"] = "tf"
    num: list[float] = Field(min_length=1)
    den: list[float] = Field(min_length=1)


PlantSpec = Union[ModalPlantSpec, TfPlantSpec]


class ControllerSpec(_Model):
    kp_n_per_m: float = Field(gt=0, allow_inf_nan=False)
    kd_n_s_per_m: float = Field(ge=0, allow_inf_nan=False)


class DisturbanceSpec(_Model):
    noise_std_m: float = Field(default=0.0, ge=0, allow_inf_nan=False)
    encoder_resolution_m: float = Field(default=0.0, ge=0, allow_inf_nan=False)
    seed: int = Field(default=0, ge=0)


class ReferenceSpec(_Model):
    order: Literal[3, 4] = 4
    displacement_m: float = Field(allow_inf_nan=False)
    v_max_m_s: float = Field(gt=0, allow_inf_nan=False)
    a_max_m_s2: float = Field(gt=0, allow_inf_nan=False)
    j_max_m_s3: float = Field(gt=0, allow_inf_nan=False)
    s_max_m_s4: Optional[float] = Field(default=None, gt=0, allow_inf_nan=False)
    pre_rest_s: float = Field(default=0.0, ge=0, allow_inf_nan=False)
    n_samples: int = Field(gt=1)

    @model_validator(mode="after")
    def _snap_needed(self):
        if self.displacement_m == 0:
            raise ValueError("displacement_m must be nonzero")
        if self.order == 4 and self.s_max_m_s4 is None:
            raise ValueError("s_max_m_s4 is required for a 4th-order reference")
        return self


class QSpec(_Model):
    policy: Literal["identity", "design"] = "identity"
    margin: float = Field(default=0.1, gt=0, lt=1)


class IlcSpec(_Model):
    method: Literal["signal", "basis"] = "signal"
    # learning model: "plant" uses the true process sensitivity, otherwise a plant spec
    learning_model: Union[Literal["plant"], ModalPlantSpec, TfPlantSpec] = "plant"
    preview_budget_samples: int = Field(default=200, ge=0)
    q: QSpec = QSpec()
    alpha: float = Field(default=1.0, gt=0, le=1)
    n_iter: int = Field(default=10, ge=0)
    band_hz: tuple[float, float] = (1.0, 500.0)
    require_convergence: bool = True
    basis: list[str] = ["acceleration", "jerk", "snap"]
    w_e: float = Field(default=1.0, gt=0)
    w_dtheta: float = Field(default=0.0, ge=0)
    save_signals: bool = False

    @model_validator(mode="after")
    def _basis_names(self):
        bad = [g for g in self.basis if g not in GENERATORS]
        if bad:
            raise ValueError(f"unknown basis generators {bad}")
        if not self.basis:
            raise ValueError("basis needs at least one generator")
        if not self.band_hz[0] < self.band_hz[1]:
            raise ValueError("band_hz must be increasing")
        return self


class EnsembleSpec(_Model):
    n_exp: int = Field(default=10, ge=2)
    first_task: int = Field(default=0, ge=0)


class ScenarioConfig(_Model):
    name: str = Field(min_length=1, pattern=r"^[A-Za-z0-9_.-]+$")
    ts_s: float = Field(gt=0, allow_inf_nan=False)
    plant: PlantSpec = Field(discriminator="kind")
    controller: ControllerSpec
    disturbance: DisturbanceSpec = DisturbanceSpec()
    reference: ReferenceSpec
    ilc: Optional[IlcSpec] = None
    ensemble: Optional[EnsembleSpec] = None
    output_dir: Optional[str] = None

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"


def _locate(text: str, pos: int):
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, col


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a JSON config.

    Raises :class:`ConfigError` with line/column on a syntax error, or with
    the full list of violations (``"field.path: message"``) otherwise.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"JSON syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}",
                          line=exc.lineno, column=exc.colno) from None
    try:
        return ScenarioConfig.model_validate(raw)
    except ValidationError as exc:
        violations = [".".join(str(p) for p in err["loc"]) + ": " + err["msg"] for err in exc.errors()]
        raise ConfigError("invalid config:\n  " + "\n  ".join(violations), violations=violations) from None


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# --------------------------------------------------------------------------
# Construction
# --------------------------------------------------------------------------


def build_plant(spec, ts: float) -> TransferFunction:
    if isinstance(spec, TfPlantSpec):
        return TransferFunction(spec.num, spec.den, ts)
    modes = [Mode(m.residue_per_kg, m.damping, 2 * np.pi * m.freq_hz) for m in spec.modes]
    bw = None if spec.actuator_bandwidth_hz is None else 2 * np.pi * spec.actuator_bandwidth_hz
    return discretize_zoh(make_modal_plant(spec.mass_kg, modes, bw), ts)


def build_scenario(cfg: ScenarioConfig) -> Scenario:
    G = build_plant(cfg.plant, cfg.ts_s)
    K = pd_controller(cfg.controller.kp_n_per_m, cfg.controller.kd_n_s_per_m, cfg.ts_s)
    d = cfg.disturbance
    return Scenario(G, K, d.encoder_resolution_m, d.noise_std_m, None, d.seed)


def build_reference(cfg: ScenarioConfig):
    r = cfg.reference
    b = Bounds(r.v_max_m_s, r.a_max_m_s2, r.j_max_m_s3, r.s_max_m_s4)
    gen = fourth_order_profile if r.order == 4 else third_order_profile
    return gen(r.displacement_m, b, cfg.ts_s, r.pre_rest_s, n_total=r.n_samples)


def learning_model(cfg: ScenarioConfig, sc: Scenario) -> TransferFunction:
    """Process-sensitivity model the learning filter is built from."""
    lm = cfg.ilc.learning_model
    if lm == "plant":
        return sc.PS
    return closed_loop_maps(build_plant(lm, cfg.ts_s), sc.K)[1]


def build_filters(cfg: ScenarioConfig, sc: Scenario):
    """``(L, Q, grid, mask)``. Q is designed on the scenario's own FRF, which
    stands in for a measured one."""
    from .signal_lti import freq_response

    il = cfg.ilc
    L = design_inverse_L(learning_model(cfg, sc), il.preview_budget_samples)
    grid = default_grid(cfg.ts_s)
    mask = band_mask(grid, *il.band_hz)
    if il.q.policy == "identity":
        Q = NoncausalFilter.identity(cfg.ts_s)
    else:
        Q = design_Q(freq_response(sc.PS, grid), L, mask, margin=il.q.margin)
    return L, Q, grid, mask


def basis_spec(cfg: ScenarioConfig) -> BasisSpec:
    return BasisSpec(tuple(cfg.ilc.basis))
