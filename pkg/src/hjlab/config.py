"""Declarative experiment configuration (a single JSON document)."""
from __future__ import annotations

import hashlib
import json
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError

from .errors import ConfigError
from .hamiltonian import PRESETS, HamiltonianSpec, preset
from .solver import SolverConfig

Generator = Literal["random_piecewise_linear", "bump_grid"]
Initial = Literal["tent", "-tent", "abs", "zero"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class HamiltonianConfig(_Strict):
    """A preset name, optionally with field overrides, or a full field list."""

    preset: Optional[str] = None
    kind: Optional[Literal["quadratic", "gaussian_power"]] = None
    m: Optional[PositiveFloat] = None
    a0: Optional[PositiveFloat] = None
    a1: Optional[float] = None
    sigma_f: Optional[PositiveFloat] = None
    b0: Optional[float] = None
    b1: Optional[float] = None
    sigma_g: Optional[PositiveFloat] = None
    c1: Optional[float] = Field(default=None, ge=0)
    c2: Optional[PositiveFloat] = None
    c3: Optional[float] = Field(default=None, ge=0)
    c4: Optional[float] = Field(default=None, ge=0)
    c5: Optional[float] = Field(default=None, ge=0)
    alpha: Optional[float] = Field(default=None, gt=1)

    def to_spec(self, dim: int) -> HamiltonianSpec:
        fields = {k: v for k, v in self.model_dump().items() if k != "preset" and v is not None}
        if self.preset is not None:
            if self.preset not in PRESETS:
                raise ValueError(f"unknown preset {self.preset!r}; expected one of {sorted(PRESETS)}")
            base = preset(self.preset, dim).to_dict()
            base.update(fields)
            return HamiltonianSpec(**base)
        return HamiltonianSpec(dim=dim, **fields)


class GridConfig(_Strict):
    a: PositiveFloat = 4.0
    n: Annotated[int, Field(ge=3)] = 401
    N: Literal[1, 2] = 1


class SolverModel(_Strict):
    dt: PositiveFloat = 1e-3
    q_max: Optional[PositiveFloat] = None
    q_samples: Annotated[int, Field(ge=3)] = 41
    refine_iters: PositiveInt = 40
    boundary: Literal["extend_linear", "clamp"] = "extend_linear"

    def to_solver(self) -> SolverConfig:
        return SolverConfig(**self.model_dump())


class ValidateParams(_Strict):
    kind: Literal["validate"] = "validate"
    box: PositiveFloat = 3.0
    p_box: PositiveFloat = 5.0
    n_samples: PositiveInt = 10_000


class SolveParams(_Strict):
    kind: Literal["solve"] = "solve"
    initial: Initial = "tent"
    T: PositiveFloat = 1.0
    snapshots: list[Annotated[float, Field(ge=0)]] = []


class ConstantsParams(_Strict):
    kind: Literal["constants"] = "constants"
    R: PositiveFloat = 1.0
    M: PositiveFloat = 1.0
    T: PositiveFloat = 1.0
    K: PositiveFloat = 1.0
    T_query: Optional[PositiveFloat] = None


class DominanceParams(_Strict):
    kind: Literal["dominance"] = "dominance"
    R: PositiveFloat = 1.0
    M: PositiveFloat = 1.0
    times: list[PositiveFloat] = [0.25, 1.0]
    count: PositiveInt = 20
    generator: Generator = "random_piecewise_linear"
    pieces: Annotated[int, Field(ge=2)] = 8
    sc_scale: PositiveFloat = 0.16
    sc_slack: PositiveFloat = 0.05


class EntropyParams(_Strict):
    kind: Literal["entropy"] = "entropy"
    mode: Literal["bump", "image"] = "bump"
    epsilons: list[PositiveFloat] = [0.4, 0.2, 0.1, 0.05]
    R: PositiveFloat = 1.0
    M: PositiveFloat = 1.0
    T: PositiveFloat = 1.0
    count: PositiveInt = 20
    generator: Generator = "random_piecewise_linear"
    pieces: Annotated[int, Field(ge=2)] = 8
    r: PositiveFloat = 3.0
    K: PositiveFloat = 3.0
    alpha: PositiveFloat = 0.8
    tau: PositiveFloat = 0.1
    dx: PositiveFloat = 0.02
    attain_samples: Annotated[int, Field(ge=0)] = 2


class ControllabilityParams(_Strict):
    kind: Literal["controllability"] = "controllability"
    r: PositiveFloat = 1.0
    tau: PositiveFloat = 0.1
    amplitude: PositiveFloat = 0.02
    dx: PositiveFloat = 0.02
    inner_tol: PositiveFloat = 2.5e-2
    outer_tol: PositiveFloat = 1e-3
    auto_tau: bool = True


class ConvergenceParams(_Strict):
    kind: Literal["convergence"] = "convergence"
    a: PositiveFloat = 4.0
    levels: list[tuple[Annotated[int, Field(ge=3)], PositiveFloat]] = [(401, 1e-3), (801, 5e-4)]
    initials: list[Literal["tent", "-tent", "abs"]] = ["tent", "-tent", "abs"]
    T: PositiveFloat = 1.0
    error_tol: PositiveFloat = 5e-3
    min_ratio: PositiveFloat = 1.8


ExperimentParams = Annotated[
    Union[ValidateParams, SolveParams, ConstantsParams, DominanceParams, EntropyParams,
          ControllabilityParams, ConvergenceParams],
    Field(discriminator="kind"),
]

PARAM_MODELS = {
    "validate": ValidateParams, "solve": SolveParams, "constants": ConstantsParams,
    "dominance": DominanceParams, "entropy": EntropyParams, "controllability": ControllabilityParams,
    "convergence": ConvergenceParams,
}
SUBCOMMANDS = tuple(PARAM_MODELS)


class ExperimentConfig(_Strict):
    hamiltonian: HamiltonianConfig = HamiltonianConfig(preset="quadratic")
    grid: GridConfig = GridConfig()
    solver: SolverModel = SolverModel()
    experiment: Optional[ExperimentParams] = None
    seed: Annotated[int, Field(ge=0)] = 0
    output_dir: str = "hj_output"

    def params_for(self, subcommand: str):
        if self.experiment is None:
            return PARAM_MODELS[subcommand]()
        if self.experiment.kind != subcommand:
            raise ConfigError(f"config describes a {self.experiment.kind!r} experiment, not {subcommand!r}",
                              field="experiment.kind", line=None)
        return self.experiment

    def spec(self) -> HamiltonianSpec:
        return self.hamiltonian.to_spec(self.grid.N)

    def canonical(self) -> str:
        return json.dumps(self.model_dump(mode="json", exclude_none=True), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _line_of(text: str, loc) -> int | None:
    keys = [k for k in loc if isinstance(k, str)]
    for key in reversed(keys):
        needle = f'"{key}"'
        for i, line in enumerate(text.splitlines(), start=1):
            if needle in line:
                return i
    return None


def parse_config(text: str) -> ExperimentConfig:
    """Validate a JSON document; every failure becomes a ConfigError with line and field."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno, field=None) from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object", line=1, field=None)
    try:
        cfg = ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = [k for k in err["loc"] if not (isinstance(k, str) and k in PARAM_MODELS and err["loc"][0] == "experiment")]
        field = ".".join(str(k) for k in loc)
        raise ConfigError(f"{field}: {err['msg']}", line=_line_of(text, loc), field=field) from exc
    try:
        cfg.spec()
    except ValueError as exc:
        raise ConfigError(str(exc), line=_line_of(text, ["hamiltonian"]), field="hamiltonian") from exc
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", line=None, field=None) from exc
    return parse_config(text)
