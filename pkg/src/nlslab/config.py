"""Run-file schema.

A run file is one JSON object. Unknown keys anywhere are rejected and every
number must be finite. Example::

    {
      "command": "simulate",
      "model": {"dims": 1, "grid": {"L": 40, "M": 1024},
                "local": {"kind": "power", "coefs": [1], "exps": [2]}},
      "initial": {"kind": "gaussian", "amplitude": 0.8, "width": 1.0},
      "evolve": {"dt_init": 0.001, "t_final": 5}
    }
"""
from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .dynamics import EvolveOptions
from .grid import Grid, make_grid
from .model import KernelSpec, LocalNonlinearitySpec, ModelSpec, PotentialSpec
from .thresholds import LEVELS, SearchOptions

COMMANDS = ("simulate", "groundstate", "threshold", "classify", "dichotomy", "sweep")
Number = Union[int, float]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False, frozen=True)


class GridBlock(_Strict):
    L: float = Field(gt=0)
    M: int = Field(ge=8)


class PotentialBlock(_Strict):
    kind: Literal["zero", "harmonic", "saturating"] = "zero"
    a: float = 1.0


class LocalBlock(_Strict):
    kind: Literal["zero", "power", "two_power", "log_power"] = "zero"
    coefs: list[float] = []
    # exponents may be given as "3/2" to keep them exact
    exps: list[Union[float, str]] = []


class KernelBlock(_Strict):
    kind: Literal["zero", "inverse_power", "gaussian", "saturating", "truncated_power"] = "zero"
    a: float = 1.0
    K: Optional[Union[float, str]] = None
    inner: Optional[Union[float, str]] = None


class ModelBlock(_Strict):
    dims: Literal[1, 2, 3]
    grid: GridBlock
    potential: PotentialBlock = PotentialBlock()
    local: LocalBlock = LocalBlock()
    kernel: KernelBlock = KernelBlock()
    l: Optional[Union[float, str]] = None
    c1: Optional[float] = None
    c2: Optional[float] = None
    c3: Optional[float] = None
    c: Optional[float] = None


class InitialBlock(_Strict):
    kind: Literal["gaussian", "ground_state", "soliton_file", "snapshot"] = "gaussian"
    amplitude: float = 1.0
    width: float = Field(default=1.0, gt=0)
    sigma: float = 0.0
    # the phase is applied only when amplitude exceeds this value (always if unset)
    phase_above: Optional[float] = None
    path: Optional[str] = None

    @model_validator(mode="after")
    def _path_needed(self):
        if self.kind in ("soliton_file", "snapshot") and not self.path:
            raise ValueError(f"initial kind {self.kind} needs a path")
        return self


class EvolveBlock(_Strict):
    dt_init: float = 1e-3
    dt_min: float = 1e-12
    t_final: float = 1.0
    record_every: float = 1e-2
    blowup_gradient_factor: float = 1e3
    blowup_sigma_cap: float = 1e8
    adapt: bool = False
    adapt_tolerance: float = 1e-8
    # evolve on a finer grid of the same box
    points: Optional[int] = None


class ThresholdBlock(_Strict):
    levels: list[str] = ["d_II"]
    widths: list[float] = [0.5, 1.0, 2.0]
    amplitudes: list[float] = [0.5, 1.0, 2.0]
    n_perturb: int = Field(default=5, ge=0)
    perturb_size: float = 0.2
    refine_steps: int = Field(default=200, ge=0)
    use_ground_state: bool = True
    spread_limit: float = 0.10
    enforce_hypotheses: bool = True
    # known levels; when given the search is skipped
    values: dict[str, float] = {}

    @field_validator("levels")
    @classmethod
    def _known(cls, v):
        bad = [x for x in v if x not in LEVELS]
        if bad:
            raise ValueError(f"unknown threshold levels {bad}; choose from {list(LEVELS)}")
        return v

    @field_validator("values")
    @classmethod
    def _known_values(cls, v):
        bad = [x for x in v if x not in LEVELS]
        if bad:
            raise ValueError(f"unknown threshold levels {bad}")
        return v


class ClassifyBlock(_Strict):
    evolve: bool = False


class DichotomyBlock(_Strict):
    cs: list[float]
    workers: int = Field(default=1, ge=1)


class SweepBlock(_Strict):
    command: Literal["simulate", "groundstate", "threshold", "classify"]
    parameter: str
    values: list[Number] = Field(default=[], max_length=10_000)


class RunConfig(_Strict):
    command: Literal["simulate", "groundstate", "threshold", "classify", "dichotomy", "sweep"]
    run_id: str = Field(default="run", pattern=r"^[A-Za-z0-9_.-]+$")
    model: ModelBlock
    initial: InitialBlock = InitialBlock()
    omega: float = Field(default=1.0, gt=0)
    evolve: EvolveBlock = EvolveBlock()
    threshold: ThresholdBlock = ThresholdBlock()
    classify: ClassifyBlock = ClassifyBlock()
    dichotomy: Optional[DichotomyBlock] = None
    sweep: Optional[SweepBlock] = None
    output_dir: str = "nls-lab-out"
    seed: int = Field(default=0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def _blocks_present(self):
        if self.command == "dichotomy" and self.dichotomy is None:
            raise ValueError("command dichotomy needs a dichotomy block")
        if self.command == "sweep" and self.sweep is None:
            raise ValueError("command sweep needs a sweep block")
        return self

    # conversions into library objects

    def build_model(self) -> ModelSpec:
        m = self.model
        return ModelSpec(
            m.dims,
            PotentialSpec(m.potential.kind, m.potential.a),
            LocalNonlinearitySpec(m.local.kind, tuple(m.local.coefs), tuple(m.local.exps)),
            KernelSpec(m.kernel.kind, m.kernel.a, m.kernel.K, m.kernel.inner),
            m.l, m.c1, m.c2, m.c3, m.c,
        )

    def build_grid(self) -> Grid:
        return make_grid(self.model.dims, self.model.grid.L, self.model.grid.M)

    def evolve_grid(self) -> Grid:
        pts = self.evolve.points or self.model.grid.M
        return make_grid(self.model.dims, self.model.grid.L, pts)

    def evolve_options(self) -> EvolveOptions:
        return EvolveOptions(**self.evolve.model_dump(exclude={"points"}))

    def search_options(self) -> SearchOptions:
        t = self.threshold
        return SearchOptions(tuple(t.widths), tuple(t.amplitudes), t.n_perturb, t.perturb_size,
                             t.refine_steps, self.seed, t.use_ground_state, t.spread_limit)

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def load_config(path) -> RunConfig:
    """Parse and validate a run file. Raises OSError, json.JSONDecodeError or pydantic.ValidationError."""
    raw = json.loads(Path(path).read_text())
    return RunConfig.model_validate(raw)


def with_override(cfg: RunConfig, dotted: str, value) -> RunConfig:
    """Copy of ``cfg`` with one nested key replaced, revalidated."""
    data = copy.deepcopy(cfg.model_dump(mode="json"))
    keys = dotted.split(".")
    node = data
    for k in keys[:-1]:
        if not isinstance(node, dict) or k not in node or node[k] is None:
            raise ValueError(f"unknown parameter path {dotted!r}")
        node = node[k]
    if not isinstance(node, dict) or keys[-1] not in node:
        raise ValueError(f"unknown parameter path {dotted!r}")
    node[keys[-1]] = value
    return RunConfig.model_validate(data)
