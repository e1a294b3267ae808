"""Versioned JSON experiment configuration.

A configuration names a curve, its discretization, one task with its
parameters, the output location and a seed.  ``ExperimentConfig.from_dict``
rejects unknown keys and invalid values with :class:`ConfigInvalid`, and
``to_dict`` / ``from_dict`` round-trip losslessly.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from enum import Enum

from .errors import ConfigInvalid, GeometryError
from .geometry import (
    DEFAULT_PANEL_ORDER,
    CurveDescriptor,
    CurveMesh,
    build_broken_line,
    build_circle,
    build_corner_loop,
)

SCHEMA_VERSION = 1


class Task(str, Enum):
    EIG = "Eig"
    SWEEP_ALPHA = "SweepAlpha"
    SWEEP_BETA = "SweepBeta"
    CORNER_CONSTANT = "CornerConstant"
    DIRAC_LIMIT = "DiracLimit"
    VARIATIONAL = "Variational"
    TRANSFER_CHECK = "TransferCheck"


SUBCOMMANDS = {
    "eig": Task.EIG,
    "sweep-alpha": Task.SWEEP_ALPHA,
    "sweep-beta": Task.SWEEP_BETA,
    "corner-constant": Task.CORNER_CONSTANT,
    "dirac-limit": Task.DIRAC_LIMIT,
    "variational": Task.VARIATIONAL,
    "transfer-check": Task.TRANSFER_CHECK,
}


@dataclass
class CurveConfig:
    kind: str = "circle"
    radius: float | None = None
    half_angle: float | None = None
    scale: float | None = None
    truncation: float | None = None

    def descriptor(self) -> CurveDescriptor:
        return CurveDescriptor(self.kind, self.radius, self.half_angle, self.scale, self.truncation)


@dataclass
class Discretization:
    """Mesh parameters; ``quadrature`` applies to circles only."""

    n_nodes: int = 256
    grading: float = 3.0
    panel_order: int = DEFAULT_PANEL_ORDER
    quadrature: str = "trapezoid"
    zone: float | None = None


@dataclass
class TaskParams:
    """Parameters of all tasks; each task reads the fields it needs."""

    operator: str = "ObliqueH"
    n: int = 1
    alpha: float | None = None
    beta: float | None = None
    c: float | None = None
    alpha_grid: list | None = None
    beta_grid: list | None = None
    c_grid: list | None = None
    theta: float | None = None
    lengths: list | None = None
    corner_tol: float = 1e-4
    a: float | None = None
    b: float | None = None
    bump_A: float = 0.5
    bump_B: float = 0.5
    theta_scale: float = 0.05
    chart: str = "flat"
    random_draws: int = 0
    residual_tol: float = 1e-10
    bracket_rel: float = 1e-3


@dataclass
class OutputConfig:
    directory: str = "out"
    formats: list = field(default_factory=lambda: ["csv", "json"])
    cache: bool = True


@dataclass
class ExperimentConfig:
    task: Task
    curve: CurveConfig = field(default_factory=CurveConfig)
    discretization: Discretization = field(default_factory=Discretization)
    params: TaskParams = field(default_factory=TaskParams)
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 0
    schema_version: int = SCHEMA_VERSION

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d["task"] = self.task.value
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def sha256(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigInvalid("configuration must be a JSON object")
        d = dict(d)
        version = d.pop("schema_version", None)
        if version != SCHEMA_VERSION:
            raise ConfigInvalid(f"unsupported schema_version {version!r}")
        _no_extra(d, {f.name for f in fields(cls)}, "config")
        try:
            task = Task(d.pop("task"))
        except (KeyError, ValueError) as exc:
            raise ConfigInvalid(f"missing or unknown task: {exc}") from None
        sections = {
            "curve": CurveConfig,
            "discretization": Discretization,
            "params": TaskParams,
            "output": OutputConfig,
        }
        kw = {}
        for name, typ in sections.items():
            sub = d.pop(name, {})
            if not isinstance(sub, dict):
                raise ConfigInvalid(f"section {name!r} must be an object")
            _no_extra(sub, {f.name for f in fields(typ)}, name)
            kw[name] = typ(**sub)
        seed = d.pop("seed", 0)
        cfg = cls(task, seed=seed, **kw)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"malformed JSON: {exc}") from None
        return cls.from_dict(d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigInvalid(f"cannot read config: {exc}") from None
        return cls.from_json(text)

    # -- validation ----------------------------------------------------

    def validate(self) -> None:
        """Check sign conventions, tolerances and task requirements."""
        try:
            self.curve.descriptor()
        except GeometryError as exc:
            raise ConfigInvalid(f"curve: {exc}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigInvalid(f"curve: {exc}") from None
        dz = self.discretization
        _int(dz.n_nodes, "n_nodes", 8)
        _int(dz.panel_order, "panel_order", 2)
        if not _num(dz.grading) or dz.grading < 1:
            raise ConfigInvalid("grading must be >= 1")
        if dz.quadrature not in ("trapezoid", "gauss"):
            raise ConfigInvalid("quadrature must be 'trapezoid' or 'gauss'")
        if dz.zone is not None and not (_num(dz.zone) and 0 < dz.zone < 1):
            raise ConfigInvalid("zone must lie in (0, 1)")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or not 0 <= self.seed < 2**64:
            raise ConfigInvalid("seed must be an unsigned 64-bit integer")
        out = self.output
        if not isinstance(out.directory, str) or not out.directory:
            raise ConfigInvalid("output directory must be a non-empty string")
        if not out.formats or any(f not in ("csv", "json") for f in out.formats):
            raise ConfigInvalid("output formats must be a non-empty subset of csv, json")
        if not isinstance(out.cache, bool):
            raise ConfigInvalid("output.cache must be a boolean")
        self._validate_params()

    def _validate_params(self) -> None:
        p, t = self.params, self.task
        _int(p.n, "n", 1)
        for name in ("corner_tol", "residual_tol", "bracket_rel"):
            if not (_num(getattr(p, name)) and getattr(p, name) > 0):
                raise ConfigInvalid(f"{name} must be > 0")
        if p.alpha is not None:
            _negative(p.alpha, "alpha")
        if p.beta is not None:
            _negative(p.beta, "beta")
        if p.c is not None:
            _positive(p.c, "c")
        for name, sign in (("alpha_grid", _negative), ("beta_grid", _negative), ("c_grid", _positive)):
            grid = getattr(p, name)
            if grid is not None:
                if not isinstance(grid, list) or not grid:
                    raise ConfigInvalid(f"{name} must be a non-empty list")
                for v in grid:
                    sign(v, name)
        kind = self.curve.kind
        if t is Task.EIG:
            need = {"ObliqueH": ("alpha",), "DeltaQ": ("beta",), "DiracB": ("alpha", "c")}
            if p.operator not in need:
                raise ConfigInvalid(f"unknown operator {p.operator!r}")
            _require(p, need[p.operator], t)
        elif t is Task.SWEEP_ALPHA:
            _require(p, ("alpha_grid",), t)
            _grid_len(p.alpha_grid, "alpha_grid")
        elif t is Task.SWEEP_BETA:
            _require(p, ("beta_grid",), t)
            _grid_len(p.beta_grid, "beta_grid")
        elif t is Task.CORNER_CONSTANT:
            _require(p, ("theta",), t)
            if not (_num(p.theta) and 0 < p.theta < math.pi / 2):
                raise ConfigInvalid("theta must lie in (0, pi/2)")
            if p.lengths is not None:
                if not isinstance(p.lengths, list) or len(p.lengths) < 2:
                    raise ConfigInvalid("lengths needs at least two entries")
                for v in p.lengths:
                    _positive(v, "lengths")
        elif t is Task.DIRAC_LIMIT:
            _require(p, ("alpha", "c_grid"), t)
        elif t is Task.VARIATIONAL:
            _require(p, ("beta",), t)
            for name in ("bump_A", "bump_B"):
                _positive(getattr(p, name), name)
            if not (_num(p.theta_scale) and 0 < p.theta_scale < 1):
                raise ConfigInvalid("theta_scale must lie in (0, 1)")
            if p.chart not in ("flat", "circle"):
                raise ConfigInvalid("chart must be 'flat' or 'circle'")
            if p.chart == "circle" and kind != "circle":
                raise ConfigInvalid("a circle chart needs a circle curve")
            _int(p.random_draws, "random_draws", 0)
        elif t is Task.TRANSFER_CHECK:
            _require(p, ("a", "b", "alpha_grid"), t)
            _positive(p.a, "a")
            _positive(p.b, "b")
            if p.a > p.b:
                raise ConfigInvalid("need a <= b")

    # -- mesh ------------------------------------------------------------

    def build_mesh(self) -> CurveMesh:
        c, dz = self.curve, self.discretization
        kw = {} if dz.zone is None else {"zone": dz.zone}
        if c.kind == "circle":
            return build_circle(c.radius, dz.n_nodes, dz.quadrature, dz.panel_order)
        if c.kind == "corner_loop":
            return build_corner_loop(c.half_angle, c.scale, dz.n_nodes, dz.grading, dz.panel_order, **kw)
        return build_broken_line(
            c.half_angle, c.truncation, dz.n_nodes, dz.grading, dz.panel_order, **kw
        )


def _no_extra(d: dict, allowed: set, where: str) -> None:
    extra = set(d) - allowed
    if extra:
        raise ConfigInvalid(f"unknown keys in {where}: {sorted(extra)}")


def _num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _int(v, name: str, lo: int) -> None:
    if not isinstance(v, int) or isinstance(v, bool) or v < lo:
        raise ConfigInvalid(f"{name} must be an integer >= {lo}")


def _negative(v, name: str) -> None:
    if not (_num(v) and v < 0):
        raise ConfigInvalid(f"{name} must be negative, got {v!r}")


def _positive(v, name: str) -> None:
    if not (_num(v) and v > 0):
        raise ConfigInvalid(f"{name} must be positive, got {v!r}")


def _require(p: TaskParams, names, task: Task) -> None:
    missing = [n for n in names if getattr(p, n) is None]
    if missing:
        raise ConfigInvalid(f"task {task.value} needs {', '.join(missing)}")


def _grid_len(grid, name: str) -> None:
    if len(grid) < 4:
        raise ConfigInvalid(f"{name} needs at least 4 points")
