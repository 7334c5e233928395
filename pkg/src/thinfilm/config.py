"""Run configuration: flat ``block.key = value`` files with ``#`` comments.

An empty file gives the default scenario S1 (L = 1, n = 256, cosine
perturbations of amplitude 0.05 on h = Gamma = 1, D = 1, linear sigma with
beta = 1, t_end = 1).  Unknown blocks or keys are errors.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .core import Grid, PhysicalParams
from .errors import ConfigError
from .integrator import IntegratorConfig
from .surfactant import SurfactantModel


@dataclass(frozen=True)
class SigmaBlock:
    kind: str = "linear"
    sigma0: float = 1.0
    beta: float = 1.0
    table_path: str = ""
    phi_offset: float = 0.01


@dataclass(frozen=True)
class PhysicsBlock:
    D: float = 1.0
    averaging: str = "arithmetic"


@dataclass(frozen=True)
class GridBlock:
    L: float = 1.0
    n: int = 256


@dataclass(frozen=True)
class TimeBlock:
    dt_init: float = 1e-6
    dt_min: float = 1e-12
    dt_max: float = 1e-3
    t_end: float = 1.0
    safety: float = 0.9


@dataclass(frozen=True)
class NewtonBlock:
    tol: float = 1e-10
    max_iters: int = 12
    target_iters: int = 4


@dataclass(frozen=True)
class ScenarioBlock:
    h_kind: str = "cosine"
    h_mean: float = 1.0
    h_amp: float = 0.05
    h_k: int = 1
    gamma_kind: str = "cosine"
    gamma_mean: float = 1.0
    gamma_amp: float = 0.05
    gamma_k: int = 1
    bump_width: float = 0.1
    file: str = ""


@dataclass(frozen=True)
class OutputBlock:
    dir: str = "."
    name: str = "run"
    checkpoint_every: int = 0
    stability: bool = True
    fit_norm: str = "l2"
    # negative means "not set": the fit uses the last half of the run
    fit_t0: float = -1.0
    fit_t1: float = -1.0


@dataclass(frozen=True)
class StabilityBlock:
    q: float = 1.0
    n_max: int = 128


BLOCKS = {
    "sigma": SigmaBlock, "physics": PhysicsBlock, "grid": GridBlock, "time": TimeBlock,
    "newton": NewtonBlock, "scenario": ScenarioBlock, "output": OutputBlock,
    "stability": StabilityBlock,
}


@dataclass(frozen=True)
class RunConfig:
    sigma: SigmaBlock = field(default_factory=SigmaBlock)
    physics: PhysicsBlock = field(default_factory=PhysicsBlock)
    grid: GridBlock = field(default_factory=GridBlock)
    time: TimeBlock = field(default_factory=TimeBlock)
    newton: NewtonBlock = field(default_factory=NewtonBlock)
    scenario: ScenarioBlock = field(default_factory=ScenarioBlock)
    output: OutputBlock = field(default_factory=OutputBlock)
    stability: StabilityBlock = field(default_factory=StabilityBlock)

    def get(self, key):
        block, name = _split_key(key)
        return getattr(getattr(self, block), name)

    def with_values(self, values: dict):
        """Copy with ``{"block.key": value}`` overrides (values may be strings), validated."""
        blocks = {b: getattr(self, b) for b in BLOCKS}
        for key, raw in values.items():
            block, name = _split_key(key)
            cur = getattr(blocks[block], name)
            val = _coerce(raw, type(cur), key) if isinstance(raw, str) else raw
            blocks[block] = replace(blocks[block], **{name: val})
        cfg = RunConfig(**blocks)
        validate(cfg)
        return cfg

    def to_text(self):
        lines = []
        for b in BLOCKS:
            blk = getattr(self, b)
            for f in fields(blk):
                lines.append(f"{b}.{f.name} = {_emit(getattr(blk, f.name))}")
        return "\n".join(lines) + "\n"

    def hash(self):
        return hashlib.sha256(self.to_text().encode()).digest()

    # --- builders ---
    def model(self):
        s = self.sigma
        if s.kind == "tabulated":
            return SurfactantModel.from_table_file(s.table_path, s.phi_offset)
        return SurfactantModel.linear(s.sigma0, s.beta, s.phi_offset)

    def grid_obj(self):
        return Grid(self.grid.L, self.grid.n)

    def params(self):
        return PhysicalParams(self.physics.D, self.model(), self.grid_obj(), self.physics.averaging)

    def integrator(self):
        t, nw = self.time, self.newton
        return IntegratorConfig(t.dt_init, t.dt_min, t.dt_max, t.t_end, nw.tol, nw.max_iters,
                                t.safety, nw.target_iters)

    def fit_window(self):
        o = self.output
        if o.fit_t0 < 0 and o.fit_t1 < 0:
            return None
        return (max(o.fit_t0, 0.0), o.fit_t1 if o.fit_t1 >= 0 else self.time.t_end)


def _split_key(key):
    parts = key.strip().split(".")
    if len(parts) != 2:
        raise ConfigError("expected block.key", key=key)
    block, name = parts
    if block not in BLOCKS:
        raise ConfigError(f"unknown block {block!r}", key=key)
    if name not in {f.name for f in fields(BLOCKS[block])}:
        raise ConfigError(f"unknown key {name!r} in block {block!r}", key=key)
    return block, name


def _emit(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    return str(v)


def _coerce(raw, typ, key, line=None):
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError(raw)
            return v
    except ValueError:
        raise ConfigError(f"cannot read {raw!r} as {typ.__name__}", key=key, line=line) from None
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
        return raw[1:-1].replace('\\"', '"').replace("\\\\", "\\")
    return raw


def _strip_comment(line):
    out, quote = [], None
    for ch in line:
        if quote:
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch == "#":
            break
        out.append(ch)
    return "".join(out)


def parse_config(text, base_dir=None):
    """Parse config text into a validated RunConfig.

    Relative table/scenario paths are resolved against ``base_dir`` when
    given.
    """
    values, where = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'block.key = value'", line=lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        try:
            block, name = _split_key(key)
        except ConfigError as exc:
            raise ConfigError(str(exc).split(": ", 1)[-1], key=key, line=lineno) from None
        if key in values:
            raise ConfigError("duplicate key", key=key, line=lineno)
        default = getattr(BLOCKS[block](), name)
        values[key] = _coerce(val, type(default), key, lineno)
        where[key] = lineno
    if base_dir is not None:
        for key in ("sigma.table_path", "scenario.file"):
            if values.get(key):
                pth = Path(values[key])
                if not pth.is_absolute():
                    values[key] = str((Path(base_dir) / pth).resolve())
    blocks = {b: cls() for b, cls in BLOCKS.items()}
    for key, v in values.items():
        block, name = key.split(".")
        blocks[block] = replace(blocks[block], **{name: v})
    cfg = RunConfig(**blocks)
    validate(cfg, where)
    return cfg


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    return parse_config(text, base_dir=path.parent)


def validate(cfg: RunConfig, where=None):
    where = where or {}

    def fail(key, msg):
        raise ConfigError(msg, key=key, line=where.get(key))

    def positive(key):
        if not cfg.get(key) > 0:
            fail(key, f"must be positive, got {cfg.get(key)}")

    def choice(key, options):
        if cfg.get(key) not in options:
            fail(key, f"must be one of {', '.join(options)}; got {cfg.get(key)!r}")

    choice("sigma.kind", ("linear", "tabulated"))
    positive("sigma.sigma0")
    if cfg.sigma.beta < 0:
        fail("sigma.beta", "must be nonnegative (sigma must not increase)")
    if cfg.sigma.phi_offset < 0:
        fail("sigma.phi_offset", "must be nonnegative")
    if cfg.sigma.kind == "tabulated" and not cfg.sigma.table_path:
        fail("sigma.table_path", "required for tabulated sigma")
    positive("physics.D")
    choice("physics.averaging", ("arithmetic", "harmonic"))
    positive("grid.L")
    if cfg.grid.n < 8:
        fail("grid.n", "need at least 8 cells")
    for k in ("dt_init", "dt_min", "dt_max", "t_end"):
        positive(f"time.{k}")
    if not cfg.time.dt_min <= cfg.time.dt_init <= cfg.time.dt_max:
        fail("time.dt_init", "need dt_min <= dt_init <= dt_max")
    if not 0 < cfg.time.safety <= 1:
        fail("time.safety", "must lie in (0, 1]")
    positive("newton.tol")
    if cfg.newton.max_iters < 1:
        fail("newton.max_iters", "must be >= 1")
    if cfg.newton.target_iters < 1:
        fail("newton.target_iters", "must be >= 1")
    kinds = ("flat", "cosine", "bump", "file")
    choice("scenario.h_kind", kinds)
    choice("scenario.gamma_kind", kinds)
    positive("scenario.h_mean")
    positive("scenario.gamma_mean")
    for k in ("h_k", "gamma_k"):
        if cfg.get(f"scenario.{k}") < 1:
            fail(f"scenario.{k}", "cosine mode must be an integer >= 1")
    positive("scenario.bump_width")
    if "file" in (cfg.scenario.h_kind, cfg.scenario.gamma_kind) and not cfg.scenario.file:
        fail("scenario.file", "required for file initial data")
    if cfg.output.checkpoint_every < 0:
        fail("output.checkpoint_every", "must be >= 0")
    choice("output.fit_norm", ("l2", "linf", "h1"))
    if not cfg.output.name or "/" in cfg.output.name:
        fail("output.name", "must be a plain file stem")
    positive("stability.q")
    if not 8 <= cfg.stability.n_max <= 512:
        fail("stability.n_max", "must lie in [8, 512] (dense eigensolve)")


S1 = RunConfig()

PRESETS = {
    "S1": S1,
    # S1 with a smaller perturbation, for comparing with the linear rate
    "S1-small": S1.with_values({"scenario.h_amp": 0.01, "scenario.gamma_amp": 0.01}),
    # drop spreading onto a 1e-6 precursor: the front drives min h toward 0
    # and positivity rejections push dt below dt_min around t = 0.04
    "degenerate": S1.with_values({
        "grid.n": 64, "scenario.h_kind": "bump", "scenario.h_mean": 1e-6,
        "scenario.h_amp": 1.0, "scenario.bump_width": 0.1, "scenario.gamma_kind": "flat",
        "time.dt_init": 1e-5, "time.dt_min": 1e-9, "time.dt_max": 1e-1,
        "output.checkpoint_every": 50, "output.stability": False}),
}
