"""Flat ``key=value`` run configuration.

Lines hold one ``key = value`` pair; ``#`` starts a comment.  Unknown
keys, malformed values and violated constraints raise
:class:`ConfigError` carrying the offending line number (0 when the
problem comes from the combination of defaults).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from .flow import MODES, FlowConfig
from .grid import GridError, build_grid
from .initialdata import CATALOG, InitialSpec
from .invariants import KINDS, BoundSpec


class ConfigError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _opt_float(text):
    return None if text.strip().lower() in ("", "none") else float(text)


def _words(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


# key -> (type converter, default)
SCHEMA = {
    "m": (int, 2),
    "n": (int, 2),
    "N": (int, 129),
    "L": (float, 8.0),
    "band": (float, 1.0),
    "mode": (str, "raw"),
    "epsilon": (float, 0.25),
    "cfl_factor": (float, 0.5),
    "t_end": (float, 1.0),
    "monitor_dt": (float, 0.05),
    "initial": (str, "cone2theta"),
    "beta": (float, 0.2),
    "a": (_opt_float, None),
    "k": (_floats, (1.0, 1.0)),
    "A": (_floats, (0.3,)),
    "scale": (float, 1.0),
    "R": (float, 4.0),
    "r0": (float, 0.5),
    "r1": (float, 3.0),
    "monitors": (_words, ()),
    "c": (_opt_float, None),
    "delta": (float, 0.5),
    "sigma": (float, 1.0),
    "decay_k": (float, 1.0),
    "coeffs": (_floats, (1.0, 1.0)),
    "t0": (float, 2.0),
    "y0": (_floats, ()),
    "dt_probe": (_opt_float, None),
    "C_tol": (float, 10.0),
    "tol_exp": (float, 1e-3),
    "snapshot_every": (int, 0),
    "seed": (int, 0),
    "out": (str, ""),
}
ALIASES = {"s_end": "t_end"}


@dataclass
class RunConfig:
    m: int = 2
    n: int = 2
    N: int = 129
    L: float = 8.0
    band: float = 1.0
    mode: str = "raw"
    epsilon: float = 0.25
    cfl_factor: float = 0.5
    t_end: float = 1.0
    monitor_dt: float = 0.05
    initial: str = "cone2theta"
    beta: float = 0.2
    a: float | None = None
    k: tuple = (1.0, 1.0)
    A: tuple = (0.3,)
    scale: float = 1.0
    R: float = 4.0
    r0: float = 0.5
    r1: float = 3.0
    monitors: tuple = ()
    c: float | None = None
    delta: float = 0.5
    sigma: float = 1.0
    decay_k: float = 1.0
    coeffs: tuple = (1.0, 1.0)
    t0: float = 2.0
    y0: tuple = ()
    dt_probe: float | None = None
    C_tol: float = 10.0
    tol_exp: float = 1e-3
    snapshot_every: int = 0
    seed: int = 0
    out: str = ""
    lines: dict = field(default_factory=dict, repr=False, compare=False)

    def initial_spec(self) -> InitialSpec:
        name = self.initial
        if name == "cone2theta":
            params = {"beta": self.beta}
        elif name == "linear":
            params = {"A": self.A, "n": self.n}
        elif name == "bowl_like":
            params = {"scale": self.scale}
        elif name == "shear":
            params = {"a": 0.5 if self.a is None else self.a}
        elif name == "bump":
            params = {"a": 1e-3 if self.a is None else self.a, "k": self.k, "R": self.R}
        else:
            params = {}
        return InitialSpec(name, params, self.r0, self.r1)

    def bound_specs(self) -> list[BoundSpec]:
        specs = []
        for kind in self.monitors:
            p = {"epsilon": self.epsilon}
            if kind in ("decay_a", "decay_c"):
                p["sigma"] = self.sigma
            elif kind == "decay_b":
                p["k"] = self.decay_k
            elif kind == "growth_poly":
                p["coeffs"] = self.coeffs
            elif kind == "conical":
                p.update(delta=self.delta, c=self.c)
            elif kind == "gaussian":
                p["t0"] = self.t0
                if self.y0:
                    p["y0"] = self.y0
            elif kind == "evol_consistency":
                p["dt_probe"] = self.dt_probe
            specs.append(BoundSpec(kind, p))
        return specs

    def flow_config(self, **overrides) -> FlowConfig:
        kw = dict(
            m=self.m, n=self.n, N=self.N, L=self.L, band=self.band,
            initial=self.initial_spec(), mode=self.mode, epsilon=self.epsilon,
            t_end=self.t_end, cfl_factor=self.cfl_factor, monitor_dt=self.monitor_dt,
            monitors=self.bound_specs(), c=self.c, delta=self.delta,
            out_dir=self.out or None, snapshot_every=self.snapshot_every,
            C_tol=self.C_tol, tol_exp=self.tol_exp, t0=self.t0,
        )
        kw.update(overrides)
        return FlowConfig(**kw)

    def to_text(self) -> str:
        out = []
        for f in fields(self):
            if f.name == "lines":
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            elif v is None:
                v = "none"
            out.append(f"{f.name}={v}")
        return "\n".join(out) + "\n"


def _check_local(key, value, line):
    if key == "N":
        if value % 2 == 0:
            raise ConfigError(line, "N must be odd")
        if value < 5:
            raise ConfigError(line, "N must be >= 5")
    elif key in ("m", "n") and value < 1:
        raise ConfigError(line, f"{key} must be >= 1")
    elif key == "L" and not value > 0:
        raise ConfigError(line, "L must be positive")
    elif key == "mode" and value not in MODES:
        raise ConfigError(line, f"mode must be one of {', '.join(MODES)}")
    elif key == "epsilon" and not 0 < value <= 1:
        raise ConfigError(line, "epsilon must lie in (0, 1]")
    elif key == "cfl_factor" and not 0 < value < 1:
        raise ConfigError(line, "cfl_factor must lie in (0, 1)")
    elif key == "initial" and value not in CATALOG:
        raise ConfigError(line, f"unknown initial {value!r}; known: {', '.join(CATALOG)}")
    elif key == "monitors":
        for kind in value:
            if kind not in KINDS:
                raise ConfigError(line, f"unknown monitor kind {kind!r}")
    elif key in ("t_end", "t0") and value < 0:
        raise ConfigError(line, f"{key} must be >= 0")
    elif key in ("monitor_dt", "C_tol", "tol_exp") and not value > 0:
        raise ConfigError(line, f"{key} must be positive")
    elif key == "snapshot_every" and value < 0:
        raise ConfigError(line, "snapshot_every must be >= 0")
    elif key == "delta" and not 0 < value <= 1:
        raise ConfigError(line, "delta must lie in (0, 1]")


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(lineno, f"expected key=value, got {body!r}")
        key, value = (s.strip() for s in body.split("=", 1))
        key = ALIASES.get(key, key)
        if key not in SCHEMA:
            raise ConfigError(lineno, f"unknown key {key!r}")
        conv = SCHEMA[key][0]
        try:
            parsed = conv(value)
        except ValueError:
            raise ConfigError(lineno, f"malformed value for {key}: {value!r}") from None
        if isinstance(parsed, float) and not math.isfinite(parsed):
            raise ConfigError(lineno, f"{key} must be finite")
        _check_local(key, parsed, lineno)
        setattr(cfg, key, parsed)
        lines[key] = lineno
    cfg.lines = lines
    _check_global(cfg)
    return cfg


def _check_global(cfg: RunConfig):
    where = cfg.lines.get
    try:
        grid = build_grid(cfg.m, cfg.N, cfg.L, cfg.band)
    except GridError as exc:
        raise ConfigError(where("band", where("N", 0)), str(exc)) from None
    if cfg.initial in ("cone2theta", "shear") and cfg.m < 2:
        raise ConfigError(where("initial", 0), f"{cfg.initial} needs m >= 2")
    if cfg.initial == "cone2theta" and not 0 < cfg.r0 < cfg.r1 < grid.L - grid.band:
        raise ConfigError(where("r1", where("r0", 0)), "need 0 < r0 < r1 < L - band")
    if cfg.initial != "linear" and cfg.n != 2:
        raise ConfigError(where("n", 0), f"{cfg.initial} maps into R^2; set n=2")
    if "gaussian" in cfg.monitors or "evol_consistency" in cfg.monitors:
        if cfg.mode != "raw":
            raise ConfigError(where("monitors", 0), "gaussian and evol_consistency need mode=raw")
    if "gaussian" in cfg.monitors and not cfg.t_end < cfg.t0:
        raise ConfigError(where("t0", where("t_end", 0)), "gaussian monitor needs t_end < t0")
    try:
        cfg.bound_specs()
    except ValueError as exc:
        raise ConfigError(where("monitors", 0), str(exc)) from None


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def echo_config(cfg: RunConfig, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.echo").write_text(cfg.to_text(), encoding="utf-8")
