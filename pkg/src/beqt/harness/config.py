"""Run configuration files (TOML).

Schema (every key is optional unless marked required)::

    [grid]
    N = 64
    [params]
    a = 1.0   b = 0.0   c = 1.0   L = 1.0   Gamma = 1.0   nu = 1.0   xi = 0.0
    [stepper]
    dt = 5e-4                     # required
    scheme = "imex_sbdf2"         # or "imex_euler"
    dealias_rule = "two_thirds"   # or "half"
    cfl_guard = 0.0               # 0 disables
    [initial]
    generator = "random_band_limited"   # or "director_winding"
    seed = 1                      # required
    kmax = 4.0
    q_h1 = 1.0                    # random_band_limited only
    u_l2 = 1.0
    slope = 1.0                   # random_band_limited only
    s = 0.5                       # director_winding only
    winding = [1, 0]              # director_winding only
    [run]
    T = 1.0                       # required
    cadence = 1
    galerkin_n = 0                # 0 means unset
    sobolev_s = 1.0
    [output]
    dir = "out"
    prefix = "run"

Dotted keys (``params.xi = 0.5``) are equivalent to the table form.  Unknown
keys are rejected with the line on which they occur.
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from ..evolution import SCHEMES, StepperConfig
from ..initial_data import GENERATORS
from ..spectral import DEALIAS_RULES
from ..tensor_core import ModelParams


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is 1-based when known."""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None,
                 path: Optional[str] = None):
        self.key, self.line, self.path = key, line, path
        where = ""
        if path:
            where += f"{path}:"
        if line:
            where += f"{line}:"
        super().__init__(f"{where} {message}".strip() if where else message)


_SCHEMA: Dict[str, Dict[str, Tuple[type, ...]]] = {
    "grid": {"N": (int,)},
    "params": {k: (int, float) for k in ("a", "b", "c", "L", "Gamma", "nu", "xi")},
    "stepper": {"dt": (int, float), "scheme": (str,), "dealias_rule": (str,),
                "cfl_guard": (int, float)},
    "initial": {"generator": (str,), "seed": (int,), "kmax": (int, float), "q_h1": (int, float),
                "u_l2": (int, float), "slope": (int, float), "s": (int, float), "winding": (list,)},
    "run": {"T": (int, float), "cadence": (int,), "galerkin_n": (int,), "sobolev_s": (int, float)},
    "output": {"dir": (str,), "prefix": (str,)},
}
_REQUIRED = (("stepper", "dt"), ("initial", "seed"), ("run", "T"))


@dataclass(frozen=True)
class InitialSpec:
    generator: str = "random_band_limited"
    seed: int = 0
    kmax: float = 4.0
    q_h1: float = 1.0
    u_l2: float = 1.0
    slope: float = 1.0
    s: float = 0.5
    winding: Tuple[int, int] = (1, 0)

    def kwargs(self) -> Dict[str, Any]:
        if self.generator == "random_band_limited":
            return dict(kmax=self.kmax, q_h1=self.q_h1, u_l2=self.u_l2, slope=self.slope)
        return dict(s=self.s, winding=self.winding, u_l2=self.u_l2, kmax=self.kmax)


@dataclass(frozen=True)
class RunConfig:
    N: int
    params: ModelParams
    stepper: StepperConfig
    initial: InitialSpec
    T: float
    cadence: int = 1
    galerkin_n: Optional[int] = None
    sobolev_s: float = 1.0
    out_dir: str = "out"
    prefix: str = "run"
    source: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.T >= 0:
            raise ConfigError("run.T must be non-negative", key="run.T")
        if self.cadence < 1:
            raise ConfigError("run.cadence must be >= 1", key="run.cadence")
        if self.galerkin_n is not None and self.galerkin_n < 1:
            raise ConfigError("run.galerkin_n must be >= 1", key="run.galerkin_n")
        if self.sobolev_s <= 0:
            raise ConfigError("run.sobolev_s must be positive", key="run.sobolev_s")

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, initial=replace(self.initial, seed=int(seed)))

    def with_N(self, N: int) -> "RunConfig":
        return replace(self, N=int(N))

    def with_out(self, out_dir: str) -> "RunConfig":
        return replace(self, out_dir=str(out_dir))

    def as_dict(self) -> Dict[str, Any]:
        p = self.params
        return {
            "grid": {"N": self.N},
            "params": {"a": p.a, "b": p.b, "c": p.c, "L": p.L, "Gamma": p.Gamma, "nu": p.nu, "xi": p.xi},
            "stepper": {"dt": self.stepper.dt, "scheme": self.stepper.scheme,
                        "dealias_rule": self.stepper.dealias_rule,
                        "cfl_guard": self.stepper.cfl_guard or 0.0},
            "initial": {"generator": self.initial.generator, "seed": self.initial.seed,
                        **{k: (list(v) if isinstance(v, tuple) else v)
                           for k, v in self.initial.kwargs().items()}},
            "run": {"T": self.T, "cadence": self.cadence, "galerkin_n": self.galerkin_n or 0,
                    "sobolev_s": self.sobolev_s},
            "output": {"dir": self.out_dir, "prefix": self.prefix},
        }


def _key_line(text: str, section: str, key: str) -> Optional[int]:
    """Best-effort 1-based line of ``key`` (table or dotted form)."""
    current = None
    table = re.compile(r"^\s*\[\s*([A-Za-z0-9_.\-]+)\s*\]")
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        m = table.match(line)
        if m:
            current = m.group(1)
            continue
        k = line.split("=", 1)[0].strip() if "=" in line else None
        if k is None:
            continue
        if (current == section and k == key) or (current is None and k == f"{section}.{key}"):
            return i
        if current is None and k == section:
            return i
    return None


def parse_config(text: str, path: Optional[str] = None) -> RunConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"syntax error: {exc}", line=int(m.group(1)) if m else None,
                          path=path) from None

    def err(msg, section, key=None):
        line = _key_line(text, section, key) if key else None
        name = f"{section}.{key}" if key else section
        return ConfigError(msg, key=name, line=line, path=path)

    for section, body in raw.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section {section!r}", key=section,
                              line=_key_line(text, section, "") or _section_line(text, section),
                              path=path)
        if not isinstance(body, dict):
            raise err(f"{section!r} must be a table", section, section)
        for key, value in body.items():
            if key not in _SCHEMA[section]:
                raise err(f"unknown key {section}.{key}", section, key)
            types = _SCHEMA[section][key]
            if isinstance(value, bool) or not isinstance(value, types):
                raise err(f"{section}.{key} has type {type(value).__name__}, expected "
                          + " or ".join(t.__name__ for t in types), section, key)
    for section, key in _REQUIRED:
        if key not in raw.get(section, {}):
            raise ConfigError(f"missing required key {section}.{key}", key=f"{section}.{key}",
                              path=path)

    get = lambda s, k, d: raw.get(s, {}).get(k, d)  # noqa: E731
    try:
        params = ModelParams(**{k: float(v) for k, v in raw.get("params", {}).items()})
    except ValueError as exc:
        raise ConfigError(f"invalid params: {exc}", key="params", path=path) from None
    scheme = get("stepper", "scheme", "imex_sbdf2")
    if scheme not in SCHEMES:
        raise err(f"unknown scheme {scheme!r}; choose from {SCHEMES}", "stepper", "scheme")
    rule = get("stepper", "dealias_rule", "two_thirds")
    if rule not in DEALIAS_RULES:
        raise err(f"unknown dealias_rule {rule!r}; choose from {DEALIAS_RULES}",
                  "stepper", "dealias_rule")
    guard = float(get("stepper", "cfl_guard", 0.0))
    try:
        stepper = StepperConfig(float(get("stepper", "dt", 0)), scheme, rule, guard or None)
    except ValueError as exc:
        raise err(str(exc), "stepper", "dt") from None
    gen = get("initial", "generator", "random_band_limited")
    if gen not in GENERATORS:
        raise err(f"unknown generator {gen!r}; choose from {GENERATORS}", "initial", "generator")
    seed = get("initial", "seed", 0)
    if seed < 0 or seed >= 2**64:
        raise err("initial.seed must be an unsigned 64-bit integer", "initial", "seed")
    winding = tuple(get("initial", "winding", [1, 0]))
    if len(winding) != 2 or not all(isinstance(w, int) for w in winding):
        raise err("initial.winding must be two integers", "initial", "winding")
    init = InitialSpec(gen, seed, float(get("initial", "kmax", 4.0)), float(get("initial", "q_h1", 1.0)),
                       float(get("initial", "u_l2", 1.0 if gen == "random_band_limited" else 0.0)),
                       float(get("initial", "slope", 1.0)), float(get("initial", "s", 0.5)), winding)
    N = get("grid", "N", 64)
    if N < 16 or N & (N - 1):
        raise err("grid.N must be a power of two >= 16", "grid", "N")
    gn = get("run", "galerkin_n", 0)
    try:
        return RunConfig(N, params, stepper, init, float(get("run", "T", 0.0)),
                         get("run", "cadence", 1), gn if gn else None,
                         float(get("run", "sobolev_s", 1.0)), get("output", "dir", "out"),
                         get("output", "prefix", "run"), source=path)
    except ConfigError as exc:
        section, key = exc.key.split(".")
        raise err(str(exc), section, key) from None


def _section_line(text: str, section: str) -> Optional[int]:
    for i, raw in enumerate(text.splitlines(), start=1):
        s = raw.split("#", 1)[0].strip()
        if s.startswith(f"[{section}") or s.startswith(f"{section}."):
            return i
    return None


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", path=str(p)) from None
    return parse_config(text, path=str(p))


def dump_config(cfg: RunConfig) -> str:
    """Serialize to TOML text accepted by :func:`parse_config`."""
    lines = []
    for section, body in cfg.as_dict().items():
        lines.append(f"[{section}]")
        for k, v in body.items():
            lines.append(f"{k} = {_toml_value(v)}")
        lines.append("")
    return "\n".join(lines)


def _toml_value(v) -> str:
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, float):
        return repr(v)
    return str(v)
