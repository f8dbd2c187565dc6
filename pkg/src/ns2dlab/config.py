"""Experiment configuration: JSON schema checks with field paths, and hashing.

A configuration is a JSON object::

    {"N": 6, "nu": 0.3, "dt": 0.01, "T": 10, "seed": 1,
     "scheme": "exp-euler-maruyama",
     "modes": [{"k": [1, 0], "q": 1.0}, ...],
     "control": {...}, "gradient": {...}, "coupling": {...}, "elliptic": {...}}

The forced modes may also be given as ``{"noise": {"modes": [...]}}``.
Errors name the offending field, e.g. ``noise.modes[2]``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

from .integrator import SCHEMES, IntegratorConfig, NoiseModel
from .spectral import ConfigurationError, SpectralGrid, get_grid


class ConfigError(ConfigurationError):
    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


CONTROL_DEFAULTS = {"betas": [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8], "steps": 8, "replicas": 200,
                    "interval": 1.0, "xi": [1, 0]}
GRADIENT_DEFAULTS = {"n_max": 6, "replicas": 100, "beta": 1e-4, "fd_eps": 1e-3, "xi": [1, 0]}
COUPLING_DEFAULTS = {"replicas": 200, "cap": 2000, "T": [1.0, 2.0, 5.0], "eps": [1.0, 0.1, 0.01]}
ELLIPTIC_DEFAULTS = {"cut": 1, "xi": [1, 0]}


@dataclass
class ExperimentConfig:
    N: int
    nu: float
    dt: float
    T: float
    seed: int
    scheme: str
    noise: NoiseModel
    shape: str = "box"
    control: dict = field(default_factory=lambda: dict(CONTROL_DEFAULTS))
    gradient: dict = field(default_factory=lambda: dict(GRADIENT_DEFAULTS))
    coupling: dict = field(default_factory=lambda: dict(COUPLING_DEFAULTS))
    elliptic: dict = field(default_factory=lambda: dict(ELLIPTIC_DEFAULTS))
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def grid(self) -> SpectralGrid:
        return get_grid(self.N, self.shape)

    @property
    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(self.nu, self.dt, self.scheme, self.seed)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def config_hash(raw: dict) -> str:
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _num(d: dict, key: str, path: str, *, positive=False, nonneg=False, integer=False, default=None):
    if key not in d:
        if default is not None:
            return default
        raise ConfigError(f"{path}{key}", "missing")
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}{key}", f"expected a number, got {v!r}")
    if integer and (not float(v).is_integer()):
        raise ConfigError(f"{path}{key}", f"expected an integer, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(f"{path}{key}", "must be finite")
    if positive and not v > 0:
        raise ConfigError(f"{path}{key}", "must be positive")
    if nonneg and v < 0:
        raise ConfigError(f"{path}{key}", "must be nonnegative")
    return int(v) if integer else float(v)


def _mode(v, path: str, grid: SpectralGrid | None = None):
    if (not isinstance(v, (list, tuple)) or len(v) != 2
            or not all(isinstance(c, int) and not isinstance(c, bool) for c in v)):
        raise ConfigError(path, f"expected an integer pair [k1, k2], got {v!r}")
    k = (int(v[0]), int(v[1]))
    if k == (0, 0):
        raise ConfigError(path, "the origin is not a valid mode")
    if grid is not None and not grid.contains(k):
        raise ConfigError(path, f"mode {list(k)} outside truncation N={grid.N}")
    return k


def _block(d: dict, name: str, defaults: dict) -> dict:
    blk = d.get(name, {})
    if not isinstance(blk, dict):
        raise ConfigError(name, "expected an object")
    unknown = set(blk) - set(defaults)
    if unknown:
        raise ConfigError(f"{name}.{sorted(unknown)[0]}", "unknown field")
    out = dict(defaults)
    out.update(blk)
    return out


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON configuration; raises ``ConfigError`` with a field path."""
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("<root>", f"invalid JSON: {e}") from None
    if not isinstance(d, dict):
        raise ConfigError("<root>", "expected a JSON object")
    return config_from_dict(d)


def config_from_dict(d: dict) -> ExperimentConfig:
    N = _num(d, "N", "", integer=True, positive=True)
    shape = d.get("shape", "box")
    if shape not in ("box", "disc"):
        raise ConfigError("shape", f"expected 'box' or 'disc', got {shape!r}")
    grid = get_grid(N, shape)
    nu = _num(d, "nu", "", nonneg=True)
    dt = _num(d, "dt", "", positive=True)
    T = _num(d, "T", "", positive=True)
    seed = _num(d, "seed", "", integer=True, nonneg=True)
    scheme = d.get("scheme", "exp-euler-maruyama")
    if scheme not in SCHEMES:
        raise ConfigError("scheme", f"expected one of {list(SCHEMES)}, got {scheme!r}")

    if "noise" in d:
        if "modes" in d:
            raise ConfigError("modes", "give the forced modes either at top level or under noise, not both")
        if not isinstance(d["noise"], dict):
            raise ConfigError("noise", "expected an object")
        entries = d["noise"].get("modes", [])
    else:
        entries = d.get("modes", [])
    if not isinstance(entries, list):
        raise ConfigError("noise.modes", "expected a list")
    modes, amps, seen = [], [], {}
    for n, e in enumerate(entries):
        path = f"noise.modes[{n}]"
        if not isinstance(e, dict):
            raise ConfigError(path, "expected an object {k: [k1, k2], q: amplitude}")
        k = _mode(e.get("k"), path, grid)
        q = _num(e, "q", path + ".", positive=True)
        if k in seen:
            raise ConfigError(path, f"duplicate mode {list(k)} (also noise.modes[{seen[k]}])")
        seen[k] = n
        modes.append(k)
        amps.append(q)
    noise = NoiseModel(tuple(modes), tuple(amps))
    try:
        IntegratorConfig(nu, dt, scheme, seed).validate(noise)
    except ConfigurationError as e:
        raise ConfigError("nu" if nu == 0 else "scheme", str(e)) from None

    control = _block(d, "control", CONTROL_DEFAULTS)
    betas = control["betas"]
    if not isinstance(betas, list) or not betas:
        raise ConfigError("control.betas", "expected a nonempty list")
    for i, b in enumerate(betas):
        if isinstance(b, bool) or not isinstance(b, (int, float)) or not b > 0:
            raise ConfigError(f"control.betas[{i}]", "must be a positive number")
    _num(control, "steps", "control.", integer=True, positive=True)
    _num(control, "replicas", "control.", integer=True, positive=True)
    interval = _num(control, "interval", "control.", positive=True)
    half = interval / 2 / dt
    if abs(half - round(half)) > 1e-9:
        raise ConfigError("control.interval", "half an interval must be a whole number of steps")
    _mode(control["xi"], "control.xi", grid)

    gradient = _block(d, "gradient", GRADIENT_DEFAULTS)
    _num(gradient, "n_max", "gradient.", integer=True, positive=True)
    _num(gradient, "replicas", "gradient.", integer=True, positive=True)
    _num(gradient, "beta", "gradient.", positive=True)
    _num(gradient, "fd_eps", "gradient.", positive=True)
    _mode(gradient["xi"], "gradient.xi", grid)

    coupling = _block(d, "coupling", COUPLING_DEFAULTS)
    _num(coupling, "replicas", "coupling.", integer=True, positive=True)
    _num(coupling, "cap", "coupling.", integer=True, positive=True)
    for key in ("T", "eps"):
        vals = coupling[key]
        if not isinstance(vals, list) or not vals:
            raise ConfigError(f"coupling.{key}", "expected a nonempty list")
        for i, v in enumerate(vals):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
                raise ConfigError(f"coupling.{key}[{i}]", "must be a positive number")

    elliptic = _block(d, "elliptic", ELLIPTIC_DEFAULTS)
    cut = _num(elliptic, "cut", "elliptic.", integer=True, positive=True)
    _mode(elliptic["xi"], "elliptic.xi", grid)
    if "elliptic" in d:
        forced = set(modes)
        for k in grid.modes:
            k = (int(k[0]), int(k[1]))
            if max(abs(k[0]), abs(k[1])) <= cut and k not in forced:
                raise ConfigError("elliptic.cut", f"cut {cut} includes the unforced mode {list(k)}")

    known = {"N", "shape", "nu", "dt", "T", "seed", "scheme", "modes", "noise",
             "control", "gradient", "coupling", "elliptic"}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown field")
    return ExperimentConfig(N, nu, dt, T, seed, scheme, noise, shape,
                            control, gradient, coupling, elliptic, raw=d)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as f:
        return parse_config(f.read())
