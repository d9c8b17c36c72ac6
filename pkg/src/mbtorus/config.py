"""Flat key=value run configuration.

Every knob lives in one namespace; section headers are allowed for
grouping but carry no meaning.  Unset knobs take the defaults below,
and the resolved values are echoed in each run manifest.
"""
from __future__ import annotations

import configparser
import dataclasses
import typing
from dataclasses import dataclass, field
from fractions import Fraction

from .diophantine import DomainError, classify_alpha, parse_alpha
from .spectral import ConfigurationError, GridSpec

EXPERIMENTS = ("classify-alpha", "simulate", "check-identities", "smoothing", "attractor",
               "stationary", "growth")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class RunConfig:
    # what to run
    experiment: str = "simulate"
    alpha: str = "1/2"            # "p/q" stays exact; decimals are read as exact decimals
    # discretisation
    N: int = 64
    M: int | None = None          # default next_fast_len(3N+1)
    dt: float | None = None       # default min(1e-3, 0.5/N); 2e-3 for the normal-form scheme
    t_end: float = 1.0
    scheme: str | None = None     # ifrk4 | etdrk4 | normal_form; default per experiment
    nf_theta: float = 1.0         # normal-form scheme: kernel cut |Omega| > nf_theta/dt
    nonlinear: bool = True
    blowup_threshold: float = 1e12
    # data
    s: float = 1.0
    data_s: float | None = None   # growth: data regularity (default s)
    amplitude: float = 1.0        # simulate/growth: H^s norm of each component (0 -> zero data)
    seed: int = 0
    seeds: list[int] | None = None  # default seed .. seed + n_seeds - 1
    n_seeds: int = 5
    # damping and forcing
    gamma: float = 0.0
    delta: float | None = None    # default gamma
    forcing: str = ""             # "" none, "seed", or modes "1:0.05, 2:0.01+0.02j"
    g_forcing: str = ""
    forcing_amplitude: float = 0.1  # H^1 norm of seeded forcing
    # sampling
    sample_interval: float = 0.1
    snapshot_stride: int | None = None  # steps between stored states (check-identities)
    norm_indices: list[float] = field(default_factory=lambda: [0.0, 1.0])
    # normal form / identities
    include_rho: bool = True
    identity_tol: float = 1e-4
    # smoothing
    s1_grid: list[float] = field(default_factory=lambda: [1.0, 1.25, 1.4, 1.5])
    t_fit_start: float = 1.0
    subtract_rho: bool = False
    expect_gap_min: float | None = None
    expect_gap_max: float | None = None
    # stationary / attractor
    mode: str = "trivial"         # attractor: trivial | absorbing
    tol: float = 1e-13
    max_iter: int = 500
    transient: float = 0.5
    data_norm: float = 1.0
    attractor_tol: float = 1e-6
    n_members: int = 20
    norm_min: float = 0.1
    norm_max: float = 10.0
    spread_max: float = 2.0
    horizon_tol: float = 0.05
    # diophantine
    q_max: int = 1_000_000
    resonance_K: int = 16
    near_eps: float = 0.01
    # output
    output_dir: str = "out"

    # --- derived ---------------------------------------------------------
    @property
    def resolved_delta(self) -> float:
        return self.gamma if self.delta is None else self.delta

    @property
    def resolved_scheme(self) -> str:
        if self.scheme is not None:
            return self.scheme
        return {"smoothing": "normal_form", "attractor": "etdrk4"}.get(self.experiment, "ifrk4")

    @property
    def resolved_dt(self) -> float:
        if self.dt is not None:
            return self.dt
        return 2e-3 if self.resolved_scheme == "normal_form" else min(1e-3, 0.5 / self.N)

    @property
    def resolved_seeds(self) -> list[int]:
        return list(self.seeds) if self.seeds is not None else list(range(self.seed, self.seed + self.n_seeds))

    def grid(self) -> GridSpec:
        try:
            return GridSpec(self.N, self.M)
        except ConfigurationError as exc:
            raise ConfigError("M" if self.M is not None else "N", str(exc)) from None

    def alpha_value(self):
        """Exact ``Fraction`` for ``"p/q"`` or decimal strings."""
        try:
            return parse_alpha(self.alpha)
        except DomainError:
            raise ConfigError("alpha", f"cannot parse {self.alpha!r}") from None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_HINTS = typing.get_type_hints(RunConfig)
FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


def _parse_scalar(kind, text: str):
    if kind is bool:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind is int:
        return int(text.replace("_", ""))
    if kind is float:
        if "/" in text:
            return float(Fraction(text))
        return float(text)
    return text


def parse_value(name: str, text: str):
    if name not in FIELDS:
        raise ConfigError(name, "unknown key")
    kind = _HINTS[name]
    text = text.strip()
    args = typing.get_args(kind)
    optional = type(None) in args
    if optional:
        if text.lower() in ("", "none", "default"):
            return None
        kind = next(a for a in args if a is not type(None))
    try:
        if typing.get_origin(kind) is list:
            (inner,) = typing.get_args(kind)
            parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
            return [_parse_scalar(inner, p.strip()) for p in parts]
        return _parse_scalar(kind, text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(name, f"cannot parse {text!r} ({exc})") from None


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
    alpha = cfg.alpha_value()
    try:
        classify_alpha(alpha, estimate_type=False)
    except DomainError as exc:
        raise ConfigError("alpha", str(exc)) from None
    if cfg.N < 1:
        raise ConfigError("N", "must be positive")
    grid = cfg.grid()
    if cfg.nonlinear and not grid.dealiased:
        raise ConfigError("M", f"M={grid.M} < 3N+1={3 * grid.N + 1}: quadratic products would alias")
    checks = [
        ("dt", cfg.dt is None or cfg.dt > 0, "must be positive"),
        ("t_end", cfg.t_end >= 0, "must be nonnegative"),
        ("gamma", cfg.gamma >= 0, "must be nonnegative"),
        ("delta", cfg.delta is None or cfg.delta >= 0, "must be nonnegative"),
        ("scheme", cfg.scheme in (None, "ifrk4", "etdrk4", "normal_form"), "must be ifrk4, etdrk4 or normal_form"),
        ("nf_theta", cfg.nf_theta > 0, "must be positive"),
        ("sample_interval", cfg.sample_interval > 0, "must be positive"),
        ("snapshot_stride", cfg.snapshot_stride is None or cfg.snapshot_stride >= 1, "must be >= 1"),
        ("n_seeds", cfg.n_seeds >= 1, "must be >= 1"),
        ("mode", cfg.mode in ("trivial", "absorbing"), "must be trivial or absorbing"),
        ("tol", cfg.tol > 0, "must be positive"),
        ("max_iter", cfg.max_iter >= 1, "must be >= 1"),
        ("n_members", cfg.n_members >= 1, "must be >= 1"),
        ("norm_min", 0 < cfg.norm_min <= cfg.norm_max, "need 0 < norm_min <= norm_max"),
        ("q_max", cfg.q_max >= 1, "must be >= 1"),
        ("resonance_K", cfg.resonance_K >= 1, "must be >= 1"),
        ("near_eps", cfg.near_eps > 0, "must be positive"),
        ("s1_grid", len(cfg.s1_grid) > 0, "must not be empty"),
    ]
    for name, ok, msg in checks:
        if not ok:
            raise ConfigError(name, msg)
    if cfg.experiment == "smoothing" and cfg.s <= 0.5:
        raise ConfigError("s", "smoothing needs s > 1/2")
    if cfg.experiment == "growth" and cfg.s < 1:
        raise ConfigError("s", "growth tracking needs s >= 1")
    if cfg.experiment in ("stationary", "attractor") and (cfg.gamma <= 0 or cfg.resolved_delta <= 0):
        raise ConfigError("gamma", f"{cfg.experiment} needs gamma, delta > 0")
    for name in ("forcing", "g_forcing"):
        parse_modes(getattr(cfg, name), name)
    return cfg


def parse_modes(text: str, name: str = "forcing"):
    """``""`` -> None, ``"seed"`` -> ``"seed"``, ``"1:0.05, 2:1e-2j"`` -> ``{1: 0.05, 2: 0.01j}``."""
    text = text.strip()
    if not text or text.lower() == "none":
        return None
    if text.lower() == "seed":
        return "seed"
    modes = {}
    for part in text.replace(";", ",").split(","):
        if not part.strip():
            continue
        try:
            k, c = part.split(":")
            k = int(k)
            modes[k] = complex(c.strip().replace(" ", ""))
        except ValueError:
            raise ConfigError(name, f"bad mode entry {part.strip()!r}; expected k:amplitude") from None
        if k == 0:
            raise ConfigError(name, "forcing must be mean-zero (no k=0 entry)")
        if k < 0:
            raise ConfigError(name, "give nonnegative k only; the conjugate mode is implied")
    return modes


def parse_config(text: str = "", overrides: typing.Iterable[str] = ()) -> RunConfig:
    """Parse ``key = value`` text (optionally grouped in ``[sections]``) plus ``key=value`` overrides."""
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",), strict=True)
    parser.optionxform = str
    body = text if text.lstrip().startswith("[") else "[run]\n" + text
    try:
        parser.read_string(body)
    except configparser.Error as exc:
        raise ConfigError("config", str(exc).splitlines()[0]) from None
    values: dict[str, typing.Any] = {}
    seen_in: dict[str, str] = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            if key in seen_in:
                raise ConfigError(key, f"set in both [{seen_in[key]}] and [{section}]")
            seen_in[key] = section
            values[key] = parse_value(key, raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(item, "override must look like key=value")
        key, raw = item.split("=", 1)
        values[key.strip()] = parse_value(key.strip(), raw)
    return validate(RunConfig(**values))
