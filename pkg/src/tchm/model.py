"""System parameters, disorder sampling and single-excitation indexing.

All rates are stored as angular frequencies in rad/ns.  Configuration files
quote rates the usual way, as ``x`` GHz meaning ``rate / 2pi = x GHz``; the
conversion happens only at the configuration boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError

TWO_PI = 2.0 * math.pi

#: Default rates as quoted in GHz (rate / 2pi).
DEFAULT_G_GHZ = 5.0
DEFAULT_KAPPA_GHZ = 10.0
DEFAULT_GAMMA_GHZ = 1.0 / 5.8

BOUNDARIES = ("open", "periodic")
DELTA_MODES = ("absolute_ghz", "units_of_g_sqrt_m")

_MASK64 = (1 << 64) - 1


def ghz_to_angular(x: float) -> float:
    return TWO_PI * float(x)


def angular_to_ghz(x: float) -> float:
    return float(x) / TWO_PI


@dataclass(frozen=True)
class SystemParams:
    """Geometry and rates of a Tavis-Cummings-Hubbard cavity array.

    Attributes
    ----------
    n_cavities : int
        Number of cavities ``N`` in the chain.
    emitters_per_cavity : int
        Number of emitters ``M`` in every cavity.
    omega_c : float
        Cavity resonance (rad/ns).
    g : float
        Emitter-cavity coupling (rad/ns).
    j_hop : float
        Cavity-cavity hopping ``J`` (rad/ns).
    kappa, gamma : float
        Cavity loss and emitter decay rates (rad/ns).
    delta : float
        Full width ``2 sigma`` of the Gaussian emitter-frequency disorder (rad/ns).
    boundary : {"open", "periodic"}
    """

    n_cavities: int
    emitters_per_cavity: int
    omega_c: float = 0.0
    g: float = TWO_PI * DEFAULT_G_GHZ
    j_hop: float = 0.0
    kappa: float = TWO_PI * DEFAULT_KAPPA_GHZ
    gamma: float = TWO_PI * DEFAULT_GAMMA_GHZ
    delta: float = 0.0
    boundary: str = "open"

    def __post_init__(self):
        if int(self.n_cavities) != self.n_cavities or self.n_cavities < 1:
            raise ValueError(f"n_cavities must be a positive integer, got {self.n_cavities}")
        if int(self.emitters_per_cavity) != self.emitters_per_cavity or self.emitters_per_cavity < 0:
            raise ValueError(
                f"emitters_per_cavity must be a non-negative integer, got {self.emitters_per_cavity}"
            )
        object.__setattr__(self, "n_cavities", int(self.n_cavities))
        object.__setattr__(self, "emitters_per_cavity", int(self.emitters_per_cavity))
        for name in ("g", "kappa", "gamma", "delta"):
            value = float(getattr(self, name))
            if not value >= 0.0:
                raise ValueError(f"{name} must be >= 0, got {value}")
            object.__setattr__(self, name, value)
        for name in ("omega_c", "j_hop"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")

    @classmethod
    def standard(cls, n_cavities, emitters_per_cavity, j_over_g=0.1,
                 delta_over_g_sqrt_m=0.0, boundary="open"):
        """Rates of the color-center scenario: g/2pi = 5, kappa/2pi = 10, gamma/2pi = 1/5.8 GHz."""
        g = TWO_PI * DEFAULT_G_GHZ
        delta = delta_over_g_sqrt_m * g * math.sqrt(emitters_per_cavity)
        return cls(n_cavities, emitters_per_cavity, j_hop=j_over_g * g, delta=delta,
                   boundary=boundary)

    @property
    def dimension(self) -> int:
        """Size of the single-excitation sector, ``N (M + 1)``."""
        return self.n_cavities * (self.emitters_per_cavity + 1)

    @property
    def n_emitters(self) -> int:
        return self.n_cavities * self.emitters_per_cavity

    @property
    def j_over_g(self) -> float:
        return self.j_hop / self.g if self.g else math.inf

    @property
    def collective_g(self) -> float:
        return self.g * math.sqrt(self.emitters_per_cavity)

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class Realization:
    """One disorder draw: emitter frequencies ``omega_e[n, m]`` in rad/ns."""

    params: SystemParams
    omega_e: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        arr = np.array(self.omega_e, dtype=float).reshape(
            self.params.n_cavities, self.params.emitters_per_cavity
        )
        arr.setflags(write=False)
        object.__setattr__(self, "omega_e", arr)

    @classmethod
    def resonant(cls, params: SystemParams) -> "Realization":
        """Every emitter exactly at the cavity frequency."""
        shape = (params.n_cavities, params.emitters_per_cavity)
        return cls(params, np.full(shape, params.omega_c), seed=None)


@dataclass(frozen=True)
class SingleExcitationBasis:
    """Index map of the one-excitation sector.

    Cavity ``n`` sits at index ``n``; emitter ``(n, m)`` at ``N + n M + m``.
    """

    n_cavities: int
    emitters_per_cavity: int
    dimension: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "dimension", self.n_cavities * (self.emitters_per_cavity + 1))

    def index_of_cavity(self, n: int) -> int:
        if not 0 <= n < self.n_cavities:
            raise IndexError(f"cavity {n} out of range")
        return n

    def index_of_emitter(self, n: int, m: int) -> int:
        if not (0 <= n < self.n_cavities and 0 <= m < self.emitters_per_cavity):
            raise IndexError(f"emitter ({n}, {m}) out of range")
        return self.n_cavities + n * self.emitters_per_cavity + m

    def element_of(self, index: int):
        """Inverse lookup: ``("cavity", n)`` or ``("emitter", n, m)``."""
        if not 0 <= index < self.dimension:
            raise IndexError(f"basis index {index} out of range")
        if index < self.n_cavities:
            return ("cavity", index)
        n, m = divmod(index - self.n_cavities, self.emitters_per_cavity)
        return ("emitter", n, m)

    def cavity_slice(self) -> slice:
        return slice(0, self.n_cavities)

    def emitter_slice(self) -> slice:
        return slice(self.n_cavities, self.dimension)

    def labels(self):
        out = [f"cav_{n}" for n in range(self.n_cavities)]
        out += [f"em_{n}_{m}" for n in range(self.n_cavities)
                for m in range(self.emitters_per_cavity)]
        return out


def build_basis(params: SystemParams) -> SingleExcitationBasis:
    return SingleExcitationBasis(params.n_cavities, params.emitters_per_cavity)


def sample_disorder(params: SystemParams, seed: int) -> Realization:
    """Draw every emitter frequency from a Gaussian of mean ``omega_c``, std ``delta / 2``.

    The draw is a pure function of ``(params, seed)``.
    """
    shape = (params.n_cavities, params.emitters_per_cavity)
    if params.delta == 0.0:
        return Realization(params, np.full(shape, params.omega_c), seed=seed)
    rng = np.random.Generator(np.random.PCG64(seed))
    omega_e = rng.normal(params.omega_c, params.delta / 2.0, size=shape)
    return Realization(params, omega_e, seed=seed)


def _mix64(z: int) -> int:
    # splitmix64 finalizer; a bijection on 64-bit integers
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


def derive_realization_seed(master_seed: int, realization_index: int) -> int:
    """Seed of realization ``i`` within a sweep.

    ``i -> mix(mix(master) + i * phi)`` is injective in ``i`` for a fixed
    master seed (odd multiplier, bijective mixer), so seeds never collide
    within a sweep and can be computed in any order.
    """
    if realization_index < 0:
        raise ValueError("realization_index must be >= 0")
    base = _mix64(int(master_seed) & _MASK64)
    return _mix64((base + int(realization_index) * 0x9E3779B97F4A7C15) & _MASK64)


# --------------------------------------------------------------------------
# configuration files

CONFIG_KEYS = (
    "n_cavities", "emitters_per_cavity", "g_ghz", "j_over_g", "kappa_ghz",
    "gamma_ghz", "delta_mode", "delta_value", "boundary", "seed", "omega_c_ghz",
)


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams
    seed: int | None = None


def _convert(key, raw, lineno):
    try:
        if key in ("n_cavities", "emitters_per_cavity", "seed"):
            value = int(raw)
            if str(value) != raw.lstrip("+"):
                raise ValueError
            return value
        if key in ("delta_mode", "boundary"):
            return raw
        return float(raw)
    except ValueError:
        raise ConfigError(f"cannot parse value {raw!r}", key=key, line=lineno) from None


def parse_config(text: str) -> RunConfig:
    """Parse flat ``key = value`` text (``#`` starts a comment)."""
    values = {}
    lines = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, raw = (part.strip() for part in line.split("=", 1))
        raw = raw.strip("\"'")
        if key not in CONFIG_KEYS:
            raise ConfigError("unknown key", key=key, line=lineno)
        if key in values:
            raise ConfigError("duplicate key", key=key, line=lineno)
        values[key] = _convert(key, raw, lineno)
        lines[key] = lineno

    for key in ("n_cavities", "emitters_per_cavity"):
        if key not in values:
            raise ConfigError("missing required key", key=key)

    mode = values.get("delta_mode", "absolute_ghz")
    if mode not in DELTA_MODES:
        raise ConfigError(f"delta_mode must be one of {DELTA_MODES}", key="delta_mode",
                          line=lines.get("delta_mode"))
    boundary = values.get("boundary", "open")
    if boundary not in BOUNDARIES:
        raise ConfigError(f"boundary must be one of {BOUNDARIES}", key="boundary",
                          line=lines.get("boundary"))

    g = ghz_to_angular(values.get("g_ghz", DEFAULT_G_GHZ))
    m = values["emitters_per_cavity"]
    delta_value = values.get("delta_value", 0.0)
    if mode == "absolute_ghz":
        delta = ghz_to_angular(delta_value)
    else:
        delta = delta_value * g * math.sqrt(m)
    try:
        params = SystemParams(
            n_cavities=values["n_cavities"],
            emitters_per_cavity=m,
            omega_c=ghz_to_angular(values.get("omega_c_ghz", 0.0)),
            g=g,
            j_hop=values.get("j_over_g", 0.0) * g,
            kappa=ghz_to_angular(values.get("kappa_ghz", DEFAULT_KAPPA_GHZ)),
            gamma=ghz_to_angular(values.get("gamma_ghz", DEFAULT_GAMMA_GHZ)),
            delta=delta,
            boundary=boundary,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(params, values.get("seed"))


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())


def config_values(params: SystemParams, delta_mode="absolute_ghz") -> dict:
    """Configuration-side values (GHz, ratios) of ``params``."""
    if delta_mode == "absolute_ghz":
        delta_value = angular_to_ghz(params.delta)
    elif delta_mode == "units_of_g_sqrt_m":
        scale = params.collective_g
        if scale == 0.0:
            raise ValueError("delta in units of g sqrt(M) needs g > 0 and M > 0")
        delta_value = params.delta / scale
    else:
        raise ValueError(f"unknown delta_mode {delta_mode!r}")
    if params.g == 0.0 and params.j_hop != 0.0:
        raise ValueError("j_over_g is undefined for g = 0")
    return {
        "n_cavities": params.n_cavities,
        "emitters_per_cavity": params.emitters_per_cavity,
        "omega_c_ghz": angular_to_ghz(params.omega_c),
        "g_ghz": angular_to_ghz(params.g),
        "j_over_g": params.j_hop / params.g if params.g else 0.0,
        "kappa_ghz": angular_to_ghz(params.kappa),
        "gamma_ghz": angular_to_ghz(params.gamma),
        "delta_mode": delta_mode,
        "delta_value": delta_value,
        "boundary": params.boundary,
    }


def format_config(params: SystemParams, seed=None, delta_mode="absolute_ghz") -> str:
    lines = []
    for key, value in config_values(params, delta_mode).items():
        if isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    if seed is not None:
        lines.append(f"seed = {int(seed)}")
    return "\n".join(lines) + "\n"
