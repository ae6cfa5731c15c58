"""Disorder ensembles, parameter sweeps and per-figure presets.

Every realization is an independent work item whose seed comes from
:func:`tchm.model.derive_realization_seed`; the same seeds are reused for
every axis value (common random numbers), and statistics are reduced in
realization-index order so results do not depend on the worker count.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .effective import _node_weights, hamiltonian_matrix, solve
from .metrics import (LOWER, UPPER, band_labels, nodal_participation_arrays,
                      polaritonic_participation_arrays, select_mps)
from .model import TWO_PI, SystemParams, derive_realization_seed, sample_disorder

AXES = ("delta", "j_over_g", "n_cavities", "emitters_per_cavity", "state_index")
OBSERVABLE_GROUPS = ("eigenvalues", "p_n", "p_p", "occupancies", "mps", "lowest")

_GROUP_MEMBERS = {
    "eigenvalues": ("re_energy", "im_energy"),
    "p_n": ("p_n_raw", "p_n_norm"),
    "p_p": ("p_p_raw", "p_p_norm"),
    "occupancies": ("photon", "emitter"),
    "mps": tuple(f"mps_{b}_{q}" for b in (LOWER, UPPER)
                 for q in ("index", "re_energy", "im_energy", "p_n_norm", "p_p_norm")),
    "lowest": ("lowest_re_energy", "lowest_im_energy", "lowest_p_n_norm", "lowest_p_p_norm"),
}
# observables carrying one value per eigenstate
PER_STATE = {"re_energy", "im_energy", "p_n_raw", "p_n_norm", "p_p_raw", "p_p_norm",
             "photon", "emitter"}

DEFAULT_JOBS_ENV = "TCHM_JOBS"


@dataclass(frozen=True)
class SweepSpec:
    """A sweep over one axis, optionally repeated for each value of a series axis."""

    base: SystemParams
    axis: str
    values: tuple
    realizations: int = 100
    master_seed: int = 0
    observables: tuple = ("eigenvalues", "p_n", "p_p")
    series_axis: str | None = None
    series_values: tuple = ()
    name: str = "custom"

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}, got {self.axis!r}")
        if isinstance(self.series_axis, list):
            object.__setattr__(self, "series_axis", tuple(self.series_axis))
        for axis in self.series_axes:
            if axis not in AXES[:-1] or axis == self.axis:
                raise ValueError(f"series axes must differ from the sweep axis and be one of {AXES[:-1]}")
        if self.series_axis is not None and not self.series_values:
            raise ValueError("series_axis needs series_values")
        if isinstance(self.series_axis, tuple):
            points = tuple(tuple(v) for v in self.series_values)
            if any(len(v) != len(self.series_axis) for v in points):
                raise ValueError("each series value needs one entry per series axis")
            object.__setattr__(self, "series_values", points)
        if not self.values:
            raise ValueError("sweep values must be non-empty")
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        for obs in self.observables:
            if obs not in OBSERVABLE_GROUPS:
                raise ValueError(f"unknown observable {obs!r}; valid: {OBSERVABLE_GROUPS}")
        object.__setattr__(self, "values", tuple(self.values))
        if not isinstance(self.series_axis, tuple):
            object.__setattr__(self, "series_values", tuple(self.series_values))
        object.__setattr__(self, "observables", tuple(self.observables))

    @property
    def series_axes(self) -> tuple:
        if self.series_axis is None:
            return ()
        return self.series_axis if isinstance(self.series_axis, tuple) else (self.series_axis,)

    def series(self) -> tuple:
        return self.series_values if self.series_axis else (None,)

    def series_point(self, value) -> tuple:
        """The series value as a tuple aligned with :attr:`series_axes`."""
        if self.series_axis is None:
            return ()
        return tuple(value) if isinstance(self.series_axis, tuple) else (value,)

    def with_(self, **changes) -> "SweepSpec":
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        data.update(changes)
        return SweepSpec(**data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["values"] = list(self.values)
        d["series_values"] = [list(v) if isinstance(v, tuple) else v for v in self.series_values]
        if isinstance(self.series_axis, tuple):
            d["series_axis"] = list(self.series_axis)
        d["observables"] = list(self.observables)
        return d

    @classmethod
    def from_dict(cls, d) -> "SweepSpec":
        d = dict(d)
        d["base"] = SystemParams(**d["base"])
        for key in ("values", "series_values", "observables"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=float).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True, eq=False)
class Stat:
    mean: np.ndarray
    std: np.ndarray
    count: int


@dataclass(eq=False)
class SweepResult:
    """Mean and population standard deviation per (series, axis value, observable)."""

    spec: SweepSpec
    stats: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def get(self, observable, axis_value, series_value=None) -> Stat:
        return self.stats[(series_value, axis_value, observable)]

    def curve(self, observable, series_value=None, index=None):
        """``(values, mean, std)`` along the axis; ``index`` picks one state."""
        means, stds = [], []
        for v in self.spec.values:
            s = self.get(observable, v, series_value)
            m, e = s.mean, s.std
            if index is not None:
                m, e = m[index], e[index]
            means.append(m)
            stds.append(e)
        return np.array(self.spec.values), np.array(means), np.array(stds)

    def observable_names(self) -> list[str]:
        seen = []
        for (_, _, obs) in self.stats:
            if obs not in seen:
                seen.append(obs)
        return seen


def _params_for(spec: SweepSpec, series_value, axis_value) -> SystemParams:
    p = spec.base
    pairs = list(zip(spec.series_axes, spec.series_point(series_value)))
    pairs.append((spec.axis, axis_value))
    for axis, value in pairs:
        if axis == "state_index":
            continue
        if axis == "j_over_g":
            p = p.with_(j_hop=float(value) * p.g)
        elif axis == "delta":
            p = p.with_(delta=float(value))
        else:
            p = p.with_(**{axis: int(value)})
    return p


def realization_observables(params: SystemParams, seed: int, groups) -> dict:
    """All requested observables for one disorder draw."""
    n, m = params.n_cavities, params.emitters_per_cavity
    r = sample_disorder(params, seed)
    w, v = solve(hamiltonian_matrix(params, r.omega_e), seed=seed)
    photon, emitter = _node_weights(v, n, m)
    p_n_raw, p_n_norm = nodal_participation_arrays(photon, emitter)
    p_p_raw, p_p_norm = polaritonic_participation_arrays(photon, emitter)
    out = {}
    if "eigenvalues" in groups:
        out["re_energy"] = w.real.copy()
        out["im_energy"] = w.imag.copy()
    if "p_n" in groups:
        out["p_n_raw"], out["p_n_norm"] = p_n_raw, p_n_norm
    if "p_p" in groups:
        out["p_p_raw"], out["p_p_norm"] = p_p_raw, p_p_norm
    if "occupancies" in groups:
        out["photon"], out["emitter"] = photon.T.copy(), emitter.T.copy()
    if "mps" in groups:
        labels = np.array(band_labels(n, m))
        for band in (LOWER, UPPER):
            mask = labels == band
            if not mask.any():
                continue
            i = select_mps(p_p_raw, w, mask)
            out[f"mps_{band}_index"] = np.float64(i)
            out[f"mps_{band}_re_energy"] = np.float64(w[i].real)
            out[f"mps_{band}_im_energy"] = np.float64(w[i].imag)
            out[f"mps_{band}_p_n_norm"] = np.float64(p_n_norm[i])
            out[f"mps_{band}_p_p_norm"] = np.float64(p_p_norm[i])
    if "lowest" in groups:
        out["lowest_re_energy"] = np.float64(w[0].real)
        out["lowest_im_energy"] = np.float64(w[0].imag)
        out["lowest_p_n_norm"] = np.float64(p_n_norm[0])
        out["lowest_p_p_norm"] = np.float64(p_p_norm[0])
    return out


def _work(item):
    params, seed, groups = item
    return realization_observables(params, seed, groups)


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get(DEFAULT_JOBS_ENV, "1")))
    except ValueError:
        return 1


def _reduce(samples) -> Stat:
    # fixed reduction order: stacked by realization index
    arr = np.stack(samples, axis=0)
    mean, std = arr.mean(axis=0), arr.std(axis=0)
    # identical samples (R = 1, or no disorder): exact mean and zero spread
    same = np.all(arr == arr[0], axis=0)
    mean = np.where(same, arr[0], mean)
    std = np.where(same, 0.0, std)
    return Stat(mean, std, arr.shape[0])


def run_sweep(spec: SweepSpec, jobs: int | None = None, progress=None) -> SweepResult:
    """Run every (series, axis value, realization) and aggregate the observables."""
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    seeds = [derive_realization_seed(spec.master_seed, i) for i in range(spec.realizations)]
    groups = frozenset(spec.observables)

    keys, items = [], []
    for s in spec.series():
        param_values = (None,) if spec.axis == "state_index" else spec.values
        for v in param_values:
            params = _params_for(spec, s, v)
            if spec.axis == "state_index":
                bad = [i for i in spec.values if not 0 <= int(i) < params.dimension]
                if bad:
                    raise ValueError(f"state indices {bad} out of range for dimension {params.dimension}")
            keys.append((s, v))
            items.extend((params, seed, groups) for seed in seeds)

    if jobs == 1:
        results = [_work(it) for it in items]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_work, items, chunksize=max(1, len(items) // (4 * jobs))))

    result = SweepResult(spec)
    r_count = spec.realizations
    for k, (s, v) in enumerate(keys):
        chunk = results[k * r_count:(k + 1) * r_count]
        for name in chunk[0]:
            stat = _reduce([c[name] for c in chunk])
            if spec.axis == "state_index":
                for i in spec.values:
                    if name in PER_STATE:
                        result.stats[(s, i, name)] = Stat(stat.mean[int(i)], stat.std[int(i)],
                                                          stat.count)
                    else:
                        result.stats[(s, i, name)] = stat
            else:
                result.stats[(s, v, name)] = stat
        if progress is not None:
            progress(k + 1, len(keys))

    result.provenance = {
        "master_seed": spec.master_seed,
        "realizations": spec.realizations,
        "spec_sha256": spec.digest(),
        "tchm_version": __version__,
        "numpy_version": np.__version__,
        "std": "population (ddof=0)",
    }
    return result


# --------------------------------------------------------------------------
# presets

def _delta_grid(params, fractions):
    return tuple(float(f) * params.collective_g for f in fractions)


DELTA_FRACTIONS = (0.0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0)
J_OVER_G_SERIES = (0.1, 1.0, 10.0)
PRESETS = ("fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "figA1", "figA4", "figA5")


def figure_preset(name: str, realizations: int = 100, master_seed: int = 0,
                  delta_fractions=DELTA_FRACTIONS) -> SweepSpec:
    """Sweep specification reproducing one figure's data.

    ``delta_fractions`` sets disorder grids in units of ``g sqrt(M)``.
    """
    defaults = SystemParams.standard
    common = dict(realizations=realizations, master_seed=master_seed, name=name)
    if name == "fig3":
        base = defaults(5, 3, j_over_g=0.1)
        return SweepSpec(base, "delta", _delta_grid(base, delta_fractions),
                         observables=("eigenvalues", "p_n", "p_p"), **common)
    if name == "fig4":
        base = defaults(5, 3)
        j_values = tuple(float(x) for x in np.round(np.logspace(-1, 1, 9), 12))
        return SweepSpec(base, "j_over_g", j_values, observables=("lowest",),
                         series_axis="delta",
                         series_values=_delta_grid(base, (0.0, 0.25, 1.0)), **common)
    if name == "fig5":
        base = defaults(5, 3)
        return SweepSpec(base, "delta", _delta_grid(base, delta_fractions),
                         observables=("mps",), series_axis="j_over_g",
                         series_values=J_OVER_G_SERIES, **common)
    if name == "fig6":
        base = defaults(5, 3, delta_over_g_sqrt_m=0.25)
        return SweepSpec(base, "n_cavities", tuple(range(2, 22)), observables=("mps",),
                         series_axis="j_over_g", series_values=J_OVER_G_SERIES, **common)
    if name == "fig7":
        # disorder fixed at g sqrt(M_min), M_min = 3
        base = defaults(5, 3, delta_over_g_sqrt_m=1.0)
        return SweepSpec(base, "emitters_per_cavity", tuple(range(3, 13)), observables=("mps",),
                         series_axis="j_over_g", series_values=J_OVER_G_SERIES, **common)
    if name == "fig8":
        base = defaults(65, 3)
        deltas = _delta_grid(base, (0.0, 0.25, 0.5, 1.0))
        return SweepSpec(base, "state_index", tuple(range(65)), observables=("p_n", "p_p"),
                         series_axis=("j_over_g", "delta"),
                         series_values=tuple((j, d) for j in J_OVER_G_SERIES for d in deltas),
                         **common)
    if name == "figA1":
        base = SystemParams(50, 1, omega_c=4.0, g=0.2, j_hop=1.0, kappa=0.0, gamma=0.0)
        return SweepSpec(base, "state_index", tuple(range(base.dimension)),
                         observables=("eigenvalues", "occupancies"),
                         realizations=1, master_seed=master_seed, name=name)
    if name == "figA4":
        base = defaults(5, 3)
        return SweepSpec(base, "delta", _delta_grid(base, delta_fractions),
                         observables=("eigenvalues",), series_axis="j_over_g",
                         series_values=J_OVER_G_SERIES, **common)
    if name == "figA5":
        base = defaults(5, 3)
        return SweepSpec(base, "delta", _delta_grid(base, delta_fractions),
                         observables=("p_n", "p_p"), series_axis="j_over_g",
                         series_values=J_OVER_G_SERIES, **common)
    raise ValueError(f"unknown preset {name!r}; valid presets: {', '.join(PRESETS)}")


# --------------------------------------------------------------------------
# output

def result_rows(result: SweepResult, observable: str):
    """Flat rows ``(series, axis_value, state, node, mean, std, n)`` for one observable."""
    rows = []
    by_state = result.spec.axis == "state_index"
    for (s, v, obs), stat in result.stats.items():
        if obs != observable:
            continue
        mean = np.atleast_1d(stat.mean)
        std = np.atleast_1d(stat.std)
        if mean.ndim == 1 and np.ndim(stat.mean) == 0:
            state = int(v) if by_state and observable in PER_STATE else -1
            rows.append((s, v, state, -1, float(mean[0]), float(std[0]), stat.count))
        elif mean.ndim == 1 and by_state:
            # one state selected by the state_index axis, nodes along the array
            for j in range(mean.shape[0]):
                rows.append((s, v, int(v), j, float(mean[j]), float(std[j]), stat.count))
        elif mean.ndim == 1:
            for i in range(mean.shape[0]):
                rows.append((s, v, i, -1, float(mean[i]), float(std[i]), stat.count))
        else:
            for i in range(mean.shape[0]):
                for j in range(mean.shape[1]):
                    rows.append((s, v, i, j, float(mean[i, j]), float(std[i, j]), stat.count))
    return rows


def axis_in_ghz(axis: str) -> bool:
    return axis == "delta"


def describe_value(axis, value):
    if axis == "delta" and value is not None:
        return value / TWO_PI
    return value


def manifest(result: SweepResult) -> dict:
    spec = result.spec
    return {
        "spec": spec.to_dict(),
        "provenance": result.provenance,
        "observables": result.observable_names(),
        "units": {"energies": "rad/ns", "delta": "rad/ns"},
        "delta_over_g_sqrt_m": (
            [v / spec.base.collective_g for v in spec.values]
            if spec.axis == "delta" and spec.base.collective_g else None),
        "notes": "std is the population standard deviation over realizations",
        "realization_seeds_head": [derive_realization_seed(spec.master_seed, i)
                                   for i in range(min(5, spec.realizations))],
        "finite": bool(all(np.all(np.isfinite(st.mean)) for st in result.stats.values())),
        "pi": math.pi,
    }
