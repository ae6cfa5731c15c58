"""Nodal and polaritonic participation ratios, band labels and MPS selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .effective import EigenState
from .model import SystemParams

LOWER, SUBRADIANT, UPPER = "lower", "subradiant", "upper"
BANDS = (LOWER, SUBRADIANT, UPPER)

# p_p_raw values closer than this count as a tie when picking the MPS
_TIE_ATOL = 1e-10


@dataclass(frozen=True)
class ParticipationReport:
    p_n_raw: float
    p_n_norm: float
    p_p_raw: float
    p_p_norm: float
    band: str | None = None


def nodal_participation_arrays(photon, emitter):
    """Raw and normalized nodal participation ratio.

    ``photon`` and ``emitter`` have nodes along axis 0; any trailing axes
    (states, realizations) are carried through.
    """
    photon = np.asarray(photon, dtype=float)
    w = photon + np.asarray(emitter, dtype=float)
    raw = 1.0 / np.sum(w * w, axis=0)
    n = photon.shape[0]
    norm = (raw - 1.0) / (n - 1) if n > 1 else np.zeros_like(raw)
    return raw, norm


def polaritonic_participation_arrays(photon, emitter):
    ph = np.sum(np.asarray(photon, dtype=float), axis=0)
    em = np.sum(np.asarray(emitter, dtype=float), axis=0)
    raw = 1.0 / (ph * ph + em * em)
    return raw, raw - 1.0


def nodal_participation(state: EigenState):
    raw, norm = nodal_participation_arrays(state.photon, state.emitter)
    return float(raw), float(norm)


def polaritonic_participation(state: EigenState):
    raw, norm = polaritonic_participation_arrays(state.photon, state.emitter)
    return float(raw), float(norm)


def band_labels(n_cavities: int, emitters_per_cavity: int) -> list[str]:
    n, m = n_cavities, emitters_per_cavity
    if m == 0:
        return [LOWER] * n
    return [LOWER] * n + [SUBRADIANT] * (n * (m - 1)) + [UPPER] * n


def classify_bands(states, params: SystemParams) -> list[str]:
    """Label energy-sorted states by position: N lower, N(M-1) subradiant, N upper.

    Under strong disorder the bands mix and the labels become nominal.
    """
    if len(states) != params.dimension:
        raise ValueError(
            f"expected {params.dimension} states for N={params.n_cavities}, "
            f"M={params.emitters_per_cavity}, got {len(states)}"
        )
    return band_labels(params.n_cavities, params.emitters_per_cavity)


def select_mps(p_p_raw, energies, mask) -> int:
    """Index maximizing ``p_p_raw`` within ``mask``.

    Ties go to the state closest to the median band energy, then to the
    lowest index.
    """
    p_p_raw = np.asarray(p_p_raw, dtype=float)
    members = np.flatnonzero(mask)
    if members.size == 0:
        raise ValueError("requested band is empty")
    values = p_p_raw[members]
    best = values.max()
    tied = members[values >= best - _TIE_ATOL]
    if tied.size == 1:
        return int(tied[0])
    re = np.real(np.asarray(energies))
    median = np.median(re[members])
    dist = np.abs(re[tied] - median)
    close = tied[dist <= dist.min() + 1e-12 * max(1.0, abs(median))]
    return int(close.min())


def most_polaritonic_state(states, labels, band: str = LOWER) -> int:
    if band not in (LOWER, UPPER):
        raise ValueError(f"band must be 'lower' or 'upper', got {band!r}")
    mask = np.array([lab == band for lab in labels], dtype=bool)
    if not mask.any():
        raise ValueError(f"band {band!r} has no states")
    p_p = np.array([polaritonic_participation(s)[0] for s in states])
    energies = np.array([s.energy for s in states])
    return select_mps(p_p, energies, mask)


def participation_report(state: EigenState, band=None) -> ParticipationReport:
    p_n_raw, p_n_norm = nodal_participation(state)
    p_p_raw, p_p_norm = polaritonic_participation(state)
    return ParticipationReport(p_n_raw, p_n_norm, p_p_raw, p_p_norm, band)


def participation_reports(states, params: SystemParams) -> list[ParticipationReport]:
    labels = classify_bands(states, params)
    return [participation_report(s, lab) for s, lab in zip(states, labels)]
