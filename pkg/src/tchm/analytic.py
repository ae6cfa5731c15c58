"""Closed-form bands and band-state weights of the resonant, lossless array.

These serve as oracles for the numerical eigensolver and as reference
band plots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BandPoint:
    k: float
    e_minus: float
    e_plus: float
    photon_weight_minus: float
    photon_weight_plus: float

    @property
    def emitter_weight_minus(self) -> float:
        return 1.0 - self.photon_weight_minus

    @property
    def emitter_weight_plus(self) -> float:
        return 1.0 - self.photon_weight_plus


def open_momenta(n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("need at least one cavity")
    return np.pi * np.arange(1, n + 1) / (n + 1)


def periodic_momenta(n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("need at least one cavity")
    return 2.0 * np.pi * np.arange(1, n + 1) / n


def cca_band(k, omega_c, j):
    """Bare photonic band of the coupled-cavity chain."""
    return omega_c - 2.0 * j * np.cos(k)


def polariton_bands(k, omega_0, j, g, m):
    """Lower and upper polariton branches ``(e_minus, e_plus)``."""
    if m < 1:
        raise ValueError("polariton bands need at least one emitter per cavity")
    jc = j * np.cos(k)
    root = np.sqrt(jc * jc + m * g * g)
    return omega_0 - jc - root, omega_0 - jc + root


def polariton_eigenvector(k, j, g, m):
    """Photon and collective-emitter weights of both branches.

    Returns ``((photon_minus, emitter_minus), (photon_plus, emitter_plus))``.
    The unnormalized branch vector has emitter amplitude ``g sqrt(M)`` and
    photon amplitude ``J cos k -/+ root``; the weights are its normalized
    squares, evaluated without cancellation.
    """
    if m < 1:
        raise ValueError("polariton eigenvectors need at least one emitter per cavity")
    jc = np.asarray(j * np.cos(k), dtype=float)
    gm2 = m * g * g
    root = np.sqrt(jc * jc + gm2)
    if np.any((gm2 == 0.0) & (jc == 0.0)):
        raise ValueError("degenerate branches: g = 0 and J cos k = 0 give a zero vector")
    # u = root + jc computed stably; root - jc = gm2 / u
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(jc >= 0.0, root + jc, gm2 / (root - jc))
        u2 = u * u
        photon_minus = np.where(gm2 == 0.0, np.where(jc > 0.0, 1.0, 0.0), u2 / (u2 + gm2))
    photon_plus = 1.0 - photon_minus
    if photon_minus.ndim == 0:
        photon_minus, photon_plus = float(photon_minus), float(photon_plus)
    return (photon_minus, 1.0 - photon_minus), (photon_plus, 1.0 - photon_plus)


def band_table(n, m, boundary="open", omega_0=0.0, j=1.0, g=1.0) -> list[BandPoint]:
    """Band energies and photon weights at the allowed momenta of an ``n``-cavity chain.

    With ``m = 0`` only the bare photonic band exists; it is reported as
    ``e_minus`` with ``e_plus`` set to NaN.
    """
    ks = open_momenta(n) if boundary == "open" else periodic_momenta(n)
    if m == 0:
        e = cca_band(ks, omega_0, j)
        return [BandPoint(float(k), float(x), float("nan"), 1.0, float("nan"))
                for k, x in zip(ks, e)]
    e_minus, e_plus = polariton_bands(ks, omega_0, j, g, m)
    (ph_minus, _), (ph_plus, _) = polariton_eigenvector(ks, j, g, m)
    return [BandPoint(float(k), float(a), float(b), float(c), float(d))
            for k, a, b, c, d in zip(ks, e_minus, e_plus, ph_minus, ph_plus)]


def band_energies(n, m, omega_0, j, g, boundary="open"):
    """All ``2N`` polariton energies (or ``N`` photonic ones for ``m = 0``), sorted."""
    ks = open_momenta(n) if boundary == "open" else periodic_momenta(n)
    if m == 0:
        return np.sort(cca_band(ks, omega_0, j))
    lo, hi = polariton_bands(ks, omega_0, j, g, m)
    return np.sort(np.concatenate([lo, hi]))
