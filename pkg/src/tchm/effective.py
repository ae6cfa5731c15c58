"""Non-Hermitian effective Hamiltonian in the single-excitation sector."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import EigensolveError
from .model import Realization, SystemParams, build_basis


@dataclass(frozen=True, eq=False)
class EffectiveMatrix:
    matrix: np.ndarray
    realization: Realization

    @property
    def params(self) -> SystemParams:
        return self.realization.params

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def loss_diagonal(self) -> np.ndarray:
        p = self.params
        return np.concatenate([np.full(p.n_cavities, p.kappa), np.full(p.n_emitters, p.gamma)])

    def hermitian_part(self) -> np.ndarray:
        """The lossless single-excitation Hamiltonian."""
        return self.matrix + 0.5j * np.diag(self.loss_diagonal())


@dataclass(frozen=True, eq=False)
class EigenState:
    """One right eigenpair of the effective Hamiltonian.

    ``photon[n]`` and ``emitter[n]`` are the cavity and summed-emitter
    weights of node ``n`` computed from the unit-norm amplitudes.
    """

    energy: complex
    amplitudes: np.ndarray
    photon: np.ndarray
    emitter: np.ndarray

    @property
    def n_cavities(self) -> int:
        return self.photon.shape[0]

    @property
    def node_weights(self) -> np.ndarray:
        return self.photon + self.emitter

    @property
    def total_photon(self) -> float:
        return float(self.photon.sum())

    @property
    def total_emitter(self) -> float:
        return float(self.emitter.sum())


def hamiltonian_matrix(params: SystemParams, omega_e, lossy=True) -> np.ndarray:
    n, m = params.n_cavities, params.emitters_per_cavity
    dim = n * (m + 1)
    h = np.zeros((dim, dim), dtype=complex)
    cav = np.arange(n)
    h[cav, cav] = params.omega_c
    em = n + np.arange(n * m)
    h[em, em] = np.asarray(omega_e, dtype=float).reshape(-1)
    if m:
        node = np.repeat(cav, m)
        h[node, em] = params.g
        h[em, node] = params.g
    bonds = [(i, i + 1) for i in range(n - 1)]
    if params.boundary == "periodic":
        bonds.append((n - 1, 0))
    # accumulate: for N <= 2 the periodic bond repeats an existing one
    for i, j in bonds:
        h[i, j] -= params.j_hop
        h[j, i] -= params.j_hop
    if lossy:
        h[cav, cav] -= 0.5j * params.kappa
        h[em, em] -= 0.5j * params.gamma
    return h


def build_h_eff(realization: Realization) -> EffectiveMatrix:
    """Dense ``H_TCHM - (i/2)(kappa a^dag a + gamma sigma^+ sigma^-)`` in the basis of :mod:`model`."""
    return EffectiveMatrix(hamiltonian_matrix(realization.params, realization.omega_e), realization)


def _node_weights(amplitudes: np.ndarray, n: int, m: int):
    """Photon and emitter weights per node; ``amplitudes`` has basis states along axis 0."""
    prob = np.abs(amplitudes) ** 2
    photon = prob[:n]
    emitter = prob[n:].reshape((n, m) + prob.shape[1:]).sum(axis=1) if m else np.zeros_like(photon)
    return photon, emitter


def solve(matrix: np.ndarray, seed=None):
    """Sorted eigenvalues and unit-norm right eigenvectors (as columns).

    Sorted ascending by real part, ties by imaginary part.
    """
    if not np.all(np.isfinite(matrix)):
        raise EigensolveError("matrix has non-finite entries", seed=seed)
    try:
        w, v = scipy.linalg.eig(matrix, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolveError(f"eigensolver did not converge: {exc}", seed=seed) from exc
    order = np.lexsort((w.imag, w.real))
    w = w[order]
    v = v[:, order]
    v /= np.linalg.norm(v, axis=0)
    return w, v


def eigensolve(h: EffectiveMatrix) -> list[EigenState]:
    p = h.params
    w, v = solve(h.matrix, seed=h.realization.seed)
    photon, emitter = _node_weights(v, p.n_cavities, p.emitters_per_cavity)
    return [
        EigenState(complex(w[i]), v[:, i].copy(), photon[:, i].copy(), emitter[:, i].copy())
        for i in range(w.shape[0])
    ]


def occupancies(state_or_amplitudes, n_cavities=None, emitters_per_cavity=None):
    """Node occupancy table ``(photon[n], emitter[n])``.

    Accepts an :class:`EigenState` or a raw amplitude vector together with
    the array geometry.
    """
    if isinstance(state_or_amplitudes, EigenState):
        return state_or_amplitudes.photon.copy(), state_or_amplitudes.emitter.copy()
    amps = np.asarray(state_or_amplitudes, dtype=complex)
    if n_cavities is None or emitters_per_cavity is None:
        raise TypeError("raw amplitudes need n_cavities and emitters_per_cavity")
    if amps.shape != (n_cavities * (emitters_per_cavity + 1),):
        raise ValueError("amplitude vector has the wrong length")
    return _node_weights(amps, n_cavities, emitters_per_cavity)


def make_state(energy, amplitudes, n_cavities, emitters_per_cavity) -> EigenState:
    amps = np.asarray(amplitudes, dtype=complex)
    amps = amps / np.linalg.norm(amps)
    photon, emitter = _node_weights(amps, n_cavities, emitters_per_cavity)
    return EigenState(complex(energy), amps, photon, emitter)


def residuals(h: EffectiveMatrix, states) -> np.ndarray:
    """``||H v - E v||`` for each state."""
    return np.array([np.linalg.norm(h.matrix @ s.amplitudes - s.energy * s.amplitudes)
                     for s in states])


__all__ = [
    "EffectiveMatrix", "EigenState", "build_h_eff", "eigensolve", "occupancies",
    "hamiltonian_matrix", "solve", "make_state", "residuals", "build_basis",
]
