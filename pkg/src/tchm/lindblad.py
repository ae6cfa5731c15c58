"""Exact open-system solver on a truncated Fock space.

Superoperators act on column-stacked density matrices: ``vec(rho)[j*D + i]
= rho[i, j]``, so ``vec(A X B) = (B^T kron A) vec(X)``.

Every term of the Liouvillian (Hamiltonian, losses and incoherent pump)
preserves the difference between the excitation numbers of the ket and
the bra.  Steady states live in the zero-difference sector and ``A rho``
for a lowering operator ``A`` lives in the ``-1`` sector, so time
stepping and linear solves run on those blocks only.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.signal import find_peaks as _find_peaks, peak_widths

from . import kernels
from .errors import DimensionGuardError, IntegrationError, SteadyStateError
from .model import TWO_PI, Realization, SystemParams

DEFAULT_FOCK_CUTOFF = 2
DEFAULT_PUMP_RATE = TWO_PI * 0.01
DEFAULT_MAX_DIMENSION = 10_000
DECAY_THRESHOLD = 1e-4


class SpectrumTruncationWarning(UserWarning):
    """The correlation had not decayed when the tau grid ended."""


@dataclass(frozen=True)
class TruncatedSpace:
    """Tensor space of ``N`` truncated oscillators followed by ``N M`` qubits.

    Factor order: cavities 0..N-1, then emitters (n, m) row-major; the
    first factor is the most significant index.
    """

    n_cavities: int
    emitters_per_cavity: int
    fock_cutoff: int = DEFAULT_FOCK_CUTOFF

    def __post_init__(self):
        if self.fock_cutoff < 1:
            raise ValueError("fock_cutoff must be >= 1")
        if self.n_cavities < 1 or self.emitters_per_cavity < 0:
            raise ValueError("invalid array geometry")

    @property
    def dims(self) -> tuple[int, ...]:
        return ((self.fock_cutoff + 1,) * self.n_cavities
                + (2,) * (self.n_cavities * self.emitters_per_cavity))

    @property
    def dimension(self) -> int:
        return (self.fock_cutoff + 1) ** self.n_cavities * 2 ** (
            self.n_cavities * self.emitters_per_cavity)

    def element_labels(self) -> list[str]:
        out = [f"cav_{n}" for n in range(self.n_cavities)]
        out += [f"em_{n}_{m}" for n in range(self.n_cavities)
                for m in range(self.emitters_per_cavity)]
        return out


@dataclass(frozen=True, eq=False)
class Operators:
    space: TruncatedSpace
    cavities: tuple
    emitters: tuple  # emitters[n][m]
    excitations: np.ndarray  # total excitation number of each basis state

    def emitter(self, n: int, m: int):
        return self.emitters[n][m]

    def by_label(self, label: str):
        """Operator for ``cav_n`` / ``em_n_m``; ``+`` joins labels into a sum."""
        if "+" in label:
            terms = [self.by_label(part.strip()) for part in label.split("+")]
            return sum(terms[1:], terms[0]).tocsr()
        parts = label.split("_")
        if parts[0] == "cav" and len(parts) == 2:
            return self.cavities[int(parts[1])]
        if parts[0] == "em" and len(parts) == 3:
            return self.emitters[int(parts[1])][int(parts[2])]
        raise KeyError(f"unknown element label {label!r}")


def _embed(local, position, dims):
    left = int(np.prod(dims[:position], dtype=np.int64))
    right = int(np.prod(dims[position + 1:], dtype=np.int64))
    out = sp.kron(sp.identity(left, format="csr"), sp.csr_matrix(local), format="csr")
    return sp.kron(out, sp.identity(right, format="csr"), format="csr").astype(complex)


def build_operators(space: TruncatedSpace) -> Operators:
    """Annihilation operators ``a_n`` and lowering operators ``sigma_{n,m}``."""
    dims = space.dims
    n, m = space.n_cavities, space.emitters_per_cavity
    a_local = np.diag(np.sqrt(np.arange(1, space.fock_cutoff + 1, dtype=float)), 1)
    s_local = np.array([[0.0, 1.0], [0.0, 0.0]])
    cavities = tuple(_embed(a_local, i, dims) for i in range(n))
    emitters = tuple(
        tuple(_embed(s_local, n + i * m + j, dims) for j in range(m)) for i in range(n)
    )
    # excitation count per basis state: digits of the mixed-radix index
    exc = np.zeros(space.dimension, dtype=np.int64)
    idx = np.arange(space.dimension)
    for d in reversed(dims):
        exc += idx % d
        idx //= d
    return Operators(space, cavities, emitters, exc)


def hamiltonian(realization: Realization, ops: Operators):
    p = realization.params
    dim = ops.space.dimension
    h = sp.csr_matrix((dim, dim), dtype=complex)
    for i, a in enumerate(ops.cavities):
        h = h + p.omega_c * (a.getH() @ a)
        for j in range(p.emitters_per_cavity):
            s = ops.emitters[i][j]
            h = h + realization.omega_e[i, j] * (s.getH() @ s)
            h = h + p.g * (a.getH() @ s + s.getH() @ a)
    bonds = [(i, i + 1) for i in range(p.n_cavities - 1)]
    if p.boundary == "periodic":
        bonds.append((p.n_cavities - 1, 0))
    for i, j in bonds:
        ai, aj = ops.cavities[i], ops.cavities[j]
        h = h - p.j_hop * (ai.getH() @ aj + aj.getH() @ ai)
    return h.tocsr()


def _spre(x, dim):
    return sp.kron(sp.identity(dim, format="csr"), x, format="csr")


def _spost(x, dim):
    return sp.kron(x.T, sp.identity(dim, format="csr"), format="csr")


def dissipator(c, rate):
    """``rate * D[c]`` with ``D[c] rho = 2 c rho c^dag - c^dag c rho - rho c^dag c``."""
    dim = c.shape[0]
    cdc = (c.getH() @ c).tocsr()
    return rate * (2.0 * sp.kron(c.conj(), c, format="csr") - _spre(cdc, dim) - _spost(cdc, dim))


def vec(rho) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v, dim) -> np.ndarray:
    return np.asarray(v).reshape((dim, dim), order="F")


@dataclass(frozen=True, eq=False)
class Liouvillian:
    matrix: sp.csr_matrix
    realization: Realization
    operators: Operators
    hamiltonian: sp.csr_matrix
    pump_cavity: int
    pump_rate: float
    _blocks: dict = field(default_factory=dict, repr=False)

    @property
    def space(self) -> TruncatedSpace:
        return self.operators.space

    @property
    def dimension(self) -> int:
        return self.space.dimension

    @property
    def params(self) -> SystemParams:
        return self.realization.params

    def apply(self, rho) -> np.ndarray:
        return unvec(self.matrix @ vec(np.asarray(rho, dtype=complex)), self.dimension)

    def charge(self) -> np.ndarray:
        """Ket-minus-bra excitation difference of every vectorized index."""
        exc = self.operators.excitations
        d = self.dimension
        return np.tile(exc, d) - np.repeat(exc, d)

    def sector(self, q: int):
        """``(indices, block)`` of the invariant sector with charge ``q``."""
        if q not in self._blocks:
            idx = np.flatnonzero(self.charge() == q)
            block = self.matrix[idx][:, idx].tocsr()
            self._blocks[q] = (idx, block)
        return self._blocks[q]


def build_liouvillian(realization: Realization, pump_cavity: int = 0,
                      pump_rate: float = 0.0, fock_cutoff: int = DEFAULT_FOCK_CUTOFF,
                      max_dimension: int = DEFAULT_MAX_DIMENSION) -> Liouvillian:
    """Lindblad generator with cavity losses, emitter decay and an incoherent pump.

    ``L rho = -i[H, rho] + sum_n kappa/2 D[a_n] + sum_nm gamma/2 D[sigma_nm]
    + P D[a_pump^dag]``.
    """
    p = realization.params
    if not 0 <= pump_cavity < p.n_cavities:
        raise ValueError(f"pump_cavity must be in [0, {p.n_cavities}), got {pump_cavity}")
    if pump_rate < 0:
        raise ValueError("pump_rate must be >= 0")
    space = TruncatedSpace(p.n_cavities, p.emitters_per_cavity, fock_cutoff)
    if space.dimension > max_dimension:
        raise DimensionGuardError(space.dimension, max_dimension)
    ops = build_operators(space)
    h = hamiltonian(realization, ops)
    dim = space.dimension
    lv = -1j * (_spre(h, dim) - _spost(h, dim))
    for a in ops.cavities:
        lv = lv + dissipator(a, p.kappa / 2.0)
    for row in ops.emitters:
        for s in row:
            lv = lv + dissipator(s, p.gamma / 2.0)
    if pump_rate > 0:
        lv = lv + dissipator(ops.cavities[pump_cavity].getH().tocsr(), pump_rate)
    lv = lv.tocsr()
    lv.eliminate_zeros()
    return Liouvillian(lv, realization, ops, h, pump_cavity, float(pump_rate))


# --------------------------------------------------------------------------
# steady state

def steady_state(liouvillian: Liouvillian, tol: float = 1e-8) -> np.ndarray:
    """Stationary density matrix.

    Solved in the zero-charge sector with the trace condition replacing a
    (redundant) population row.  A second candidate, with the trace
    condition in a different population row, is obtained from the same
    factorization by a rank-2 Woodbury update; the two must agree or the
    null space is not unique.
    """
    dim = liouvillian.dimension
    idx, block = liouvillian.sector(0)
    n = block.shape[0]
    rows, cols = idx % dim, idx // dim
    diag_pos = np.flatnonzero(rows == cols)
    r1 = diag_pos[0]
    trace_row = sp.csr_matrix((np.ones(diag_pos.size), (np.zeros(diag_pos.size, int), diag_pos)),
                              shape=(1, n), dtype=complex)
    keep = np.ones(n)
    keep[r1] = 0.0
    a1 = sp.diags(keep) @ block + sp.csr_matrix(
        (np.ones(diag_pos.size), (np.full(diag_pos.size, r1), diag_pos)), shape=(n, n))
    try:
        lu = spla.splu(a1.tocsc(), permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as exc:
        raise SteadyStateError(f"singular steady-state system: {exc}") from exc
    rhs = np.zeros(n, dtype=complex)
    rhs[r1] = 1.0
    x = lu.solve(rhs)
    if not np.all(np.isfinite(x)):
        raise SteadyStateError("steady-state solve produced non-finite values")
    full = np.zeros(dim * dim, dtype=complex)
    full[idx] = x
    residual = np.linalg.norm(liouvillian.matrix @ full)
    scale = max(1.0, spla.norm(liouvillian.matrix, np.inf))
    if residual > tol * scale:
        raise SteadyStateError(f"steady-state residual {residual:.3e} exceeds tolerance")

    if diag_pos.size > 1:
        r2 = diag_pos[-1]
        u = np.zeros((n, 2), dtype=complex)
        u[r1, 0] = u[r2, 1] = 1.0
        vt = np.vstack([(block[r1] - trace_row).toarray(), (trace_row - block[r2]).toarray()])
        b2 = np.zeros(n, dtype=complex)
        b2[r2] = 1.0
        y = lu.solve(b2)
        z = lu.solve(u)
        cap = np.eye(2) + vt @ z
        if abs(np.linalg.det(cap)) < 1e-12 * max(1.0, np.abs(cap).max() ** 2):
            raise SteadyStateError("steady state is not unique (second candidate is singular)")
        x2 = y - z @ np.linalg.solve(cap, vt @ y)
        if np.linalg.norm(x2 - x) > 1e-6 * max(1.0, np.linalg.norm(x)):
            raise SteadyStateError("steady state is not unique (two candidates differ)")

    rho = unvec(full, dim)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    return rho


# --------------------------------------------------------------------------
# time stepping

def spectral_span(params: SystemParams) -> float:
    """Width estimate ``max(2 g sqrt(M) + 2|J| + kappa, Delta)`` of the spectrum."""
    return max(2.0 * params.collective_g + 2.0 * abs(params.j_hop) + params.kappa,
               params.delta)


def default_time_step(params: SystemParams) -> float:
    span = spectral_span(params)
    return 1.0 / (20.0 * span) if span > 0 else 1e-3


def default_tau_max(params: SystemParams) -> float:
    """Cap on the correlation length: 20 / (slowest nonzero decay rate)."""
    rates = [r for r in (params.gamma, params.kappa) if r > 0]
    if not rates:
        raise ValueError("a lossless system needs an explicit tau_max")
    return 20.0 / min(rates)


def operator_charge(op, excitations):
    """Excitation change of ``op``, or ``None`` when it is not definite."""
    coo = sp.coo_matrix(op)
    if coo.nnz == 0:
        return 0
    diffs = np.unique(excitations[coo.row] - excitations[coo.col])
    return int(diffs[0]) if diffs.size == 1 else None


def _propagate_sector(block, b0, weights, dt, substeps, n_samples, g0, bound,
                      stop_threshold=None, chunk=200, backend=None):
    """Sample ``sum_i w_i b_i(t)`` every ``substeps`` RK4 steps.

    Stops early once every column stays below ``stop_threshold * |g0|`` over
    a whole chunk.
    """
    b = np.ascontiguousarray(b0, dtype=np.complex128).copy()
    out = [np.asarray(g0, dtype=complex)[None, :]]
    done = 1
    abs_g0 = np.abs(g0)
    while done < n_samples:
        count = min(chunk, n_samples - done)
        samples = kernels.rk4_propagate(block, b, weights, dt, count * substeps,
                                        substeps, backend=backend)
        if not np.all(np.isfinite(samples)) or np.any(np.abs(samples) > 1.01 * bound):
            raise IntegrationError(
                "correlation grew beyond the contraction bound; reduce the time step dt"
            )
        out.append(samples)
        done += count
        if stop_threshold is not None and np.all(
                np.abs(samples).max(axis=0) <= stop_threshold * abs_g0):
            break
    return np.concatenate(out, axis=0)


def _grid_steps(tau, dt_max):
    tau = np.asarray(tau, dtype=float)
    if tau.ndim != 1 or tau.size < 2 or tau[0] != 0.0:
        raise ValueError("tau grid must be 1-D, start at 0 and have >= 2 points")
    h = tau[1] - tau[0]
    if not np.allclose(np.diff(tau), h, rtol=1e-9, atol=0):
        raise ValueError("tau grid must be uniform")
    substeps = max(1, math.ceil(h / dt_max - 1e-9))
    return h, substeps


def correlations(liouvillian: Liouvillian, rho_ss, probes, tau=None, dt=None,
                 tau_max=None, threshold=DECAY_THRESHOLD, backend=None):
    """Steady-state two-time correlations ``<A^dag(tau) A(0)>`` for several probes.

    Each ``A`` is propagated as ``B(tau) = exp(L tau)(A rho_ss)`` (quantum
    regression) and ``g(tau) = Tr[A^dag B(tau)]``.

    With ``tau=None`` the grid spacing is five RK4 steps and the run stops
    once all ``|g|`` fall below ``threshold * |g(0)|``, or at ``tau_max``
    (default :func:`default_tau_max`).

    Returns ``(tau, g)`` with ``g`` of shape ``(len(tau), len(probes))``.
    """
    params = liouvillian.params
    dt_max = dt if dt is not None else default_time_step(params)
    if tau is None:
        substeps = 5
        h = substeps * dt_max
        t_cap = tau_max if tau_max is not None else default_tau_max(params)
        n_samples = int(math.floor(t_cap / h)) + 1
        stop = threshold
    else:
        h, substeps = _grid_steps(tau, dt_max)
        n_samples = len(tau)
        stop = None
    step = h / substeps

    dim = liouvillian.dimension
    exc = liouvillian.operators.excitations
    rho = np.asarray(rho_ss, dtype=complex)
    probes = [sp.csr_matrix(p, dtype=complex) for p in probes]
    groups = {}
    for i, op in enumerate(probes):
        groups.setdefault(operator_charge(op, exc), []).append(i)

    columns = {}
    lengths = []
    for q, members in groups.items():
        if q is None:
            idx, block = np.arange(dim * dim), liouvillian.matrix
        else:
            idx, block = liouvillian.sector(q)
        b0 = np.stack([vec(probes[i] @ rho)[idx] for i in members], axis=1)
        w = np.stack([vec(probes[i].toarray().conj())[idx] for i in members], axis=1)
        g0 = np.sum(w * b0, axis=0)
        bound = max(np.linalg.norm(probes[i].toarray()) for i in members) \
            * math.sqrt(dim) * np.linalg.norm(b0, axis=0).max() + 1e-300
        g = _propagate_sector(block, b0, w, step, substeps, n_samples, g0, bound,
                              stop_threshold=stop, backend=backend)
        for col, i in enumerate(members):
            columns[i] = g[:, col]
        lengths.append(g.shape[0])

    n_out = max(lengths)
    g_all = np.zeros((n_out, len(probes)), dtype=complex)
    for i, col in columns.items():
        g_all[:col.shape[0], i] = col
    tau_out = np.arange(n_out) * h if tau is None else np.asarray(tau, dtype=float)
    return tau_out, g_all


def correlation(liouvillian, rho_ss, probe, tau=None, **kwargs):
    """Single-probe form of :func:`correlations`; returns ``(tau, g)``."""
    tau_out, g = correlations(liouvillian, rho_ss, [probe], tau=tau, **kwargs)
    return tau_out, g[:, 0]


def evolve(liouvillian: Liouvillian, rho0, times, observables=(), dt=None, backend=None):
    """Expectation values ``Tr[O rho(t)]`` on a uniform ``times`` grid starting at 0.

    Returns an array of shape ``(len(times), len(observables))``.
    """
    dt_max = dt if dt is not None else default_time_step(liouvillian.params)
    h, substeps = _grid_steps(times, dt_max)
    dim = liouvillian.dimension
    b = vec(np.asarray(rho0, dtype=complex))[:, None]
    obs = [np.asarray(sp.csr_matrix(o).toarray() if sp.issparse(o) else o, dtype=complex)
           for o in observables]
    w = np.stack([vec(o.T) for o in obs], axis=1)
    b = np.ascontiguousarray(np.repeat(b, len(obs), axis=1))
    g0 = np.sum(w * b, axis=0)
    bound = max(np.linalg.norm(o, 2) for o in obs) * np.abs(np.trace(unvec(b[:, 0], dim))) \
        * math.sqrt(dim) * 10 + 1e-300
    return _propagate_sector(liouvillian.matrix, b, w, h / substeps, substeps, len(times),
                             g0, bound, backend=backend)


# --------------------------------------------------------------------------
# spectra

@dataclass(frozen=True, eq=False)
class SpectrumTrace:
    probe: str
    omega: np.ndarray
    intensity: np.ndarray
    pump: str = ""
    pump_rate: float = 0.0

    def normalized(self) -> "SpectrumTrace":
        peak = np.max(np.abs(self.intensity))
        scale = 1.0 / peak if peak > 0 else 1.0
        return SpectrumTrace(self.probe, self.omega, self.intensity * scale, self.pump,
                             self.pump_rate)


@dataclass(frozen=True)
class Peak:
    omega: float
    height: float
    fwhm: float


def _trapezoid_weights(n, h):
    w = np.full(n, h)
    w[0] *= 0.5
    return w


def spectrum(g_tau, tau, omega=None, probe="", pump="", pump_rate=0.0,
             threshold=DECAY_THRESHOLD) -> SpectrumTrace:
    """``S(omega) = int g(tau) exp(-i omega tau) dtau`` over the whole real line.

    Uses ``g(-tau) = conj(g(tau))``, so ``S = 2 Re int_0^inf``.  Without an
    explicit ``omega`` grid an FFT grid is used (zero-padded to at least
    four times the record length); otherwise the transform is summed
    directly on the given grid.
    """
    g = np.asarray(g_tau, dtype=complex)
    tau = np.asarray(tau, dtype=float)
    h, _ = _grid_steps(tau, np.inf)
    if abs(g[0]) > 0:
        residual = abs(g[-1]) / abs(g[0])
        if residual > threshold:
            warnings.warn(
                f"correlation not decayed at tau_max={tau[-1]:.4g}: "
                f"|g(tau_max)|/|g(0)| = {residual:.3e}", SpectrumTruncationWarning,
                stacklevel=2)
    x = g * _trapezoid_weights(g.size, h)
    if omega is None:
        nfft = 1 << int(math.ceil(math.log2(4 * g.size)))
        spec = np.fft.fftshift(np.fft.fft(x, nfft))
        omega = np.fft.fftshift(np.fft.fftfreq(nfft, d=h)) * TWO_PI
        intensity = 2.0 * spec.real
    else:
        omega = np.asarray(omega, dtype=float)
        intensity = np.empty(omega.size)
        chunk = max(1, 4_000_000 // max(1, g.size))
        for start in range(0, omega.size, chunk):
            om = omega[start:start + chunk]
            intensity[start:start + chunk] = 2.0 * np.real(np.exp(-1j * np.outer(om, tau)) @ x)
    return SpectrumTrace(probe, omega, intensity, pump, pump_rate)


def default_omega_grid(params: SystemParams, points: int = 4001) -> np.ndarray:
    half = 1.5 * (params.collective_g + 2.0 * abs(params.j_hop)) + params.kappa + params.delta
    return np.linspace(params.omega_c - half, params.omega_c + half, points)


def find_peaks(trace: SpectrumTrace, rel_prominence: float = 1e-3) -> list[Peak]:
    """Local maxima with prominence above ``rel_prominence * max`` and their FWHM.

    Where neighbouring peaks overlap too much for the trace to fall to half
    height in between, the width stops at the separating minimum.
    """
    y = trace.intensity
    top = y.max()
    if top <= 0:
        return []
    idx, props = _find_peaks(y, prominence=rel_prominence * top)
    if idx.size == 0:
        return []
    # full width at half the height above zero, searched within each peak's basin
    basins = (y[idx], props["left_bases"], props["right_bases"])
    widths = peak_widths(y, idx, rel_height=0.5, prominence_data=basins)[0]
    step = trace.omega[1] - trace.omega[0]
    return [Peak(float(trace.omega[i]), float(y[i]), float(w * step)) for i, w in zip(idx, widths)]


def emission_spectra(realization: Realization, pump_cavities=None, probes=None,
                     pump_rate: float = DEFAULT_PUMP_RATE, fock_cutoff: int = DEFAULT_FOCK_CUTOFF,
                     sum_pumps: bool = False, omega=None, normalize: bool = False,
                     max_dimension: int = DEFAULT_MAX_DIMENSION, dt=None, tau_max=None,
                     backend=None) -> list[SpectrumTrace]:
    """Emission spectra of each probed element for each pumped cavity.

    ``pump_cavities`` defaults to every cavity and ``probes`` to every
    element (``"cav_n"`` / ``"em_n_m"`` labels).  With ``sum_pumps`` the
    traces of one probe are summed over the pumped cavities.
    """
    p = realization.params
    space = TruncatedSpace(p.n_cavities, p.emitters_per_cavity, fock_cutoff)
    if space.dimension > max_dimension:
        raise DimensionGuardError(space.dimension, max_dimension)
    if pump_cavities is None:
        pump_cavities = list(range(p.n_cavities))
    elif isinstance(pump_cavities, int):
        pump_cavities = [pump_cavities]
    labels = list(probes) if probes is not None else space.element_labels()
    omega = default_omega_grid(p) if omega is None else np.asarray(omega, dtype=float)

    traces = []
    for pc in pump_cavities:
        lv = build_liouvillian(realization, pc, pump_rate, fock_cutoff, max_dimension)
        rho = steady_state(lv)
        ops = [lv.operators.by_label(lab) for lab in labels]
        tau, g = correlations(lv, rho, ops, dt=dt, tau_max=tau_max, backend=backend)
        for i, lab in enumerate(labels):
            traces.append(spectrum(g[:, i], tau, omega, probe=lab, pump=f"cav_{pc}",
                                   pump_rate=pump_rate))
    if sum_pumps:
        summed = []
        for i, lab in enumerate(labels):
            total = sum(traces[k * len(labels) + i].intensity for k in range(len(pump_cavities)))
            summed.append(SpectrumTrace(lab, omega, total, "sum", pump_rate))
        traces = summed
    if normalize:
        traces = [t.normalized() for t in traces]
    return traces
