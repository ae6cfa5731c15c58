import math
import warnings

import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given, settings, strategies as st

from tchm.errors import DimensionGuardError, IntegrationError, SteadyStateError
from tchm.lindblad import (SpectrumTruncationWarning, TruncatedSpace,
                           build_liouvillian, build_operators, correlation, correlations,
                           emission_spectra, evolve, find_peaks, spectrum, steady_state,
                           unvec, vec)
from tchm.effective import build_h_eff, eigensolve
from tchm.model import TWO_PI, Realization, SystemParams, sample_disorder

# ---------------------------------------------------------------------------
# independent dense construction


def dense_ops(n, m, cutoff):
    dims = [cutoff + 1] * n + [2] * (n * m)
    a1 = np.diag(np.sqrt(np.arange(1, cutoff + 1)), 1)
    s1 = np.array([[0, 1], [0, 0]], dtype=float)

    def embed(local, k):
        out = np.array([[1.0]])
        for i, d in enumerate(dims):
            out = np.kron(out, local if i == k else np.eye(d))
        return out.astype(complex)
    return [embed(a1, i) for i in range(n)], [embed(s1, n + i) for i in range(n * m)]


def dense_generator(realization, pump_cavity, pump_rate, cutoff):
    """L applied to every matrix unit E_ij, one column at a time."""
    p = realization.params
    n, m = p.n_cavities, p.emitters_per_cavity
    a, s = dense_ops(n, m, cutoff)
    dim = a[0].shape[0]
    h = np.zeros((dim, dim), complex)
    for i in range(n):
        h += p.omega_c * a[i].conj().T @ a[i]
        for j in range(m):
            sig = s[i * m + j]
            h += realization.omega_e[i, j] * sig.conj().T @ sig
            h += p.g * (a[i].conj().T @ sig + sig.conj().T @ a[i])
    for i in range(n - 1):
        h -= p.j_hop * (a[i].conj().T @ a[i + 1] + a[i + 1].conj().T @ a[i])
    jumps = [(c, p.kappa / 2) for c in a] + [(c, p.gamma / 2) for c in s]
    jumps.append((a[pump_cavity].conj().T, pump_rate))
    out = np.zeros((dim * dim, dim * dim), complex)
    for col in range(dim * dim):
        e = np.zeros((dim, dim), complex)
        e[col % dim, col // dim] = 1.0
        r = -1j * (h @ e - e @ h)
        for c, rate in jumps:
            cd = c.conj().T
            r += rate * (2 * c @ e @ cd - cd @ c @ e - e @ cd @ c)
        out[:, col] = r.reshape(-1, order="F")
    return out


@pytest.mark.parametrize("n,m,cutoff", [(1, 1, 2), (2, 1, 1), (1, 2, 1), (2, 0, 2)])
def test_generator_matches_dense_construction(n, m, cutoff):
    p = SystemParams.standard(n, m, j_over_g=0.7, delta_over_g_sqrt_m=0.8) \
        if m else SystemParams(n, 0, omega_c=1.0, j_hop=2.0, kappa=3.0, gamma=0.5)
    r = sample_disorder(p, 5)
    lv = build_liouvillian(r, pump_cavity=n - 1, pump_rate=0.9, fock_cutoff=cutoff)
    ref = dense_generator(r, n - 1, 0.9, cutoff)
    assert np.allclose(lv.matrix.toarray(), ref, atol=1e-12 * np.abs(ref).max())
    # nonzero pattern: the sparse matrix stores no more than the dense one needs
    assert lv.matrix.nnz <= np.count_nonzero(np.abs(ref) > 1e-14 * np.abs(ref).max())


def test_operators_commutators():
    ops = build_operators(TruncatedSpace(2, 1, 3))
    a = ops.cavities[0].toarray()
    comm = a @ a.conj().T - a.conj().T @ a
    # [a, a^dag] = 1 below the cutoff
    diag = np.diag(comm).real
    levels = np.arange(ops.space.dimension) // (4 * 2 * 2)
    assert np.allclose(diag[levels < 3], 1.0)
    s = ops.emitter(1, 0).toarray()
    assert np.allclose(s @ s, 0)
    assert ops.by_label("em_1_0") is ops.emitter(1, 0)
    with pytest.raises(KeyError):
        ops.by_label("foo_1")


small_systems = st.builds(
    lambda n, m, jg, dg, seed, pump: (
        sample_disorder(SystemParams.standard(n, m, j_over_g=jg, delta_over_g_sqrt_m=dg),
                        seed), pump),
    st.integers(1, 2), st.integers(0, 2), st.floats(0, 3), st.floats(0, 2),
    st.integers(0, 2 ** 32), st.floats(0, 5),
)


@settings(max_examples=15)
@given(small_systems)
def test_trace_and_hermiticity_preservation(system):
    r, pump = system
    lv = build_liouvillian(r, 0, pump, fock_cutoff=1)
    dim = lv.dimension
    rng = np.random.default_rng(0)
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    y = lv.apply(x)
    scale = np.abs(y).max()
    assert abs(np.trace(y)) < 1e-11 * scale
    assert np.allclose(lv.apply(x.conj().T), y.conj().T, atol=1e-11 * scale)
    # excitation-difference charge is conserved
    coo = lv.matrix.tocoo()
    q = lv.charge()
    assert np.array_equal(q[coo.row], q[coo.col])


@settings(max_examples=10)
@given(small_systems)
def test_steady_state_is_a_density_matrix(system):
    r, pump = system
    lv = build_liouvillian(r, 0, max(pump, 0.05), fock_cutoff=2)
    rho = steady_state(lv)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(rho, rho.conj().T, atol=1e-14)
    assert np.linalg.eigvalsh(rho).min() > -1e-10
    assert np.abs(lv.apply(rho)).max() < 1e-8 * max(1.0, abs(lv.matrix).max())


def test_lossless_steady_state_is_rejected():
    p = SystemParams(1, 1, kappa=0, gamma=0)
    lv = build_liouvillian(Realization.resonant(p), 0, 0.0, fock_cutoff=1)
    with pytest.raises(SteadyStateError):
        steady_state(lv)


def test_rabi_oscillation_with_equal_losses():
    # one photon, one resonant emitter, kappa = gamma: n(t) = exp(-kappa t) cos^2(g t)
    g, kappa = 2.0, 0.6
    p = SystemParams(1, 1, g=g, kappa=kappa, gamma=kappa)
    lv = build_liouvillian(Realization.resonant(p), 0, 0.0, fock_cutoff=2)
    ops = lv.operators
    a = ops.cavities[0]
    psi = np.zeros(lv.dimension)
    psi[2] = 1.0  # |n=1> x |g>: cavity digit 1, emitter digit 0
    assert (a.getH() @ a).diagonal()[2].real == pytest.approx(1.0)
    rho0 = np.outer(psi, psi)
    times = np.linspace(0, 6.0, 301)
    n_t = evolve(lv, rho0, times, [a.getH() @ a], dt=1e-3)[:, 0]
    ref = np.exp(-kappa * times) * np.cos(g * times) ** 2
    assert np.abs(n_t - ref).max() < 1e-9


def pumped_cavity(cutoff, omega_c=3.0):
    p = SystemParams(1, 0, omega_c=omega_c, kappa=TWO_PI * 10, gamma=0.0)
    return build_liouvillian(Realization.resonant(p), 0, TWO_PI * 0.01, fock_cutoff=cutoff)


def test_single_cavity_steady_state_matches_long_time_limit():
    lv = pumped_cavity(3)
    a = lv.operators.cavities[0]
    n_op = (a.getH() @ a).toarray()
    rho = steady_state(lv)
    n_ss = np.trace(n_op @ rho).real
    rho0 = np.zeros((lv.dimension, lv.dimension))
    rho0[0, 0] = 1.0
    times = np.linspace(0, 1.0, 11)
    n_t = evolve(lv, rho0, times, [n_op]).real[:, 0]
    assert abs(n_t[-1] - n_ss) < 1e-6
    # linear-theory value 2P / (kappa - 2P), truncation effects aside
    kappa, pump = lv.params.kappa, lv.pump_rate
    assert n_ss == pytest.approx(2 * pump / (kappa - 2 * pump), rel=1e-3)


def test_correlation_decay_rate():
    # <a^dag(tau) a> of a pumped cavity decays at kappa/2 - P and rotates at omega_c
    lv = pumped_cavity(4)
    rho = steady_state(lv)
    a = lv.operators.cavities[0]
    tau, g = correlation(lv, rho, a)
    rate = lv.params.kappa / 2 - lv.pump_rate
    ref = g[0] * np.exp((1j * 3.0 - rate) * tau)
    assert np.abs(g - ref).max() < 1e-7 * abs(g[0])
    assert g[0].real == pytest.approx(np.trace((a.getH() @ a).toarray() @ rho).real)
    assert abs(g[-1]) <= 1e-4 * abs(g[0])


def test_sector_propagation_matches_full_exponential():
    p = SystemParams.standard(2, 1, j_over_g=1.0, delta_over_g_sqrt_m=0.5)
    lv = build_liouvillian(sample_disorder(p, 3), 1, TWO_PI * 0.05, fock_cutoff=1)
    rho = steady_state(lv)
    probes = [lv.operators.cavities[0], lv.operators.emitter(1, 0)]
    h = 0.002
    tau = np.arange(0, 41) * h
    _, g = correlations(lv, rho, probes, tau=tau)
    for i, op in enumerate(probes):
        b = vec(op @ rho)
        w = vec(op.toarray().conj())
        bt = spla.expm_multiply(lv.matrix.tocsc(), b, start=0, stop=tau[-1], num=tau.size,
                                endpoint=True)
        ref = bt @ w
        assert np.abs(g[:, i] - ref).max() < 1e-8 * abs(ref[0])


def test_unstable_step_is_reported():
    lv = pumped_cavity(2)
    rho = steady_state(lv)
    with pytest.raises(IntegrationError):
        correlation(lv, rho, lv.operators.cavities[0], dt=0.2, tau_max=40.0)


def test_lorentzian_transform():
    gamma, w0 = 2.0, 1.5
    h = 1e-3
    tau = np.arange(0, int(25 / gamma / h)) * h
    g = np.exp((1j * w0 - gamma / 2) * tau)
    omega = np.linspace(-10, 10, 2001)
    trace = spectrum(g, tau, omega)
    ref = gamma / ((omega - w0) ** 2 + gamma ** 2 / 4)
    assert np.abs(trace.intensity - ref).max() < 1e-5 * ref.max()
    peak, = find_peaks(trace)
    assert peak.omega == pytest.approx(w0, abs=0.01)
    assert peak.fwhm == pytest.approx(gamma, rel=1e-3)
    fft = spectrum(g, tau)
    i = np.argmin(abs(fft.omega - w0))
    assert fft.intensity[i] == pytest.approx(gamma / ((fft.omega[i] - w0) ** 2 + gamma ** 2 / 4),
                                             rel=1e-4)
    assert trace.normalized().intensity.max() == pytest.approx(1.0)


def test_truncated_correlation_warns():
    tau = np.linspace(0, 1, 101)
    with pytest.warns(SpectrumTruncationWarning):
        spectrum(np.exp(-tau), tau, np.linspace(-1, 1, 5))


def test_dimension_guard():
    r = Realization.resonant(SystemParams.standard(3, 3))
    with pytest.raises(DimensionGuardError) as info:
        build_liouvillian(r, 0, 0.1, fock_cutoff=2, max_dimension=10_000)
    assert info.value.dimension == 27 * 512
    with pytest.raises(DimensionGuardError):
        emission_spectra(r, max_dimension=100)


def test_vec_round_trip():
    x = np.arange(12.0).reshape(3, 4)[:, :3]
    assert np.array_equal(unvec(vec(x), 3), x)
    assert vec(x)[1] == x[1, 0]


def test_vacuum_rabi_doublet_matches_effective_hamiltonian():
    p = SystemParams.standard(1, 1)
    r = Realization.resonant(p)
    with warnings.catch_warnings():
        warnings.simplefilter("error", SpectrumTruncationWarning)
        trace, = emission_spectra(r, probes=["cav_0"], fock_cutoff=2)
    peaks = find_peaks(trace)
    energies = [s.energy.real for s in eigensolve(build_h_eff(r))]
    assert len(peaks) == 2
    for pk in peaks:
        assert min(abs(pk.omega - e) for e in energies) < 0.5 * pk.fwhm
    assert np.allclose(sorted(pk.omega for pk in peaks), [-p.g, p.g], atol=2.0)
    assert math.isclose(peaks[0].height, peaks[1].height, rel_tol=1e-3)
