import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tchm.errors import ConfigError
from tchm.model import (TWO_PI, Realization, SystemParams, build_basis, config_values,
                        derive_realization_seed, format_config, parse_config,
                        sample_disorder)


def test_standard_units():
    p = SystemParams.standard(5, 3, j_over_g=0.1, delta_over_g_sqrt_m=0.5)
    assert p.g == pytest.approx(TWO_PI * 5)
    assert p.kappa == pytest.approx(TWO_PI * 10)
    assert p.gamma == pytest.approx(TWO_PI / 5.8)
    assert p.j_hop == pytest.approx(0.1 * p.g)
    assert p.delta == pytest.approx(0.5 * p.g * math.sqrt(3))
    assert p.dimension == 20 and p.n_emitters == 15


@pytest.mark.parametrize("kwargs", [
    dict(n_cavities=0, emitters_per_cavity=1),
    dict(n_cavities=2, emitters_per_cavity=-1),
    dict(n_cavities=2, emitters_per_cavity=1, kappa=-1.0),
    dict(n_cavities=2, emitters_per_cavity=1, delta=float("nan")),
    dict(n_cavities=2, emitters_per_cavity=1, boundary="twisted"),
    dict(n_cavities=2.5, emitters_per_cavity=1),
])
def test_invalid_params(kwargs):
    with pytest.raises(ValueError):
        SystemParams(**kwargs)


def test_basis_layout():
    b = build_basis(SystemParams(3, 2))
    assert b.dimension == 9
    assert [b.index_of_cavity(n) for n in range(3)] == [0, 1, 2]
    assert b.index_of_emitter(0, 0) == 3
    assert b.index_of_emitter(2, 1) == 8
    for i in range(9):
        kind, *where = b.element_of(i)
        back = b.index_of_cavity(*where) if kind == "cavity" else b.index_of_emitter(*where)
        assert back == i
    assert b.labels()[0] == "cav_0" and b.labels()[-1] == "em_2_1"


def test_disorder_zero_width_is_exact():
    p = SystemParams(4, 3, omega_c=1.25)
    r = sample_disorder(p, 123)
    assert np.array_equal(r.omega_e, np.full((4, 3), 1.25))


def test_disorder_deterministic_and_read_only():
    p = SystemParams(4, 3, delta=2.0)
    a, b = sample_disorder(p, 9), sample_disorder(p, 9)
    assert np.array_equal(a.omega_e, b.omega_e)
    assert not np.array_equal(a.omega_e, sample_disorder(p, 10).omega_e)
    with pytest.raises(ValueError):
        a.omega_e[0, 0] = 0.0


def test_disorder_width_is_two_sigma():
    # Delta is the full width 2 sigma of the Gaussian
    p = SystemParams(200, 100, omega_c=3.0, delta=2.0)
    w = sample_disorder(p, 1).omega_e
    assert w.mean() == pytest.approx(3.0, abs=0.04)  # 5 standard errors
    assert w.std() == pytest.approx(1.0, rel=0.025)


def test_realization_seed_injective_and_stable():
    seeds = [derive_realization_seed(42, i) for i in range(20000)]
    assert len(set(seeds)) == len(seeds)
    assert all(0 <= s < 2 ** 64 for s in seeds)
    assert derive_realization_seed(42, 7) == derive_realization_seed(42, 7)
    assert derive_realization_seed(42, 7) != derive_realization_seed(43, 7)


def test_resonant_realization():
    r = Realization.resonant(SystemParams(2, 2, omega_c=0.5))
    assert np.all(r.omega_e == 0.5)


CFG = """
# two cavities, two emitters each
n_cavities = 2
emitters_per_cavity = 2
j_over_g = 0.1
delta_mode = units_of_g_sqrt_m
delta_value = 0.25   # quarter of the collective coupling
seed = 7
"""


def test_parse_config():
    cfg = parse_config(CFG)
    p = cfg.params
    assert cfg.seed == 7
    assert (p.n_cavities, p.emitters_per_cavity) == (2, 2)
    assert p.delta == pytest.approx(0.25 * p.g * math.sqrt(2))
    assert p.kappa == pytest.approx(TWO_PI * 10)


@pytest.mark.parametrize("text, key, line", [
    ("n_cavities = 2\nemitters_per_cavity = 1\nfoo = 1\n", "foo", 3),
    ("n_cavities = 2\nn_cavities = 3\nemitters_per_cavity = 1\n", "n_cavities", 2),
    ("n_cavities = two\nemitters_per_cavity = 1\n", "n_cavities", 1),
    ("n_cavities = 2\nemitters_per_cavity = 1\nboundary = ring\n", "boundary", 3),
    ("n_cavities = 2\n", "emitters_per_cavity", None),
])
def test_config_errors_locate_problem(text, key, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == key
    assert info.value.line == line
    assert key in str(info.value)


def test_config_line_without_equals():
    with pytest.raises(ConfigError) as info:
        parse_config("n_cavities 2\n")
    assert info.value.line == 1


@given(n=st.integers(1, 8), m=st.integers(0, 5), jg=st.floats(-5, 5),
       d=st.floats(0, 20), boundary=st.sampled_from(["open", "periodic"]),
       seed=st.integers(0, 2 ** 63))
def test_config_round_trip(n, m, jg, d, boundary, seed):
    p = SystemParams.standard(n, m, j_over_g=jg, boundary=boundary).with_(delta=d)
    cfg = parse_config(format_config(p, seed))
    assert cfg.seed == seed
    q = cfg.params
    for f in ("g", "kappa", "gamma", "delta", "j_hop", "omega_c"):
        assert getattr(q, f) == pytest.approx(getattr(p, f), rel=1e-14, abs=1e-14)
    assert (q.n_cavities, q.emitters_per_cavity, q.boundary) == (n, m, boundary)


def test_config_values_units_of_g_sqrt_m():
    p = SystemParams.standard(3, 4, delta_over_g_sqrt_m=0.75)
    assert config_values(p, "units_of_g_sqrt_m")["delta_value"] == pytest.approx(0.75)
    with pytest.raises(ValueError):
        config_values(SystemParams(3, 0), "units_of_g_sqrt_m")
