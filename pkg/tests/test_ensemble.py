import json
import math

import numpy as np
import pytest

from tchm import ensemble
from tchm.ensemble import PRESETS, SweepSpec, figure_preset, result_rows, run_sweep
from tchm.errors import EigensolveError
from tchm.model import SystemParams


def small_spec(**kw):
    base = SystemParams.standard(3, 2)
    args = dict(axis="delta", values=(0.0, 10.0, 40.0), realizations=6, master_seed=11,
                observables=("eigenvalues", "p_n", "p_p", "mps", "lowest"))
    args.update(kw)
    return SweepSpec(base, **args)


def test_zero_disorder_has_zero_spread():
    spec = small_spec(values=(0.0,), realizations=20)
    res = run_sweep(spec)
    for name in ("re_energy", "im_energy", "p_n_norm", "p_p_norm"):
        assert np.all(res.get(name, 0.0).std == 0.0)
    assert res.get("re_energy", 0.0).count == 20


def test_single_realization_has_zero_spread():
    res = run_sweep(small_spec(realizations=1))
    for (s, v, name), stat in res.stats.items():
        assert np.all(stat.std == 0.0)


def test_bit_identical_across_worker_counts():
    spec = small_spec()
    serial = run_sweep(spec, jobs=1)
    parallel = run_sweep(spec, jobs=2)
    assert serial.stats.keys() == parallel.stats.keys()
    for key in serial.stats:
        a, b = serial.stats[key], parallel.stats[key]
        assert np.array_equal(a.mean, b.mean) and np.array_equal(a.std, b.std)
    assert serial.provenance == parallel.provenance


def test_mean_and_population_std_by_hand():
    from tchm.model import derive_realization_seed
    spec = small_spec(values=(25.0,), realizations=4, observables=("lowest",))
    res = run_sweep(spec)
    params = spec.base.with_(delta=25.0)
    vals = [ensemble.realization_observables(params, derive_realization_seed(11, i),
                                             {"lowest"})["lowest_p_p_norm"] for i in range(4)]
    stat = res.get("lowest_p_p_norm", 25.0)
    assert stat.mean == pytest.approx(np.mean(vals), rel=1e-15)
    assert stat.std == pytest.approx(np.std(vals), rel=1e-12)


def test_eigensolve_failure_aborts_with_seed(monkeypatch):
    def broken(matrix, seed=None):
        raise EigensolveError("no convergence", seed=seed)
    monkeypatch.setattr(ensemble, "solve", broken)
    with pytest.raises(EigensolveError) as info:
        run_sweep(small_spec(realizations=2))
    from tchm.model import derive_realization_seed
    assert info.value.seed == derive_realization_seed(11, 0)


def test_presets_and_unknown_name():
    for name in PRESETS:
        spec = figure_preset(name)
        assert spec.realizations == (1 if name == "figA1" else 100)
    fig3 = figure_preset("fig3")
    assert (fig3.base.n_cavities, fig3.base.emitters_per_cavity) == (5, 3)
    assert fig3.base.j_over_g == pytest.approx(0.1)
    assert fig3.values[-1] == pytest.approx(fig3.base.g * math.sqrt(3))
    fig7 = figure_preset("fig7")
    assert fig7.values[0] == 3 and fig7.base.delta == pytest.approx(fig7.base.g * math.sqrt(3))
    fig8 = figure_preset("fig8")
    assert fig8.base.n_cavities == 65 and fig8.values == tuple(range(65))
    with pytest.raises(ValueError, match="fig3, fig4"):
        figure_preset("fig99")


def test_spec_validation_and_round_trip():
    with pytest.raises(ValueError):
        small_spec(axis="temperature")
    with pytest.raises(ValueError):
        small_spec(observables=("entropy",))
    with pytest.raises(ValueError):
        small_spec(series_axis="delta", series_values=(1.0,))
    spec = figure_preset("fig8", realizations=3)
    back = SweepSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
    assert back == spec and back.digest() == spec.digest()


def test_state_index_rows_and_occupancies():
    base = SystemParams.standard(3, 1)
    spec = SweepSpec(base, "state_index", (0, 2), realizations=2,
                     observables=("eigenvalues", "occupancies"))
    res = run_sweep(spec)
    rows = result_rows(res, "photon")
    assert {(r[2], r[3]) for r in rows} == {(0, 0), (0, 1), (0, 2), (2, 0), (2, 1), (2, 2)}
    e = res.get("re_energy", 2)
    assert np.ndim(e.mean) == 0
    with pytest.raises(ValueError):
        run_sweep(spec.with_(values=(99,)))


def test_fig6_parity_branches_converge():
    spec = figure_preset("fig6", realizations=30)
    res = run_sweep(spec)
    for jg in spec.series_values:
        n, mean, _ = res.curve("mps_lower_p_n_norm", series_value=jg)
        first = abs(mean[1] - mean[0])
        last = abs(mean[-1] - mean[-2])
        assert last < first, (jg, mean)


def test_fig4_polaritonicity_falls_with_hopping():
    spec = figure_preset("fig4", realizations=10)
    res = run_sweep(spec)
    _, mean, _ = res.curve("lowest_p_p_norm", series_value=0.0)
    assert np.all(np.diff(mean) < 0)


def test_anderson_trend_small():
    spec = figure_preset("fig3", realizations=40)
    res = run_sweep(spec)
    _, mean, _ = res.curve("p_n_norm")
    lower = mean[:, :5].mean(axis=1)
    assert lower[-1] < lower[0] - 0.1
