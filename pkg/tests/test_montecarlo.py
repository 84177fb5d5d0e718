import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_array_equal

from netadapt import montecarlo
from netadapt.data_model import make_ensemble
from netadapt.graph import complete_topology
from netadapt.montecarlo import RunSpec, monte_carlo, monte_carlo_one, run_trial, steady_state, to_db
from netadapt.scenarios import scenario_library, standard_configs
from netadapt.strategies import AlgorithmConfig


def small_spec(**kw):
    sc = scenario_library("partial_obs_3node")
    base = dict(topology=sc.topology, ensemble=sc.ensemble, configs=sc.configs, horizon=300, trials=6, seed=11)
    base.update(kw)
    return RunSpec(**base)


def test_steady_state_examples():
    assert steady_state(np.full(50, 3.0), 10) == 3.0
    assert steady_state(np.arange(1, 101), 1) == 100.0
    with pytest.raises(ValueError):
        steady_state(np.ones(5), 0)
    with pytest.raises(ValueError):
        steady_state(np.ones(5), 6)


@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=50), st.data())
def test_steady_state_is_tail_mean(values, data):
    w = data.draw(st.integers(1, len(values)))
    assert steady_state(values, w) == pytest.approx(np.mean(values[-w:]))


def test_run_spec_validation():
    with pytest.raises(ValueError):
        small_spec(horizon=0)
    with pytest.raises(ValueError):
        small_spec(trials=0)
    with pytest.raises(ValueError):
        small_spec(tail_window=301)
    with pytest.raises(ValueError):
        small_spec(configs=())
    with pytest.raises(ValueError):
        small_spec(init="ones")
    sc = scenario_library("partial_obs_3node")
    with pytest.raises(ValueError, match="unique"):
        small_spec(configs=(sc.configs[0], sc.configs[0]))
    assert small_spec().tail_window == 30


def test_noiseless_start_at_truth_stays_zero():
    topo = complete_topology(3)
    ens = make_ensemble(2, [0.3, -0.2], [np.eye(2)] * 3, [0.0] * 3)
    spec = RunSpec(topo, ens, standard_configs(topo, 0.05, etas=(0.0, 1.0)), horizon=200, trials=1)
    for cfg in spec.configs:
        trace = run_trial(spec, cfg, 0, initial_primal=np.tile(ens.truth, (3, 1)))
        assert_array_equal(trace.msd, 0.0)
        assert not trace.diverged


def test_run_trial_is_deterministic():
    spec = small_spec()
    for cfg in spec.configs:
        a, b = run_trial(spec, cfg, 3), run_trial(spec, cfg, 3)
        assert_array_equal(a.msd, b.msd)
        assert not np.array_equal(a.msd, run_trial(spec, cfg, 4).msd)


@pytest.mark.parametrize("init", ["zero", "random"])
def test_single_trial_curve_equals_run_trial(init):
    spec = small_spec(trials=1, init=init)
    for cfg in spec.configs:
        curve = monte_carlo_one(spec, cfg)
        assert_array_equal(curve.msd, run_trial(spec, cfg, 0).msd)


def test_curve_is_fixed_order_mean_of_trials():
    spec = small_spec(trials=5)
    cfg = spec.configs[1]
    acc = np.zeros(spec.horizon)
    for j in range(5):
        acc += run_trial(spec, cfg, j).msd
    assert_array_equal(monte_carlo_one(spec, cfg).msd, acc / 5)


def test_result_does_not_depend_on_batch_size(monkeypatch):
    spec = small_spec(horizon=600, trials=7, init="random")
    ref = monte_carlo(spec)
    monkeypatch.setattr(montecarlo, "_MAX_BLOCK_ELEMS", montecarlo.CHUNK * 9 * 2)  # groups of two trials
    assert montecarlo._group_size(spec) == 2
    again = monte_carlo(spec)
    for label in ref:
        assert_array_equal(ref[label].msd, again[label].msd)
        assert_array_equal(ref[label].per_agent_msd, again[label].per_agent_msd)
        assert ref[label].initial_msd == again[label].initial_msd


def test_random_start_is_seeded_and_separate_from_data():
    spec = small_spec(init="random")
    cfg = spec.configs[0]
    assert_array_equal(run_trial(spec, cfg, 2).msd, run_trial(spec, cfg, 2).msd)
    zero = monte_carlo_one(small_spec(), cfg)
    rand = monte_carlo_one(spec, cfg)
    assert zero.initial_msd == pytest.approx(1.0)  # every agent starts |w°|^2 = 1 away
    assert rand.initial_msd > 2.0  # 1 + M on average


def test_two_node_ah_diverges_at_large_step():
    sc = scenario_library("two_node", mu=1.1)
    spec = RunSpec(sc.topology, sc.ensemble, (sc.config("ah"),), horizon=10_000, trials=1)
    trace = run_trial(spec, sc.config("ah"), 0)
    assert trace.diverged
    assert trace.diverged_at < 10_000
    assert np.all(np.isinf(trace.msd[trace.diverged_at:]))
    assert np.all(np.isfinite(trace.msd[: trace.diverged_at]))
    curve = monte_carlo_one(RunSpec(sc.topology, sc.ensemble, (sc.config("ah"),), horizon=500, trials=3),
                            sc.config("ah"))
    assert curve.diverged and curve.diverged_trials == 3
    assert curve.steady_state_msd == np.inf and curve.steady_state_msd_db == np.inf


def test_curve_fields():
    spec = small_spec()
    curve = monte_carlo(spec)["diffusion"]
    assert curve.msd.shape == (300,)
    assert curve.per_agent_msd.shape == (3,)
    assert np.all(curve.msd >= 0)
    assert curve.steady_state_msd == pytest.approx(curve.msd[-30:].mean())
    # network MSD is the average of per-agent MSDs over the same tail
    assert curve.per_agent_msd.mean() == pytest.approx(curve.steady_state_msd, rel=1e-12)
    assert_array_equal(curve.msd_db, to_db(curve.msd))


def test_halving_step_halves_msd():
    sc = scenario_library("two_node")
    topo, ens = sc.topology, sc.ensemble
    out = {}
    for mu in (0.01, 0.005):
        configs = (
            AlgorithmConfig("noncoop", mu),
            AlgorithmConfig("diffusion_atc", mu, combination=sc.config("diffusion").combination),
            AlgorithmConfig("primal_dual", mu, eta=1.0),
        )
        spec = RunSpec(topo, ens, configs, horizon=8000, trials=100, seed=5, tail_window=4000)
        out[mu] = {k: v.steady_state_msd for k, v in monte_carlo(spec).items()}
    for label in out[0.01]:
        assert out[0.005][label] / out[0.01][label] == pytest.approx(0.5, rel=0.15)


def test_per_agent_equalization_for_primal_strategies():
    sc = scenario_library("bench_n20", mu=1e-3)
    configs = (sc.config("diffusion"), sc.config("consensus"))
    spec = RunSpec(sc.topology, sc.ensemble, configs, horizon=8000, trials=50, seed=3, tail_window=3000)
    for curve in monte_carlo(spec).values():
        assert np.max(np.abs(curve.per_agent_msd_db - curve.steady_state_msd_db)) <= 1.0
