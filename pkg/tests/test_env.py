import numpy as np
import pytest

from hetnetsim import channel as ch
from hetnetsim import env as envm
from hetnetsim.errors import ContractViolation, ValidationError
from hetnetsim.topology import (
    BaseStation,
    NetworkTopology,
    ScenarioKind,
    Tier,
    generate_scenario,
)


def single_station_topo(n_users=2, seed=0):
    rng = np.random.default_rng(seed)
    users = rng.uniform(100, 1900, size=(n_users, 2))
    return NetworkTopology(
        stations=[BaseStation(0, Tier.MACRO, (1000.0, 1000.0), 1000, 40000, 20e6)],
        users=users)


def make_env(topo=None, horizon=5, **kw):
    topo = topo if topo is not None else generate_scenario(ScenarioKind.DENSE_URBAN, 10, 0)
    return envm.HetNetEnv(envm.EnvConfig(topology=topo, horizon=horizon, **kw))


# ---------------------------------------------------------------- fairness

def test_jain_equal_allocation():
    assert envm.jain_fairness([3.0] * 7) == pytest.approx(1.0, rel=1e-12)


def test_jain_single_spike():
    z = np.zeros(8)
    z[2] = 5.0
    assert envm.jain_fairness(z) == pytest.approx(1.0 / 8.0, rel=1e-12)


def test_jain_one_two_three():
    assert envm.jain_fairness([1.0, 2.0, 3.0]) == pytest.approx(6.0 / 7.0, abs=1e-12)


def test_jain_all_zero_defined_as_one():
    assert envm.jain_fairness(np.zeros(5)) == 1.0


def test_jain_scale_invariance_and_bounds():
    rng = np.random.default_rng(21)
    for _ in range(1000):
        n = int(rng.integers(1, 12))
        z = rng.uniform(0, 10, size=n)
        if not np.any(z):
            continue
        j = envm.jain_fairness(z)
        assert 1.0 / n - 1e-12 <= j <= 1.0 + 1e-12
        c = rng.uniform(0.01, 100)
        assert envm.jain_fairness(c * z) == pytest.approx(j, rel=1e-9)


def test_jain_empty_rejected():
    with pytest.raises(ValidationError):
        envm.jain_fairness([])


# ---------------------------------------------------------------- reward

def test_reward_throughput_only():
    r = envm.compute_reward([1e6, 2e6], [1.0], kappa=1.0, beta=0.0, phi=0.0)
    assert r == pytest.approx(3.0, rel=1e-12)


def test_reward_power_only():
    r = envm.compute_reward([0.0], [40_000.0], kappa=0.0, beta=0.01, phi=0.0)
    assert r == pytest.approx(-0.4, rel=1e-12)


def test_reward_zero_everything():
    assert envm.compute_reward([0.0], [0.0], kappa=1.0, beta=0.01, phi=0.0) == 0.0


def test_reward_decomposition_exact():
    rng = np.random.default_rng(5)
    t = rng.uniform(0, 1e7, size=9)
    p = rng.uniform(0, 4e4, size=4)
    r = envm.compute_reward(t, p, kappa=1.0, beta=0.0, phi=0.0)
    assert r == np.sum(t) / 1e6


# ---------------------------------------------------------------- layout

def test_state_action_lengths():
    assert envm.state_length(13, 50) == 839
    assert envm.action_length(13, 50) == 76
    rng = np.random.default_rng(2)
    for _ in range(5):
        n_b, n_u = int(rng.integers(1, 9)), int(rng.integers(1, 30))
        stations = [BaseStation(i, Tier.MACRO,
                                (100.0 + 150.0 * i, 500.0), 1000, 40000, 20e6)
                    for i in range(n_b)]
        topo = NetworkTopology(stations=stations,
                               users=rng.uniform(0, 2000, size=(n_u, 2)))
        env = make_env(topo)
        s = env.reset(0)
        assert s.shape == (envm.state_length(n_b, n_u),)
        assert env.action_dim == envm.action_length(n_b, n_u)
        out = env.step(np.full(env.action_dim, 0.5))
        assert out.next_state.shape == s.shape
        assert np.all(out.next_state >= 0) and np.all(out.next_state <= 1)


# ---------------------------------------------------------------- decode

def test_decode_affine_endpoints_and_midpoint():
    topo = generate_scenario(ScenarioKind.DENSE_URBAN, 4, 0)
    env = make_env(topo)
    env.reset(0)
    gains = env.current_gains
    n_b = topo.n_stations
    for val, expect in [(0.0, topo.p_min_vec()),
                        (1.0, topo.p_max_vec()),
                        (0.5, (topo.p_min_vec() + topo.p_max_vec()) / 2)]:
        raw = np.concatenate([np.full(n_b, val), np.zeros(n_b), np.zeros(4)])
        alloc = envm.decode_action(raw, topo, gains)
        np.testing.assert_allclose(alloc.powers_mw, expect, rtol=0, atol=0)


def test_decode_equal_scores_split_band():
    topo = single_station_topo(n_users=2)
    gains = np.full((1, 2), 1e-9)
    raw = np.array([0.5, 1.0, 0.7, 0.7])
    alloc = envm.decode_action(raw, topo, gains)
    np.testing.assert_allclose(alloc.user_bands_hz, [10e6, 10e6], rtol=1e-12)


def test_decode_clamp_idempotent():
    topo = generate_scenario(ScenarioKind.DENSE_URBAN, 6, 1)
    env = make_env(topo)
    env.reset(3)
    gains = env.current_gains
    rng = np.random.default_rng(8)
    raw = rng.uniform(-2, 3, size=env.action_dim)
    a1 = envm.decode_action(raw, topo, gains)
    a2 = envm.decode_action(envm.clamp_action(raw), topo, gains)
    np.testing.assert_array_equal(a1.powers_mw, a2.powers_mw)
    np.testing.assert_array_equal(a1.user_bands_hz, a2.user_bands_hz)
    np.testing.assert_array_equal(a1.association, a2.association)


def test_decode_association_one_station_per_user():
    topo = generate_scenario(ScenarioKind.DENSE_URBAN, 12, 2)
    env = make_env(topo)
    env.reset(1)
    rng = np.random.default_rng(4)
    alloc = envm.decode_action(rng.uniform(0, 1, env.action_dim), topo,
                               env.current_gains)
    np.testing.assert_array_equal(alloc.association.sum(axis=0), np.ones(12, dtype=int))


def test_decode_single_station_serves_all():
    topo = single_station_topo(n_users=5, seed=3)
    gains = np.random.default_rng(0).uniform(1e-10, 1e-8, size=(1, 5))
    alloc = envm.decode_action(np.full(7, 0.4), topo, gains)
    assert np.all(alloc.association == 1)


def test_decode_band_conservation():
    topo = generate_scenario(ScenarioKind.DENSE_URBAN, 15, 4)
    env = make_env(topo)
    env.reset(2)
    rng = np.random.default_rng(9)
    alloc = envm.decode_action(rng.uniform(0, 1, env.action_dim), topo,
                               env.current_gains)
    serving = alloc.serving_index()
    for b in range(topo.n_stations):
        members = serving == b
        cap = alloc.band_fractions[b] * topo.stations[b].band_hz
        if members.any():
            assert np.sum(alloc.user_bands_hz[members]) == pytest.approx(cap, rel=1e-9)


# ---------------------------------------------------------------- state

def test_build_state_normalization_endpoints():
    topo = single_station_topo(n_users=1)
    topo.stations[0].position = np.array([0.0, 0.0])
    state = envm.build_state(np.array([40000.0]), np.array([0.0]),
                             np.array([0.0]), np.array([[1]]), topo)
    assert state[0] == 1.0                     # power at p_max
    assert state[1] == 0.0                     # no interference
    n_b, n_u = 1, 1
    bs_x = n_b + n_u + n_b * n_u
    assert state[bs_x] == 0.0 and state[bs_x + 1] == 0.0   # corner station


def test_build_state_interference_squash_midpoint():
    topo = single_station_topo(n_users=1)
    state = envm.build_state(np.array([1000.0]), np.array([ch.NOISE_REF_MW]),
                             np.array([0.0]), np.array([[1]]), topo)
    assert state[1] == pytest.approx(0.5, rel=1e-12)


def test_build_state_dimension_mismatch():
    topo = single_station_topo(n_users=2)
    with pytest.raises(ContractViolation):
        envm.build_state(np.zeros(3), np.zeros(2), np.zeros(2),
                         np.zeros((1, 2)), topo)


# ---------------------------------------------------------------- reset/step

def test_reset_deterministic():
    env1, env2 = make_env(), make_env()
    np.testing.assert_array_equal(env1.reset(42), env2.reset(42))


def test_reset_power_entries_zero():
    env = make_env()
    s = env.reset(0)
    np.testing.assert_array_equal(s[:env.n_stations], np.zeros(env.n_stations))


def test_reset_replaces_users():
    env = make_env()
    env.reset(0)
    u0 = env.topology.users.copy()
    env.reset(1)
    assert not np.array_equal(u0, env.topology.users)


def test_hotspot_placement_respected_on_reset():
    topo = generate_scenario(ScenarioKind.HOTSPOT, 100, 0)
    env = make_env(topo, user_placement=ScenarioKind.HOTSPOT)
    env.reset(5)
    micros = np.array([bs.position for bs in env.topology.stations
                       if bs.tier is Tier.MICRO])
    d = np.linalg.norm(env.topology.users[:, None, :] - micros[None, :, :], axis=2)
    assert np.sum(d.min(axis=1) <= 150.0) >= 80


def test_trajectory_bit_identical():
    actions = np.random.default_rng(3).uniform(0, 1, size=(5, 76))
    rewards = []
    states = []
    for _ in range(2):
        env = envm.HetNetEnv(envm.EnvConfig(
            topology=generate_scenario(ScenarioKind.DENSE_URBAN, 50, 0), horizon=5))
        s = env.reset(17)
        traj_r, traj_s = [], [s]
        for t in range(5):
            out = env.step(actions[t])
            traj_r.append(out.reward)
            traj_s.append(out.next_state)
        rewards.append(traj_r)
        states.append(np.stack(traj_s))
    assert rewards[0] == rewards[1]
    np.testing.assert_array_equal(states[0], states[1])


def test_exactly_horizon_steps():
    env = make_env(horizon=4)
    env.reset(0)
    for t in range(4):
        out = env.step(np.full(env.action_dim, 0.5))
        assert out.done == (t == 3)
    with pytest.raises(ContractViolation):
        env.step(np.full(env.action_dim, 0.5))


def test_step_before_reset():
    env = make_env()
    with pytest.raises(ContractViolation):
        env.step(np.zeros(env.action_dim))


def test_zero_action_reward_closed_form():
    topo = generate_scenario(ScenarioKind.DENSE_URBAN, 10, 0)
    env = make_env(topo, horizon=3)
    env.reset(0)
    out = env.step(np.zeros(env.action_dim))
    expected = -0.01 * np.sum(topo.p_min_vec()) / 1e3 + 0.96 * 1.0
    assert np.all(out.info["per_user_throughput"] == 0.0)
    assert out.reward == pytest.approx(expected, rel=1e-12)
    assert out.info["fairness"] == 1.0


def test_more_power_single_station_never_hurts():
    # same seed -> same fading draws, so throughputs are comparable
    topo = single_station_topo(n_users=3, seed=1)
    lo, hi = [], []
    for p_adj, sink in [(0.2, lo), (0.9, hi)]:
        env = envm.HetNetEnv(envm.EnvConfig(topology=topo, horizon=3))
        env.reset(11)
        action = np.concatenate([[p_adj], [1.0], np.full(3, 0.5)])
        for _ in range(3):
            sink.append(env.step(action).info["per_user_throughput"])
    assert np.all(np.concatenate(hi) >= np.concatenate(lo))


def test_info_metric_ranges():
    env = make_env()
    env.reset(0)
    rng = np.random.default_rng(0)
    out = env.step(rng.uniform(-1, 2, env.action_dim))
    for key in ("mean_band_fraction", "mean_power_norm", "mean_sched_score",
                "fairness"):
        assert 0.0 <= out.info[key] <= 1.0


def test_trace_emission(tmp_path):
    path = str(tmp_path / "trace.csv")
    topo = generate_scenario(ScenarioKind.SPARSE_SUBURBAN, 5, 0)
    env = make_env(topo, horizon=2, trace_path=path)
    env.reset(0)
    env.step(np.full(env.action_dim, 0.3))
    env.step(np.full(env.action_dim, 0.3))
    env.close()
    lines = open(path).read().strip().splitlines()
    assert lines[0] == "episode,step,reward,fairness,total_power_mW,sum_throughput_Mbps"
    assert len(lines) == 3


def test_env_requires_users():
    topo = generate_scenario(ScenarioKind.DENSE_URBAN, 1, 0)
    empty = NetworkTopology(stations=topo.stations, users=np.empty((0, 2)))
    with pytest.raises(ValidationError):
        envm.EnvConfig(topology=empty)
