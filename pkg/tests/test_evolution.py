"""Two-phase evolutionary loop: phases, gossip, selection events, determinism."""
import math
from pathlib import Path

import numpy as np
import pytest

from swarmevolve.arena import Pose, sense, step_kinematics
from swarmevolve.config import ExperimentConfig
from swarmevolve.evolution import (Phase, RunObserver, begin_evaluation, build_trace,
                                   finish_generation, init_simulation, run_simulation,
                                   step_swarm)
from swarmevolve.neuro import ControlOutput, Genome, activate

DESK_ARENA = str(Path(__file__).resolve().parent.parent / "configs" / "desk.arena")


def tiny_config(**kw):
    base = dict(task="navigation", swarm_size=3, sim_steps=1500, t_e_base=120,
                t_e_jitter=30, t_l=12, runs_per_method=2, arena_file=DESK_ARENA)
    base.update(kw)
    return ExperimentConfig(**base)


def freeze_pair(sim, poses, te, steps_left, sigma_zeroish=False):
    """Pin a 2-agent sim into a hand-built schedule with all-zero genomes."""
    n_weights = sim.task.genome_length
    for i, (x, y, h) in enumerate(poses):
        sim.x[i], sim.y[i], sim.heading[i] = x, y, h
        genome = Genome(np.zeros(n_weights), origin_agent=i, uid=sim.next_uid())
        sim.agents[i].active_genome = genome
        sim.weight_mat[i] = genome.weights.reshape(2, -1)
        sim.agents[i].inbox.clear()
        sim.agents[i].fitness_history.clear()
        sim.agents[i].generation_index = 0
    sim.phase[:] = Phase.EVALUATING
    sim.current_te[:] = te
    sim.steps_left[:] = steps_left
    sim.fitness_accum[:] = 0.0
    sim.prev_out[:] = 0.0
    if sim.observer is not None:
        sim.observer.phase_events.clear()
        sim.observer.broadcasts.clear()
        sim.observer.selections.clear()
        sim.observer.states.clear()
    return sim


# ---------------------------------------------------------------------------
# begin_evaluation

def test_evaluation_length_jitter_range():
    cfg = ExperimentConfig(task="navigation", swarm_size=1, t_e_base=2000, t_e_jitter=500,
                           arena_file=DESK_ARENA)
    sim = init_simulation(cfg, np.random.default_rng(0))
    lengths = set()
    for _ in range(10_000):
        begin_evaluation(sim, 0, record_event=False)
        lengths.add(int(sim.current_te[0]))
    assert min(lengths) >= 1501
    assert max(lengths) == 2000
    assert len(lengths) == 500  # every value of 2000 - rand(0, 500) shows up


def test_begin_evaluation_resets_state():
    cfg = tiny_config()
    sim = init_simulation(cfg, np.random.default_rng(1))
    sim.fitness_accum[0] = 42.0
    sim.prev_out[0] = (0.5, -0.5)
    sim.agents[0].inbox[99] = (sim.agents[1].active_genome, 1.0)
    begin_evaluation(sim, 0)
    assert sim.fitness_accum[0] == 0.0
    assert np.all(sim.prev_out[0] == 0.0)
    assert sim.agents[0].inbox == {}
    assert sim.phase[0] == Phase.EVALUATING


def test_identical_rng_streams_give_identical_lengths():
    cfg = tiny_config()
    sims = [init_simulation(cfg, np.random.default_rng(7)) for _ in range(2)]
    for sim in sims:
        sim.rng = np.random.default_rng(123)
        begin_evaluation(sim, 0, record_event=False)
    assert sims[0].current_te[0] == sims[1].current_te[0]


# ---------------------------------------------------------------------------
# single-agent and isolation behavior

def test_single_agent_selects_only_itself():
    cfg = tiny_config(swarm_size=1, sim_steps=2000, task="navigation")
    obs = RunObserver()
    trace = run_simulation(cfg, 5, method="random", observer=obs)
    assert len(obs.selections) >= 5
    for _, agent, entry_uids, selected_uid, child_uid, parent_uid in obs.selections:
        assert agent == 0
        assert len(entry_uids) == 1  # own genome only
        assert selected_uid == entry_uids[0]
        assert parent_uid == selected_uid  # next genome is a mutation of its own
    assert len(trace.swarm_fitness) >= 5


def test_out_of_range_agents_evolve_independently():
    cfg = ExperimentConfig(task="navigation", swarm_size=2, sim_steps=1200, t_e_base=100,
                           t_e_jitter=20, t_l=10, sigma=1e-9, comm_radius=50.0)
    obs = RunObserver(record_broadcasts=True)
    rng = np.random.default_rng(2)
    sim = init_simulation(cfg, rng, method="random", observer=obs)
    # opposite corners of the default 1000x1000 arena, zero genomes: nobody moves
    freeze_pair(sim, [(100.0, 100.0, 0.0), (900.0, 900.0, 1.0)], te=[100, 100],
                steps_left=[100, 60])
    for _ in range(cfg.sim_steps):
        step_swarm(sim)
    assert obs.broadcasts == []
    assert all(len(s[2]) == 1 for s in obs.selections)  # local lists are always just self
    # lineages never cross: each agent only ever mutates genomes it created
    for _, agent, _, _, _, _ in obs.selections:
        assert sim.agents[agent].active_genome.origin_agent == agent


def test_two_agent_interleaved_schedule_oracle():
    """Hand-simulated 2-agent schedule: each full cycle collects exactly self + peer.

    Agent 0 evaluates for 10 steps then listens 5; agent 1 starts with 3
    evaluation steps left, so each one's listening window overlaps the
    other's evaluation. Zero-weight genomes keep both agents stationary and
    10 units apart, well inside communication range.
    """
    cfg = ExperimentConfig(task="navigation", swarm_size=2, sim_steps=0, t_e_base=10,
                           t_e_jitter=0, t_l=5, comm_radius=64.0)
    obs = RunObserver(record_broadcasts=True, record_states=True)
    sim = init_simulation(cfg, np.random.default_rng(3), method="best", observer=obs)
    freeze_pair(sim, [(500.0, 500.0, 0.0), (510.0, 500.0, 2.0)], te=[10, 10],
                steps_left=[10, 3])
    uid0 = sim.agents[0].active_genome.uid
    uid1 = sim.agents[1].active_genome.uid
    for _ in range(15):
        step_swarm(sim)
    # agent 1 listened during steps 3..7 while agent 0 was evaluating
    sel1 = [s for s in obs.selections if s[1] == 1]
    assert len(sel1) == 1
    step, _, entry_uids, _, _, _ = sel1[0]
    assert step == 7
    assert entry_uids == (uid0, uid1)  # received peer first, own genome appended last
    # agent 0 listened during steps 10..14 while agent 1 was evaluating
    sel0 = [s for s in obs.selections if s[1] == 0]
    assert len(sel0) == 1
    assert sel0[0][0] == 14
    assert len(sel0[0][2]) == 2
    # the only broadcasts happened evaluator -> listener
    for bstep, sender, receiver in obs.broadcasts:
        assert obs.states[bstep][2][sender] == Phase.EVALUATING
        assert obs.states[bstep][2][receiver] == Phase.LISTENING


def test_listening_agents_stay_frozen():
    cfg = tiny_config(swarm_size=6, sim_steps=900)
    obs = RunObserver(record_states=True)
    run_simulation(cfg, 11, method="rank", observer=obs)
    xs = np.stack([s[0] for s in obs.states])
    ys = np.stack([s[1] for s in obs.states])
    phases = np.stack([s[2] for s in obs.states])
    # an agent listening during step t+1 must not have moved during that step
    listening = phases[1:] == Phase.LISTENING
    assert listening.any()
    assert np.all(xs[1:][listening] == xs[:-1][listening])
    assert np.all(ys[1:][listening] == ys[:-1][listening])


# ---------------------------------------------------------------------------
# the whole run

def test_zero_step_budget_gives_empty_trace():
    cfg = tiny_config(sim_steps=0)
    trace = run_simulation(cfg, 0, method="best")
    assert trace.swarm_fitness == []


def test_same_seed_gives_bit_identical_traces():
    cfg = tiny_config(swarm_size=5, sim_steps=2500)
    a = run_simulation(cfg, 313, method="tournament")
    b = run_simulation(cfg, 313, method="tournament")
    assert a.swarm_fitness == b.swarm_fitness
    c = run_simulation(cfg, 314, method="tournament")
    assert a.swarm_fitness != c.swarm_fitness


def test_trace_truncates_to_slowest_agent():
    cfg = tiny_config(swarm_size=4, sim_steps=2000)
    obs = RunObserver()
    sim_rng = np.random.default_rng(17)
    sim = init_simulation(cfg, sim_rng, method="random", observer=obs)
    for _ in range(cfg.sim_steps):
        step_swarm(sim)
    trace = build_trace(sim, 17)
    counts = [len(a.fitness_history) for a in sim.agents]
    assert len(trace.swarm_fitness) == min(counts)
    g = min(counts) - 1
    expected = sum(a.fitness_history[g] for a in sim.agents)
    assert trace.swarm_fitness[g] == pytest.approx(expected)


def test_navigation_trace_values_nonnegative():
    cfg = tiny_config(swarm_size=5, sim_steps=2500)
    trace = run_simulation(cfg, 9, method="random")
    assert all(v >= 0.0 for v in trace.swarm_fitness)


def test_fitness_accumulates_only_while_evaluating():
    cfg = tiny_config(swarm_size=2, sim_steps=0, t_e_base=10, t_e_jitter=0, t_l=5)
    sim = init_simulation(cfg, np.random.default_rng(4), method="best")
    freeze_pair(sim, [(500.0, 500.0, 0.0), (600.0, 600.0, 0.0)], te=[10, 10],
                steps_left=[10, 10])
    for _ in range(10):
        step_swarm(sim)
    assert np.all(sim.phase == Phase.LISTENING)
    frozen = sim.fitness_accum.copy()
    for _ in range(4):
        step_swarm(sim)
    assert np.array_equal(sim.fitness_accum, frozen)


def test_broadcast_carries_running_accumulator():
    cfg = ExperimentConfig(task="navigation", swarm_size=2, sim_steps=0, t_e_base=10,
                           t_e_jitter=0, t_l=6, comm_radius=100.0)
    sim = init_simulation(cfg, np.random.default_rng(8), method="best")
    freeze_pair(sim, [(500.0, 500.0, 0.0), (520.0, 500.0, 0.0)], te=[10, 10],
                steps_left=[10, 2])
    # give agent 0 a genome that drives forward at a known rate
    w = np.zeros(22)
    w[8] = 10.0  # translation bias, saturates tanh to ~1
    genome = Genome(w, origin_agent=0, uid=sim.next_uid())
    sim.agents[0].active_genome = genome
    sim.weight_mat[0] = w.reshape(2, -1)
    for _ in range(4):
        step_swarm(sim)
    # agent 1 began listening after step 2; its inbox snapshots agent 0's
    # accumulator as of the latest broadcast, which is partial by design
    assert 0 in sim.agents[1].inbox
    g, partial = sim.agents[1].inbox[0]
    assert g is sim.agents[0].active_genome
    assert partial == pytest.approx(float(sim.fitness_accum[0]))
    assert 0 < partial < 10.0


def test_latest_broadcast_per_sender_wins():
    cfg = ExperimentConfig(task="navigation", swarm_size=2, sim_steps=0, t_e_base=10,
                           t_e_jitter=0, t_l=6, comm_radius=100.0)
    sim = init_simulation(cfg, np.random.default_rng(8), method="best")
    freeze_pair(sim, [(500.0, 500.0, 0.0), (520.0, 500.0, 0.0)], te=[10, 10],
                steps_left=[10, 2])
    w = np.zeros(22)
    w[8] = 10.0
    sim.agents[0].active_genome = Genome(w, origin_agent=0, uid=sim.next_uid())
    sim.weight_mat[0] = w.reshape(2, -1)
    step_swarm(sim)
    step_swarm(sim)
    step_swarm(sim)
    first = sim.agents[1].inbox[0][1]
    step_swarm(sim)
    second = sim.agents[1].inbox[0][1]
    assert len(sim.agents[1].inbox) == 1
    assert second > first  # newer broadcast replaced the older one


def test_finish_generation_updates_lineage_and_clears_list():
    cfg = tiny_config()
    sim = init_simulation(cfg, np.random.default_rng(6), method="best")
    sim.fitness_accum[0] = 5.0
    peer = Genome(np.ones(22) * 0.1, origin_agent=1, uid=777)
    sim.agents[0].inbox[1] = (peer, 9.0)
    old_generation = sim.agents[0].generation_index
    finish_generation(sim, 0)
    agent = sim.agents[0]
    assert agent.inbox == {}
    assert agent.generation_index == old_generation + 1
    assert agent.fitness_history[-1] == 5.0
    assert agent.active_genome.parent_uid == 777  # best picked the fitter peer
    assert agent.active_genome.origin_agent == 0
    assert np.array_equal(sim.weight_mat[0], agent.active_genome.weights.reshape(2, -1))


def test_methods_diverge_from_common_seed():
    cfg = tiny_config(swarm_size=6, sim_steps=2500)
    traces = {m: run_simulation(cfg, 21, method=m).swarm_fitness
              for m in ("best", "rank", "tournament", "random")}
    assert len({tuple(t) for t in traces.values()}) == 4


# ---------------------------------------------------------------------------
# batched stepping equals the scalar operations

def test_swarm_sensing_matches_scalar_sense():
    cfg = ExperimentConfig(task="foraging", swarm_size=8, sim_steps=0, food_items=20,
                           arena_file=DESK_ARENA)
    sim = init_simulation(cfg, np.random.default_rng(12))
    from swarmevolve.arena import sense_all

    idx = np.arange(8)
    prox, food = sense_all(sim.arena, sim.x, sim.y, sim.heading, idx,
                           cfg.sensor_range, True)
    for i in range(8):
        others = [sim.pose_of(j) for j in range(8) if j != i]
        single = sense(sim.arena, sim.pose_of(i), others, cfg.sensor_range, with_food=True)
        # scalar path lists others before self, so self-exclusion must agree
        assert np.allclose(prox[i], single.proximity, atol=1e-12)
        assert np.allclose(food[i], single.food, atol=1e-12)


def test_swarm_kinematics_matches_scalar_step():
    cfg = tiny_config(swarm_size=6, sim_steps=0)
    sim = init_simulation(cfg, np.random.default_rng(14))
    rng = np.random.default_rng(0)
    v_t = rng.uniform(-1, 1, 6)
    v_r = rng.uniform(-1, 1, 6)
    from swarmevolve.arena import step_kinematics_all

    nx, ny, nh = step_kinematics_all(sim.arena, sim.x, sim.y, sim.heading, v_t, v_r,
                                     cfg.v_max, cfg.theta_max)
    for i in range(6):
        want = step_kinematics(sim.arena, sim.pose_of(i), v_t[i], v_r[i],
                               cfg.v_max, cfg.theta_max)
        assert (nx[i], ny[i]) == (want.x, want.y)
        assert nh[i] == pytest.approx(want.heading, abs=1e-12)


def test_step_controller_matches_scalar_activate():
    cfg = tiny_config(swarm_size=5, sim_steps=0)
    sim = init_simulation(cfg, np.random.default_rng(15))
    from swarmevolve.arena import sense_all
    from swarmevolve.neuro import activate_all

    idx = np.arange(5)
    prox, _ = sense_all(sim.arena, sim.x, sim.y, sim.heading, idx, cfg.sensor_range, False)
    sim.prev_out[:] = np.random.default_rng(1).uniform(-1, 1, (5, 2))
    outs = activate_all(sim.weight_mat, prox, sim.prev_out)
    for i in range(5):
        want = activate(sim.agents[i].active_genome, prox[i],
                        ControlOutput(*sim.prev_out[i]))
        assert outs[i, 0] == pytest.approx(want.v_trans, abs=1e-12)
        assert outs[i, 1] == pytest.approx(want.v_rot, abs=1e-12)


def test_foraging_collection_feeds_fitness():
    cfg = ExperimentConfig(task="foraging", swarm_size=1, sim_steps=0, food_items=3,
                           t_e_base=50, t_e_jitter=0, t_l=5)
    sim = init_simulation(cfg, np.random.default_rng(20))
    sim.phase[0] = Phase.EVALUATING
    sim.steps_left[0] = 50
    sim.fitness_accum[0] = 0.0
    # drop an item directly under the agent
    sim.arena.food[0] = (sim.x[0], sim.y[0])
    step_swarm(sim)
    assert sim.fitness_accum[0] == 1.0
    assert sim.arena.food_count == 3
