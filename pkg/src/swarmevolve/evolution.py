"""Per-agent two-phase evolutionary loop with local genome gossip.

Each agent alternates between an evaluation phase (act, accumulate fitness,
broadcast its genome with its running fitness to nearby listeners) and a
listening phase (stand still, collect broadcasts). When listening ends, the
agent appends its own genome to the collected list, selects one entry,
mutates it, and starts the next evaluation. Agents are desynchronized by
random initial offsets plus per-phase jitter on the evaluation length, so
evaluators and listeners coexist at any time.

Hot per-step state (pose, phase, timers, accumulators, weights) lives in
arrays on SwarmSim so a whole swarm steps in a handful of vectorized ops;
per-agent bookkeeping (genome, inbox, history) lives on AgentState.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from . import arena as arena_mod
from .arena import Arena, Pose
from .config import ExperimentConfig, validate_config
from .neuro import Genome, activate_all, mutate, random_genome
from .selection import select
from .tasks import RunTrace, TaskKind


class Phase(IntEnum):
    EVALUATING = 0
    LISTENING = 1


# plain ints for the hot step loop; attribute access on IntEnum is slow
_EVAL = int(Phase.EVALUATING)
_LISTEN = int(Phase.LISTENING)


@dataclass
class AgentState:
    """Per-agent bookkeeping that is not touched every simulation step."""

    id: int
    active_genome: Genome
    inbox: dict[int, tuple[Genome, float]] = field(default_factory=dict)
    generation_index: int = 0
    fitness_history: list[float] = field(default_factory=list)


@dataclass
class RunObserver:
    """Optional event recorder for invariant checks; off the hot path unless attached.

    phase_events rows: (first_active_step, agent, phase, planned_steps)
    broadcast rows:    (step, sender, receiver)
    selection rows:    (step, agent, entry_uids, selected_uid, child_uid, child_parent_uid)
    states rows:       per step (x, y, phase) snapshots taken after movement,
                       before transitions, exactly the data broadcasts saw.
    """

    record_broadcasts: bool = False
    record_selections: bool = True
    record_states: bool = False
    phase_events: list = field(default_factory=list)
    broadcasts: list = field(default_factory=list)
    selections: list = field(default_factory=list)
    states: list = field(default_factory=list)


@dataclass
class SwarmSim:
    """One deterministic simulation run: arena, agents, and hot state arrays."""

    config: ExperimentConfig
    method: str
    task: TaskKind
    arena: Arena
    agents: list[AgentState]
    rng: np.random.Generator
    x: np.ndarray
    y: np.ndarray
    heading: np.ndarray
    phase: np.ndarray  # int8 Phase values
    steps_left: np.ndarray  # int64, steps remaining in the current phase
    current_te: np.ndarray  # int64, this generation's evaluation length
    fitness_accum: np.ndarray
    prev_out: np.ndarray  # (A, 2) previous post-tanh commands
    weight_mat: np.ndarray  # (A, 2, n_inputs + 3)
    step_count: int = 0
    observer: RunObserver | None = None
    _next_uid: int = 0

    def next_uid(self) -> int:
        uid = self._next_uid
        self._next_uid += 1
        return uid

    def pose_of(self, i: int) -> Pose:
        return Pose(float(self.x[i]), float(self.y[i]), float(self.heading[i]))


def _install_genome(sim: SwarmSim, i: int, genome: Genome) -> None:
    sim.agents[i].active_genome = genome
    sim.weight_mat[i] = genome.weights.reshape(2, -1)


def init_simulation(
    config: ExperimentConfig,
    rng: np.random.Generator,
    method: str | None = None,
    observer: RunObserver | None = None,
) -> SwarmSim:
    """Build arena, place agents at collision-free poses, install random genomes.

    Each agent starts mid-way through its first evaluation phase (uniform
    random elapsed offset) so the swarm is desynchronized from step 0.
    """
    validate_config(config)
    method = method or config.methods[0]
    task = TaskKind.from_token(config.task)

    if config.arena_file:
        from pathlib import Path

        width, height, obstacles = arena_mod.parse_arena_file(
            Path(config.arena_file).read_text(), config.arena_file)
    else:
        width, height, obstacles = (arena_mod.DEFAULT_WIDTH, arena_mod.DEFAULT_HEIGHT,
                                    arena_mod.DEFAULT_OBSTACLES)
    n_food = config.food_items if task.uses_food else 0
    world = arena_mod.make_arena(width, height, obstacles, n_food, rng,
                                 config.agent_radius, config.food_radius)

    n = config.swarm_size
    xs = np.empty(n)
    ys = np.empty(n)
    placed: list[np.ndarray] = []
    for i in range(n):
        for _ in range(arena_mod.MAX_PLACEMENT_ATTEMPTS):
            p = arena_mod.sample_free_position(world, rng)
            if all(np.hypot(*(p - q)) >= 2 * config.agent_radius for q in placed):
                break
        else:
            raise arena_mod.ArenaError("arena too crowded to place the swarm")
        placed.append(p)
        xs[i], ys[i] = p
    headings = rng.uniform(-math.pi, math.pi, size=n)

    k = task.n_inputs + 3
    sim = SwarmSim(
        config=config,
        method=method,
        task=task,
        arena=world,
        agents=[],
        rng=rng,
        x=xs,
        y=ys,
        heading=headings,
        phase=np.full(n, Phase.EVALUATING, dtype=np.int8),
        steps_left=np.zeros(n, dtype=np.int64),
        current_te=np.zeros(n, dtype=np.int64),
        fitness_accum=np.zeros(n),
        prev_out=np.zeros((n, 2)),
        weight_mat=np.empty((n, 2, k)),
        observer=observer,
    )
    for i in range(n):
        genome = random_genome(task.genome_length, rng, origin_agent=i)
        genome.uid = sim.next_uid()
        sim.agents.append(AgentState(id=i, active_genome=genome))
        sim.weight_mat[i] = genome.weights.reshape(2, -1)
    for i in range(n):
        begin_evaluation(sim, i, record_event=False)
        offset = int(rng.integers(0, config.t_e_base))
        sim.steps_left[i] = sim.current_te[i] - offset % sim.current_te[i]
        if observer is not None:
            observer.phase_events.append((0, i, Phase.EVALUATING, int(sim.steps_left[i])))
    return sim


def begin_evaluation(sim: SwarmSim, i: int, record_event: bool = True) -> None:
    """Start a fresh evaluation phase with a jittered duration.

    Duration is t_e_base minus a uniform integer from [0, t_e_jitter),
    resampled every generation. Fitness accumulator, recurrent state, and
    the inbox all reset.
    """
    cfg = sim.config
    jitter = int(sim.rng.integers(0, cfg.t_e_jitter)) if cfg.t_e_jitter > 0 else 0
    sim.current_te[i] = cfg.t_e_base - jitter
    sim.steps_left[i] = sim.current_te[i]
    sim.phase[i] = Phase.EVALUATING
    sim.fitness_accum[i] = 0.0
    sim.prev_out[i] = 0.0
    sim.agents[i].inbox.clear()
    if record_event and sim.observer is not None:
        sim.observer.phase_events.append(
            (sim.step_count + 1, i, Phase.EVALUATING, int(sim.current_te[i])))


def finish_generation(sim: SwarmSim, i: int) -> None:
    """Close the listening phase: select from inbox + self, mutate, install."""
    agent = sim.agents[i]
    cfg = sim.config
    own_fitness = float(sim.fitness_accum[i])
    agent.active_genome.fitness = own_fitness
    entries = list(agent.inbox.values())
    entries.append((agent.active_genome, own_fitness))

    selected = select(sim.method, entries, sim.rng, cfg.tournament_k)
    child = mutate(selected, cfg.sigma, sim.rng, weight_limit=cfg.weight_limit)
    child.uid = sim.next_uid()
    child.origin_agent = i

    if sim.observer is not None and sim.observer.record_selections:
        sim.observer.selections.append(
            (sim.step_count, i, tuple(g.uid for g, _ in entries),
             selected.uid, child.uid, child.parent_uid))

    agent.fitness_history.append(own_fitness)
    agent.generation_index += 1
    agent.inbox.clear()
    _install_genome(sim, i, child)


def step_swarm(sim: SwarmSim) -> SwarmSim:
    """Advance the whole swarm one time step.

    Evaluating agents sense, act, move, accumulate fitness, and broadcast to
    in-range listeners; listeners stand still and keep the latest broadcast
    per sender. Phase timers then tick, firing transitions in agent-id order.
    """
    cfg = sim.config
    world = sim.arena
    ev = np.nonzero(sim.phase == _EVAL)[0]
    li = np.nonzero(sim.phase == _LISTEN)[0]

    if ev.size:
        prox, food = arena_mod.sense_all(
            world, sim.x, sim.y, sim.heading, ev, cfg.sensor_range, sim.task.uses_food)
        inputs = prox if food is None else np.hstack([prox, food])
        outs = activate_all(sim.weight_mat[ev], inputs, sim.prev_out[ev])

        new_x, new_y, new_h = arena_mod.step_kinematics_all(
            world, sim.x[ev], sim.y[ev], sim.heading[ev],
            outs[:, 0], outs[:, 1], cfg.v_max, cfg.theta_max)
        sim.x[ev] = new_x
        sim.y[ev] = new_y
        sim.heading[ev] = new_h

        if sim.task is TaskKind.NAVIGATION:
            # backward driving earns nothing; accumulated fitness stays >= 0
            step_fit = outs[:, 0] * (1.0 - np.abs(outs[:, 1])) * prox.min(axis=1)
            sim.fitness_accum[ev] += np.maximum(step_fit, 0.0)
        else:
            counts = arena_mod.collect_food_all(world, sim.x, sim.y, ev, sim.rng)
            sim.fitness_accum[ev] += counts
        sim.prev_out[ev] = outs

        if li.size:
            dx = sim.x[ev][:, None] - sim.x[li][None, :]
            dy = sim.y[ev][:, None] - sim.y[li][None, :]
            pairs = np.nonzero(dx * dx + dy * dy <= cfg.comm_radius * cfg.comm_radius)
            obs = sim.observer
            for s_row, l_row in zip(*pairs):
                sender = int(ev[s_row])
                listener = int(li[l_row])
                sim.agents[listener].inbox[sender] = (
                    sim.agents[sender].active_genome, float(sim.fitness_accum[sender]))
                if obs is not None and obs.record_broadcasts:
                    obs.broadcasts.append((sim.step_count, sender, listener))

    if sim.observer is not None and sim.observer.record_states:
        sim.observer.states.append((sim.x.copy(), sim.y.copy(), sim.phase.copy()))

    sim.steps_left -= 1
    done = np.nonzero(sim.steps_left <= 0)[0]
    for i in done:
        i = int(i)
        if sim.phase[i] == _EVAL:
            sim.phase[i] = _LISTEN
            sim.steps_left[i] = cfg.t_l
            sim.agents[i].inbox.clear()
            if sim.observer is not None:
                sim.observer.phase_events.append(
                    (sim.step_count + 1, i, Phase.LISTENING, cfg.t_l))
        else:
            finish_generation(sim, i)
            begin_evaluation(sim, i)
    sim.step_count += 1
    return sim


def build_trace(sim: SwarmSim, seed: int) -> RunTrace:
    """Swarm fitness per generation, truncated to the slowest agent's count."""
    n_gen = min(len(a.fitness_history) for a in sim.agents)
    if n_gen == 0:
        return RunTrace([], sim.method, seed)
    hist = np.array([a.fitness_history[:n_gen] for a in sim.agents])
    return RunTrace([float(v) for v in hist.sum(axis=0)], sim.method, seed)


def run_simulation(
    config: ExperimentConfig,
    seed: int,
    method: str | None = None,
    observer: RunObserver | None = None,
) -> RunTrace:
    """Run one seeded simulation to its step budget and return the fitness trace.

    Identical (config, method, seed) always yields an identical trace: one
    generator drives every random draw and agents update in fixed id order.
    """
    rng = np.random.default_rng(seed)
    sim = init_simulation(config, rng, method=method, observer=observer)
    for _ in range(config.sim_steps):
        step_swarm(sim)
    return build_trace(sim, seed)
