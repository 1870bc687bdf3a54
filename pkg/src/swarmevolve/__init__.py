"""Distributed on-line evolution of swarm robot controllers.

A deterministic multi-agent simulator plus experiment harness: agents evolve
recurrent neuro-controllers through local genome gossip under one of four
selection pressures, on a navigation task or a collective foraging task,
with pairwise nonparametric comparison of the outcomes.
"""
from .arena import Arena, ArenaError, Pose, SensorReading, agents_within, collect_food, sense, step_kinematics
from .config import ConfigError, ExperimentConfig, config_hash, derive_seed, load_config, save_config
from .evolution import AgentState, Phase, RunObserver, SwarmSim, init_simulation, run_simulation, step_swarm
from .harness import AnalysisResult, RunRecord, analyze, emit_plot_data, load_records, run_experiment
from .metrics import (MeasureSet, accumulated_above, avg_accumulated, compute_target,
                      fixed_budget, mann_whitney_u, median_curve, time_to_target)
from .neuro import ControlOutput, Genome, activate, mutate, random_genome
from .selection import select, select_best, select_random, select_rank_based, select_tournament
from .tasks import RunTrace, TaskKind, foraging_step_fitness, navigation_step_fitness, swarm_fitness

__version__ = "0.1.0"
