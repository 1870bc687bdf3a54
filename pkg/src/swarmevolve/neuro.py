"""Fixed-topology recurrent controller: flat weight vectors to velocity commands.

Weight layout, per output j (0 = translation, 1 = rotation), flattened
outputs-major:

    w[j*(n+3) + i]      input weight, i = 0..n-1
    w[j*(n+3) + n]      bias
    w[j*(n+3) + n+1]    recurrent weight on previous translation command
    w[j*(n+3) + n+2]    recurrent weight on previous rotation command

so a controller with n inputs has 2*(n+3) weights: 22 at n=8, 38 at n=16.
Recurrent inputs are the previous step's post-tanh commands.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

NAV_INPUTS = 8
FORAGING_INPUTS = 16


def genome_length(n_inputs: int) -> int:
    return 2 * (n_inputs + 3)


def inputs_for_length(length: int) -> int:
    """Inverse of genome_length; raises on lengths no controller can have."""
    n, rem = divmod(length, 2)
    if rem or n < 4:
        raise ValueError(f"no controller has a genome of length {length}")
    return n - 3


@dataclass
class Genome:
    """Flat weight vector plus bookkeeping; the unit of selection and gossip.

    `fitness` is None until the owner finishes an evaluation phase. `uid`
    and `parent_uid` tag the lineage for provenance checks; -1 means
    unassigned.
    """

    weights: np.ndarray
    fitness: float | None = None
    origin_agent: int = -1
    generation: int = 0
    uid: int = -1
    parent_uid: int = -1

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)


@dataclass(frozen=True)
class ControlOutput:
    v_trans: float = 0.0
    v_rot: float = 0.0


def activate(genome: Genome, inputs: np.ndarray, prev: ControlOutput) -> ControlOutput:
    """Run the controller once: tanh(W_in . inputs + bias + recurrent terms)."""
    w = genome.weights.reshape(2, -1)
    n = w.shape[1] - 3
    inputs = np.asarray(inputs, dtype=float)
    if inputs.shape != (n,):
        raise ValueError(
            f"genome of length {genome.weights.size} expects {n} inputs, got {inputs.shape}")
    z = w[:, :n] @ inputs + w[:, n] + w[:, n + 1] * prev.v_trans + w[:, n + 2] * prev.v_rot
    out = np.tanh(z)
    return ControlOutput(float(out[0]), float(out[1]))


def activate_all(weight_mat: np.ndarray, inputs: np.ndarray, prev: np.ndarray) -> np.ndarray:
    """Batched activate: weight_mat (A,2,n+3), inputs (A,n), prev (A,2) -> (A,2)."""
    n = weight_mat.shape[2] - 3
    z = (weight_mat[:, :, :n] @ inputs[:, :, None])[:, :, 0]
    z += weight_mat[:, :, n]
    z += weight_mat[:, :, n + 1] * prev[:, 0:1]
    z += weight_mat[:, :, n + 2] * prev[:, 1:2]
    return np.tanh(z)


def random_genome(length: int, rng: np.random.Generator, origin_agent: int = -1) -> Genome:
    """Fresh unevaluated genome with weights drawn uniformly from [-1, 1]."""
    return Genome(rng.uniform(-1.0, 1.0, size=length), origin_agent=origin_agent)


def mutate(genome: Genome, sigma: float, rng: np.random.Generator,
           weight_limit: float | None = None) -> Genome:
    """Gaussian perturbation of every gene; the input genome is left untouched.

    The child is unevaluated, one generation on, and records its parent's
    uid. When `weight_limit` is given, genes are clipped into
    [-weight_limit, weight_limit] after the perturbation, keeping the gene
    pool bounded over long evolutions.
    """
    if sigma <= 0:
        raise ValueError(f"mutation step-size must be positive, got {sigma}")
    weights = genome.weights + rng.normal(0.0, sigma, size=genome.weights.shape)
    if weight_limit is not None:
        weights = np.clip(weights, -weight_limit, weight_limit)
    child = replace(
        genome,
        weights=weights,
        fitness=None,
        generation=genome.generation + 1,
        uid=-1,
        parent_uid=genome.uid,
    )
    return child
