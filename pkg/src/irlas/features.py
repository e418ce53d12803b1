"""Topology feature embedding.

Each layer maps to a 9-component state feature vector:

    [0:6]  one-hot operation category (dwconv, maxpool, avgpool, identity,
           add, concat)
    [6]    kernel / 5
    [7]    pred1 / (max_len + 1)
    [8]    pred2 / (max_len + 1)

A whole block embeds as its discounted feature count

    mu = sum_{t=1..T} gamma^t * phi(s_t)

with the first layer weighted gamma^1.  The discount makes the embedding
order-sensitive, so it distinguishes blocks that merely permute layers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arch import CATEGORY_ORDER, Layer, Trajectory

FEATURE_DIM = 9


@dataclass(frozen=True, eq=False)
class FeatureCount:
    """Discounted feature sum of a block plus the discount that produced it."""

    mu: np.ndarray
    gamma: float


def state_feature(layer: Layer, max_len: int) -> np.ndarray:
    """The 9-component feature vector of a single layer."""
    phi = np.zeros(FEATURE_DIM)
    phi[CATEGORY_ORDER.index(layer.op.category)] = 1.0
    phi[6] = layer.op.kernel / 5.0
    phi[7] = layer.pred1 / (max_len + 1)
    phi[8] = layer.pred2 / (max_len + 1)
    return phi


def feature_count(traj: Trajectory, gamma: float) -> FeatureCount:
    """Discounted feature count of a trajectory.

    An empty trajectory gives the zero vector; that is a defined value, not
    an error.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    mu = np.zeros(FEATURE_DIM)
    weight = 1.0
    for step in traj.steps:
        weight *= gamma
        mu += weight * state_feature(step.state, traj.max_len)
    mu.flags.writeable = False
    return FeatureCount(mu=mu, gamma=gamma)


def format_feature_count(fc: FeatureCount) -> str:
    """Plain-text export: a gamma header line, then one component per line."""
    lines = [f"gamma={fc.gamma!r}"]
    lines.extend(repr(float(v)) for v in fc.mu)
    return "\n".join(lines) + "\n"


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity, defined as 0 when either vector is zero."""
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))
