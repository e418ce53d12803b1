"""Learned topology-similarity score ("mirror stimuli" function).

The score of a block m is F_topology(m) = w . mu(m), a linear function of
the block's discounted feature count.  The weights w are recovered from a
single expert block by max-margin inverse reinforcement learning
(apprenticeship-style feature matching): repeatedly find the w (on the
unit ball) under which the expert's feature count dominates every feature
count discovered so far by the largest margin, then let an inner solver
find the policy that is optimal under the reward w . phi(s) and add its
feature count to the constraint set.  Training stops once the achievable
margin drops below a threshold: at that point no unit-norm reward
separates the expert from the discovered policies, so the score is high
near the expert's topology without pinning the search to it.

The inner solver here is exact rather than a sampled RL algorithm: the
reward of a block is additive over its layer descriptors and the legal
descriptor set at step t depends only on t, so per-step maximization plus
choosing the best stopping length is globally optimal.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .arch import (
    DEFAULT_MAX_LEN,
    DWCONV3,
    BlockArch,
    Layer,
    OpKind,
    Trajectory,
    arch_from_codes,
    canonical_serialize,
    legal_codes,
    require_valid,
    to_trajectory,
)
from .features import FEATURE_DIM, FeatureCount, feature_count, state_feature

logger = logging.getLogger(__name__)

WEIGHT_NORM_TOLERANCE = 1e-9

# Projected-subgradient schedule for the max-margin subproblem.
MARGIN_STEPS = 2000


@dataclass(frozen=True)
class ExpertBlock:
    """A named human-designed reference block."""

    name: str
    arch: BlockArch


def expert_library(name: str, max_len: int = DEFAULT_MAX_LEN) -> ExpertBlock:
    """Catalog of built-in expert blocks.

    ``resnet_block`` is a residual unit in depthwise-conv form: two stacked
    3x3 depthwise convolutions plus a shortcut add joining the block input
    to the second conv's output.  ``plain_chain`` is the same two convs
    without the shortcut.
    """
    if name == "resnet_block":
        codes = [
            _code(DWCONV3, 1),      # conv on the block input
            _code(DWCONV3, 2),      # conv on layer 1
            _code_add(1, 3),        # shortcut: block input + layer 2
        ]
    elif name == "plain_chain":
        codes = [_code(DWCONV3, 1), _code(DWCONV3, 2)]
    else:
        raise ValueError(f"unknown expert {name!r} (have: resnet_block, plain_chain)")
    arch = arch_from_codes(codes, max_len=max_len)
    require_valid(arch)
    return ExpertBlock(name=name, arch=arch)


def _code(op, pred1):
    from .arch import LayerCode
    return LayerCode(op=op, pred1=pred1)


def _code_add(pred1, pred2):
    from .arch import ADD, LayerCode
    return LayerCode(op=ADD, pred1=pred1, pred2=pred2)


def residual_variants(max_len: int = DEFAULT_MAX_LEN) -> dict[str, BlockArch]:
    """Three controlled perturbations of the residual expert block.

    ``conv_prepended`` inserts an extra conv before the residual pair (the
    shortcut then joins that conv's output to the pair's output),
    ``conv_appended`` adds a conv after the shortcut join, and
    ``shortcut_removed`` drops the add, leaving the plain chain.  Used to
    probe how strongly the topology score reacts to small versus
    structural edits.
    """
    variants = {
        "conv_prepended": [
            _code(DWCONV3, 1),
            _code(DWCONV3, 2),
            _code(DWCONV3, 3),
            _code_add(2, 4),
        ],
        "conv_appended": [
            _code(DWCONV3, 1),
            _code(DWCONV3, 2),
            _code_add(1, 3),
            _code(DWCONV3, 4),
        ],
        "shortcut_removed": [
            _code(DWCONV3, 1),
            _code(DWCONV3, 2),
        ],
    }
    out = {}
    for name, codes in variants.items():
        arch = arch_from_codes(codes, max_len=max_len)
        require_valid(arch)
        out[name] = arch
    return out


@dataclass(frozen=True, eq=False)
class MirrorWeights:
    """Unit-ball-constrained weights of the topology score.

    ``trained_against`` is the canonical serialization of the expert block,
    ``final_margin`` the margin at which training stopped.
    """

    w: np.ndarray
    gamma: float
    trained_against: str = ""
    final_margin: float = float("nan")

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.shape != (FEATURE_DIM,):
            raise ValueError(f"w must have shape ({FEATURE_DIM},), got {w.shape}")
        norm = float(np.linalg.norm(w))
        if norm > 1.0 + WEIGHT_NORM_TOLERANCE:
            raise ValueError(f"||w|| = {norm} exceeds the unit ball")
        object.__setattr__(self, "w", w)


def mirror_stimuli(weights: MirrorWeights, arch: BlockArch) -> float:
    """Topology score w . mu(arch) of a valid block."""
    traj = to_trajectory(arch)
    mu = feature_count(traj, weights.gamma).mu
    return float(np.dot(weights.w, mu))


def expert_feature_expectation(expert: ExpertBlock, gamma: float) -> FeatureCount:
    """The expert's feature count: the single-demonstration estimate of its
    policy's feature expectation."""
    return feature_count(to_trajectory(expert.arch), gamma)


def inner_optimal_policy(
    w: np.ndarray,
    max_len: int,
    op_pool: Iterable[OpKind],
    gamma: float,
) -> tuple[Trajectory, FeatureCount]:
    """The block maximizing sum_t gamma^t * w . phi(s_t), solved exactly.

    At each position the best descriptor is chosen independently (the legal
    set depends only on the position), and the block length is the prefix
    with the largest discounted partial sum.  Ties break toward the first
    descriptor in canonical order and the shortest length, so the result is
    deterministic.
    """
    w = np.asarray(w, dtype=float)
    best_codes = []
    best_values = []
    for position in range(1, max_len + 1):
        candidates = legal_codes(position, op_pool)
        if not candidates:
            raise ValueError("op pool admits no layer at position 1")
        best_code, best_val = None, -np.inf
        for code in candidates:
            val = float(np.dot(w, state_feature(code.at(position), max_len)))
            if val > best_val:
                best_code, best_val = code, val
        best_codes.append(best_code)
        best_values.append(best_val)

    # optimal stopping: blocks must keep at least one layer
    discounts = gamma ** np.arange(1, max_len + 1)
    partial = np.cumsum(discounts * np.asarray(best_values))
    length = int(np.argmax(partial)) + 1  # argmax returns the first maximizer

    arch = arch_from_codes(best_codes[:length], max_len=max_len)
    traj = to_trajectory(arch)
    return traj, feature_count(traj, gamma)


def sampled_inner_policy(
    w: np.ndarray,
    max_len: int,
    op_pool: Iterable[OpKind],
    gamma: float,
    episodes: int = 4000,
    epsilon: float = 0.2,
    eta: float = 0.5,
    rng: np.random.Generator | None = None,
) -> tuple[Trajectory, FeatureCount]:
    """Sampled stand-in for ``inner_optimal_policy``.

    Tabular Q-learning over the layer-by-layer action space, with each
    sampled block's exact objective w . mu(arch) spread evenly over its
    transitions.  Returns the best block actually visited, so the value is
    a lower bound on the exact optimum that tightens with more episodes.
    """
    # imported here: qsearch depends on this module at import time
    from .qsearch import QTable, SearchConfig, episode_transitions, legal_actions, sample_block, td_update

    w = np.asarray(w, dtype=float)
    pool = tuple(sorted(op_pool, key=OpKind.sort_key))
    cfg = SearchConfig(max_len=max_len, op_pool=pool)
    rng = rng if rng is not None else np.random.default_rng()

    q = QTable()
    best_arch, best_val = None, -np.inf
    for _ in range(episodes):
        arch = sample_block(q, epsilon, cfg, rng)
        mu = feature_count(to_trajectory(arch), gamma)
        value = float(np.dot(w, mu.mu))
        if value > best_val:
            best_arch, best_val = arch, value
        for tr in episode_transitions(arch, value):
            legal_next = [] if tr.next_state is None else legal_actions(tr.next_position, pool, max_len)
            td_update(q, tr.state, tr.action, tr.reward, tr.next_state, legal_next, eta, cfg.gamma_q)

    traj = to_trajectory(best_arch)
    return traj, feature_count(traj, gamma)


def _project_unit_ball(w: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(w))
    if norm > 1.0:
        return w / norm
    return w


def max_margin_step(
    mu_star: FeatureCount | np.ndarray,
    mu_set: Sequence[FeatureCount | np.ndarray],
) -> tuple[np.ndarray, float]:
    """Maximize min_j w . (mu* - mu_j) over the unit ball.

    Projected subgradient ascent with step 1/sqrt(k), a fixed iteration
    budget and a deterministic start (the normalized mean constraint
    direction), tracking the best iterate.  The optimum is never negative
    because w = 0 achieves margin 0; if ascent only finds negative margins
    the zero vector is returned.
    """
    if len(mu_set) == 0:
        raise ValueError("mu_set must be nonempty")
    star = mu_star.mu if isinstance(mu_star, FeatureCount) else np.asarray(mu_star, dtype=float)
    directions = np.array(
        [star - (m.mu if isinstance(m, FeatureCount) else np.asarray(m, dtype=float))
         for m in mu_set]
    )

    mean_dir = directions.mean(axis=0)
    norm = float(np.linalg.norm(mean_dir))
    if norm < 1e-12:
        w = np.zeros(FEATURE_DIM)
        w[0] = 1.0
    else:
        w = mean_dir / norm

    def objective(v: np.ndarray) -> float:
        return float(np.min(directions @ v))

    best_w, best_val = w.copy(), objective(w)
    for k in range(1, MARGIN_STEPS + 1):
        margins = directions @ w
        j = int(np.argmin(margins))
        w = _project_unit_ball(w + directions[j] / np.sqrt(k))
        val = objective(w)
        if val > best_val:
            best_w, best_val = w.copy(), val
    if best_val < 0.0:
        return np.zeros(FEATURE_DIM), 0.0
    return best_w, best_val


@dataclass
class IrlConfig:
    epsilon: float = 0.01        # stop once the margin falls this low
    max_iterations: int = 50
    gamma: float = 0.9
    op_pool: tuple[OpKind, ...] = ()   # empty means: use the full pool
    max_len: int = DEFAULT_MAX_LEN
    seed_policy: str = "dwconv3"       # "dwconv3" | "random"
    seed: int | None = None            # rng seed for seed_policy="random" and the sampled solver
    inner_solver: str = "exact"        # "exact" | "sampled"
    inner_episodes: int = 4000         # sampled solver only
    inner_epsilon: float = 0.2
    inner_eta: float = 0.5

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.seed_policy not in ("dwconv3", "random"):
            raise ValueError(f"unknown seed_policy {self.seed_policy!r}")
        if self.inner_solver not in ("exact", "sampled"):
            raise ValueError(f"unknown inner_solver {self.inner_solver!r}")
        if self.inner_episodes < 1:
            raise ValueError("inner_episodes must be at least 1")


@dataclass(frozen=True, eq=False)
class IrlIteration:
    index: int
    w: np.ndarray
    delta: float
    mu_hat: np.ndarray   # feature count of this iteration's inner-optimal policy


@dataclass
class IrlTrace:
    iterations: list[IrlIteration] = field(default_factory=list)
    converged: bool = False

    @property
    def deltas(self) -> list[float]:
        return [it.delta for it in self.iterations]


def _seed_feature_count(config: IrlConfig, pool: tuple[OpKind, ...]) -> FeatureCount:
    if config.seed_policy == "random":
        rng = np.random.default_rng(config.seed)
        codes = []
        position = 1
        while True:
            candidates = legal_codes(position, pool)
            codes.append(candidates[int(rng.integers(len(candidates)))])
            if position >= config.max_len or rng.random() < 0.5:
                break
            position += 1
        arch = arch_from_codes(codes, max_len=config.max_len)
    else:
        seed_op = DWCONV3 if DWCONV3 in pool else sorted(pool, key=OpKind.sort_key)[0]
        arch = arch_from_codes([_code(seed_op, 1)], max_len=config.max_len)
    return feature_count(to_trajectory(arch), config.gamma)


def train_mirror(expert: ExpertBlock, config: IrlConfig | None = None) -> tuple[MirrorWeights, IrlTrace]:
    """Max-margin IRL against one expert block.

    Alternates the max-margin weight step with the exact inner policy
    optimizer, growing the constraint set by one feature count per
    iteration, until the margin drops to ``config.epsilon`` or the
    iteration cap.  Hitting the cap is recorded on the trace, not raised.
    """
    from .arch import FULL_POOL

    config = config or IrlConfig()
    pool = config.op_pool or FULL_POOL
    expert_arch = replace(expert.arch, max_len=config.max_len)
    require_valid(expert_arch)

    mu_star = feature_count(to_trajectory(expert_arch), config.gamma)
    mu_hats = [_seed_feature_count(config, pool).mu]

    trace = IrlTrace()
    w = np.zeros(FEATURE_DIM)
    delta = float("inf")
    inner_rng = np.random.default_rng(config.seed)
    for i in range(1, config.max_iterations + 1):
        w, delta = max_margin_step(mu_star, mu_hats)
        if config.inner_solver == "sampled":
            _, mu_hat = sampled_inner_policy(
                w, config.max_len, pool, config.gamma,
                episodes=config.inner_episodes,
                epsilon=config.inner_epsilon,
                eta=config.inner_eta,
                rng=inner_rng,
            )
        else:
            _, mu_hat = inner_optimal_policy(w, config.max_len, pool, config.gamma)
        trace.iterations.append(IrlIteration(index=i, w=w, delta=delta, mu_hat=mu_hat.mu))
        if delta <= config.epsilon:
            trace.converged = True
            break
        mu_hats.append(mu_hat.mu)
    if not trace.converged:
        logger.warning("margin training hit the iteration cap at delta=%g", delta)

    weights = MirrorWeights(
        w=w,
        gamma=config.gamma,
        trained_against=canonical_serialize(expert_arch),
        final_margin=delta,
    )
    return weights, trace


def weights_to_obj(weights: MirrorWeights) -> dict:
    return {
        "w": [float(v) for v in weights.w],
        "gamma": weights.gamma,
        "expert": weights.trained_against,
        "delta": weights.final_margin,
    }


def weights_from_obj(obj: dict) -> MirrorWeights:
    try:
        return MirrorWeights(
            w=np.asarray(obj["w"], dtype=float),
            gamma=float(obj["gamma"]),
            trained_against=str(obj["expert"]),
            final_margin=float(obj["delta"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed weights object: {exc}") from None
