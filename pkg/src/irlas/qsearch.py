"""Tabular Q-learning over block architectures.

The agent builds a block layer by layer.  Its state is the descriptor of
the layer it just placed (START before the first), and an action is either
the next layer's descriptor or TERMINATE.  Episodes score R = accuracy +
lambda * topology once the whole block is evaluated, so the return is
spread uniformly over the block's layers (reward shaping) and replayed
from a bounded buffer.

The step index is deliberately not part of the state key; predecessor
legality is enforced when sampling instead.  Distinct positions that share
a layer descriptor therefore share Q entries, which trades exactness for
the tiny table the approach is known for.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np

from .arch import (
    DEFAULT_MAX_LEN,
    TERMINATE,
    Action,
    BlockArch,
    LayerCode,
    OpKind,
    arch_from_codes,
    canonical_serialize,
    legal_codes,
)
from .evaluate import parallel_window
from .mirror import MirrorWeights, mirror_stimuli

START = "<start>"
State = Union[LayerCode, str]

CSV_HEADER = "iteration,samples_total,epsilon,best_R,mean_R,best_acc,mean_topo"


def combined_reward(acc: float, topo: float, lam: float) -> float:
    """R = accuracy + lambda * topology score."""
    return acc + lam * topo


def shaped_rewards(total: float, T: int) -> list[float]:
    """Spread a block-level return uniformly over its T layers."""
    if T < 1:
        raise ValueError("T must be at least 1")
    return [total / T] * T


@dataclass
class SearchConfig:
    eta: float = 0.01            # Q learning rate
    gamma_q: float = 0.9         # Q discount
    lam: float = 30.0            # balance between accuracy and topology
    batch: int = 64              # replay draws per iteration
    max_len: int = DEFAULT_MAX_LEN
    iterations: int = 180
    samples_per_iteration: int = 64
    replay_capacity: int = 2000  # 0 means unbounded
    epsilon_start: float = 1.0
    epsilon_end: float = 0.1
    anneal_fraction: float = 0.9  # fraction of iterations spent annealing
    top_k: int = 5
    window: int = 1              # concurrent evaluations
    seed: int | None = None
    op_pool: tuple[OpKind, ...] = ()  # empty means: use the full pool

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")
        if not 0.0 < self.gamma_q <= 1.0:
            raise ValueError("gamma_q must lie in (0, 1]")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.batch < 1:
            raise ValueError("batch must be at least 1")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if self.samples_per_iteration < 1:
            raise ValueError("samples_per_iteration must be at least 1")
        if self.max_len < 1:
            raise ValueError("max_len must be at least 1")
        if self.replay_capacity < 0:
            raise ValueError("replay_capacity must be nonnegative")
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise ValueError("need 0 <= epsilon_end <= epsilon_start <= 1")
        if not 0.0 < self.anneal_fraction <= 1.0:
            raise ValueError("anneal_fraction must lie in (0, 1]")
        if self.top_k < 1:
            raise ValueError("top_k must be at least 1")
        if self.window < 1:
            raise ValueError("window must be at least 1")

    def pool(self) -> tuple[OpKind, ...]:
        """Operation pool in canonical order, whatever order was given."""
        from .arch import FULL_POOL
        if not self.op_pool:
            return FULL_POOL
        return tuple(sorted(set(self.op_pool), key=OpKind.sort_key))


def epsilon_at(iteration: int, config: SearchConfig) -> float:
    """Exploration rate for a 0-based iteration index: linear decay over
    the first anneal_fraction of the run, then flat."""
    horizon = int(math.floor(config.anneal_fraction * config.iterations))
    if horizon <= 1 or iteration >= horizon - 1:
        return config.epsilon_end
    frac = iteration / (horizon - 1)
    return config.epsilon_start - (config.epsilon_start - config.epsilon_end) * frac


class QTable:
    """Sparse (state, action) -> value map; unseen pairs read 0."""

    def __init__(self):
        self._q: dict[tuple[State, Action], float] = {}

    def get(self, state: State, action: Action) -> float:
        return self._q.get((state, action), 0.0)

    def set(self, state: State, action: Action, value: float) -> None:
        self._q[(state, action)] = value

    def max_over(self, state: State, actions: Iterable[Action]) -> float:
        return max((self.get(state, a) for a in actions), default=0.0)

    def argmax(self, state: State, actions: list[Action]) -> Action:
        # first maximizer wins, so ties resolve by the caller's action order
        best, best_val = None, -math.inf
        for a in actions:
            val = self.get(state, a)
            if val > best_val:
                best, best_val = a, val
        return best

    def items(self) -> Iterable[tuple[State, Action]]:
        return self._q.keys()

    def __len__(self) -> int:
        return len(self._q)


class ReplayBuffer:
    """Bounded FIFO of (arch, R) pairs."""

    def __init__(self, capacity: int = 2000):
        if capacity < 0:
            raise ValueError("capacity must be nonnegative (0 = unbounded)")
        self.capacity = capacity
        self._items: list[tuple[BlockArch, float]] = []

    def push(self, arch: BlockArch, reward: float) -> None:
        self._items.append((arch, reward))
        if self.capacity and len(self._items) > self.capacity:
            del self._items[0]

    def sample(self, n: int, rng: np.random.Generator) -> list[tuple[BlockArch, float]]:
        if not self._items:
            return []
        if len(self._items) <= n:
            return list(self._items)
        idx = rng.choice(len(self._items), size=n, replace=False)
        return [self._items[i] for i in idx]

    def __len__(self) -> int:
        return len(self._items)


def legal_actions(position: int, op_pool: Iterable[OpKind], max_len: int) -> list[Action]:
    """Actions available when deciding the layer at ``position`` (1-based):
    the legal descriptors there, plus TERMINATE once the block is nonempty.
    Beyond max_len only TERMINATE remains."""
    if position > max_len:
        return [TERMINATE]
    actions: list[Action] = list(legal_codes(position, op_pool))
    if position > 1:
        actions.append(TERMINATE)
    return actions


def sample_block(
    q: QTable,
    epsilon: float,
    config: SearchConfig,
    rng: np.random.Generator,
) -> BlockArch:
    """Epsilon-greedy episode: one sampled block."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    pool = config.pool()
    codes: list[LayerCode] = []
    state: State = START
    for position in range(1, config.max_len + 2):
        actions = legal_actions(position, pool, config.max_len)
        if rng.random() < epsilon:
            action = actions[int(rng.integers(len(actions)))]
        else:
            action = q.argmax(state, actions)
        if action == TERMINATE:
            break
        codes.append(action)
        state = action
    return arch_from_codes(codes, max_len=config.max_len)


@dataclass(frozen=True)
class Transition:
    state: State
    action: Action
    reward: float
    next_state: State | None     # None for the terminal transition
    next_position: int | None    # position decided from next_state


def episode_transitions(arch: BlockArch, total_reward: float) -> list[Transition]:
    """The (state, action, reward, next) sequence that produced ``arch``.

    The shaped reward of a layer attaches to the transition leaving it, so
    the entry transition from START carries 0 and the episode's rewards
    sum exactly to the block-level return.
    """
    layers = arch.layers
    T = len(layers)
    per_layer = shaped_rewards(total_reward, T)
    states: list[State] = [START] + [layer.code for layer in layers]
    transitions = []
    for t in range(T):
        transitions.append(
            Transition(
                state=states[t],
                action=states[t + 1],
                reward=0.0 if t == 0 else per_layer[t - 1],
                next_state=states[t + 1],
                next_position=t + 2,
            )
        )
    transitions.append(
        Transition(
            state=states[T],
            action=TERMINATE,
            reward=per_layer[T - 1],
            next_state=None,
            next_position=None,
        )
    )
    return transitions


def td_update(
    q: QTable,
    state: State,
    action: Action,
    reward: float,
    next_state: State | None,
    legal_next: Iterable[Action],
    eta: float,
    gamma_q: float,
) -> float:
    """One temporal-difference step:
    Q(s,a) <- (1-eta) Q(s,a) + eta (r + gamma * max_a' Q(s',a')).
    Terminal transitions (next_state None) use 0 for the max term."""
    if next_state is None:
        bootstrap = 0.0
    else:
        bootstrap = gamma_q * q.max_over(next_state, legal_next)
    value = (1.0 - eta) * q.get(state, action) + eta * (reward + bootstrap)
    q.set(state, action, value)
    return value


@dataclass
class LogRow:
    iteration: int
    samples_total: int
    epsilon: float
    best_R: float
    mean_R: float
    best_acc: float
    mean_topo: float

    def as_csv(self) -> str:
        return (
            f"{self.iteration},{self.samples_total},{self.epsilon!r},"
            f"{self.best_R!r},{self.mean_R!r},{self.best_acc!r},{self.mean_topo!r}"
        )


@dataclass(frozen=True)
class ScoredArch:
    arch: BlockArch
    reward: float
    accuracy: float

    @property
    def topology(self) -> float:
        """The weighted topology term folded into the reward."""
        return self.reward - self.accuracy


@dataclass
class SearchResult:
    top_by_reward: list[ScoredArch]
    top_by_accuracy: list[ScoredArch]
    qtable: QTable
    log_rows: list[LogRow] = field(default_factory=list)
    accuracy_history: list[float] = field(default_factory=list)
    reward_history: list[float] = field(default_factory=list)
    samples_total: int = 0
    errors: int = 0

    def csv_lines(self) -> list[str]:
        return [CSV_HEADER] + [row.as_csv() for row in self.log_rows]


def run_search(
    config: SearchConfig,
    evaluator,
    mirror: MirrorWeights,
) -> SearchResult:
    """The search loop: sample, evaluate, reward, replay, update.

    Evaluation failures skip the architecture (it earns no reward and no
    replay slot); only a broken evaluator aborts the run.  With window=1
    and a fixed seed the whole run, including the log, is reproducible.
    """
    rng = np.random.default_rng(config.seed)
    q = QTable()
    replay = ReplayBuffer(config.replay_capacity)
    pool = config.pool()

    best: dict[str, tuple[BlockArch, float]] = {}
    scored: dict[str, tuple[BlockArch, float, float]] = {}  # key -> (arch, R, acc)
    result = SearchResult(top_by_reward=[], top_by_accuracy=[], qtable=q)

    for iteration in range(config.iterations):
        epsilon = epsilon_at(iteration, config)
        archs = [
            sample_block(q, epsilon, config, rng)
            for _ in range(config.samples_per_iteration)
        ]
        outcomes = parallel_window(evaluator, archs, window=config.window)
        result.samples_total += len(archs)

        iter_rewards, iter_topos = [], []
        for outcome in outcomes:
            if not outcome.ok:
                result.errors += 1
                continue
            acc = outcome.accuracy
            topo = mirror_stimuli(mirror, outcome.arch)
            reward = combined_reward(acc, topo, config.lam)
            replay.push(outcome.arch, reward)
            result.accuracy_history.append(acc)
            result.reward_history.append(reward)
            iter_rewards.append(reward)
            iter_topos.append(topo)
            scored[canonical_serialize(outcome.arch)] = ScoredArch(
                arch=outcome.arch, reward=reward, accuracy=acc
            )

        for arch, reward in replay.sample(config.batch, rng):
            for tr in episode_transitions(arch, reward):
                legal_next = (
                    legal_actions(tr.next_position, pool, config.max_len)
                    if tr.next_state is not None
                    else ()
                )
                td_update(
                    q, tr.state, tr.action, tr.reward, tr.next_state,
                    legal_next, config.eta, config.gamma_q,
                )

        result.log_rows.append(
            LogRow(
                iteration=iteration,
                samples_total=result.samples_total,
                epsilon=epsilon,
                best_R=max(result.reward_history, default=float("nan")),
                mean_R=float(np.mean(iter_rewards)) if iter_rewards else float("nan"),
                best_acc=max(result.accuracy_history, default=float("nan")),
                mean_topo=float(np.mean(iter_topos)) if iter_topos else float("nan"),
            )
        )

    ranked_r = sorted(scored.values(), key=lambda item: -item.reward)
    ranked_a = sorted(scored.values(), key=lambda item: -item.accuracy)
    result.top_by_reward = ranked_r[: config.top_k]
    result.top_by_accuracy = ranked_a[: config.top_k]
    return result
