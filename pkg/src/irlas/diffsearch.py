"""Topology guidance for gradient-based architecture search.

A cell is a small DAG on numbered nodes with one candidate-op choice per
node pair, relaxed to per-edge logits.  The softmax of the logits is a
product distribution over discrete architectures.  Sampling an
architecture is non-differentiable, so the expected topology score
E[F_topology] is ascended with the REINFORCE estimator: score times
grad-log-probability, averaged over K samples.

Cell-to-block embedding (fixed so the feature count is well-defined):
edges are ordered lexicographically by (i, j); edge e becomes the block
layer at position e+1 applying its sampled unary op to the representation
of source node i, which is the block input for i = 0 and the layer of
edge (i-1, i) otherwise.  The embedded block's max_len is the edge count.

The task objective stands in for a supernet training loss: any callback
returning (loss, grad) over the logits works, and a quadratic with a
known minimizer is the default.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .arch import (
    AVGPOOL3,
    AVGPOOL5,
    DWCONV1,
    DWCONV3,
    DWCONV5,
    IDENTITY,
    MAXPOOL3,
    MAXPOOL5,
    BlockArch,
    LayerCode,
    OpKind,
    arch_from_codes,
    op_by_name,
)
from .mirror import MirrorWeights, mirror_stimuli

UNARY_POOL = (DWCONV1, DWCONV3, DWCONV5, MAXPOOL3, MAXPOOL5,
              AVGPOOL3, AVGPOOL5, IDENTITY)


def cell_edges(nodes: int) -> list[tuple[int, int]]:
    """All node pairs (i, j), i < j, in lexicographic order."""
    return [(i, j) for i in range(nodes) for j in range(i + 1, nodes)]


@dataclass
class AlphaCell:
    """Continuous architecture parameters: one logit row per edge."""

    nodes: int
    ops: tuple[OpKind, ...] = UNARY_POOL
    logits: np.ndarray = None

    def __post_init__(self):
        if self.nodes < 2:
            raise ValueError("a cell needs at least 2 nodes")
        if not self.ops:
            raise ValueError("op pool must be nonempty")
        if any(op.is_binary for op in self.ops):
            raise ValueError("cell edges carry unary ops only")
        shape = (len(self.edges), len(self.ops))
        if self.logits is None:
            self.logits = np.zeros(shape)
        else:
            self.logits = np.asarray(self.logits, dtype=float)
            if self.logits.shape != shape:
                raise ValueError(f"logits must have shape {shape}, got {self.logits.shape}")
        if not np.all(np.isfinite(self.logits)):
            raise ValueError("logits must be finite")

    @property
    def edges(self) -> list[tuple[int, int]]:
        return cell_edges(self.nodes)


@dataclass(frozen=True)
class ArchDistribution:
    """Per-edge softmax probabilities, rows matching the cell's edges."""

    probs: np.ndarray
    ops: tuple[OpKind, ...]
    nodes: int


def softmax_probs(cell: AlphaCell) -> ArchDistribution:
    shifted = cell.logits - cell.logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return ArchDistribution(
        probs=exp / exp.sum(axis=1, keepdims=True),
        ops=cell.ops,
        nodes=cell.nodes,
    )


def _source_pred_code(edge_index: int, edges: list[tuple[int, int]]) -> int:
    i, _ = edges[edge_index]
    if i == 0:
        return 1  # block input
    direct = edges.index((i - 1, i))
    return direct + 2  # layer at position direct+1


def cell_arch_from_choices(choices: list[int], dist: ArchDistribution) -> BlockArch:
    """Embed one discrete per-edge op assignment as a block."""
    edges = cell_edges(dist.nodes)
    codes = [
        LayerCode(op=dist.ops[op_idx], pred1=_source_pred_code(e, edges))
        for e, op_idx in enumerate(choices)
    ]
    return arch_from_codes(codes, max_len=len(edges))


def sample_discrete(
    dist: ArchDistribution,
    rng: np.random.Generator,
) -> tuple[BlockArch, float, list[int]]:
    """One architecture from the product distribution, with its joint
    probability p_k and the raw per-edge choices."""
    choices, p_k = [], 1.0
    for row in dist.probs:
        idx = int(rng.choice(len(row), p=row))
        choices.append(idx)
        p_k *= float(row[idx])
    return cell_arch_from_choices(choices, dist), p_k, choices


def topology_loss_and_grad(
    cell: AlphaCell,
    w: MirrorWeights,
    K: int,
    rng: np.random.Generator,
) -> tuple[float, np.ndarray]:
    """REINFORCE estimate of E[F_topology] and its logits gradient.

    grad log p_k for one sample is, per edge, one-hot(choice) minus the
    softmax row; the estimator averages score-weighted grad-log terms
    over K samples.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    dist = softmax_probs(cell)
    grad = np.zeros_like(cell.logits)
    total = 0.0
    for _ in range(K):
        arch, _, choices = sample_discrete(dist, rng)
        score = mirror_stimuli(w, arch)
        total += score
        for e, idx in enumerate(choices):
            onehot = np.zeros(len(dist.ops))
            onehot[idx] = 1.0
            grad[e] += score * (onehot - dist.probs[e])
    return total / K, grad / K


def exact_topology_loss_and_grad(
    cell: AlphaCell,
    w: MirrorWeights,
) -> tuple[float, np.ndarray]:
    """Closed-form E[F_topology] and gradient by full enumeration.

    Exponential in the edge count; usable only on tiny cells, where it
    anchors the REINFORCE estimator's correctness.
    """
    dist = softmax_probs(cell)
    n_edges, n_ops = cell.logits.shape
    total = 0.0
    grad = np.zeros_like(cell.logits)

    def rec(e: int, choices: list[int], p: float):
        nonlocal total, grad
        if e == n_edges:
            score = mirror_stimuli(w, cell_arch_from_choices(choices, dist))
            total += p * score
            for j, idx in enumerate(choices):
                onehot = np.zeros(n_ops)
                onehot[idx] = 1.0
                grad[j] += p * score * (onehot - dist.probs[j])
            return
        for idx in range(n_ops):
            rec(e + 1, choices + [idx], p * float(dist.probs[e][idx]))

    rec(0, [], 1.0)
    return total, grad


@dataclass
class QuadraticTaskLoss:
    """Synthetic stand-in for a training loss: 0.5 ||logits - target||^2,
    minimized exactly at ``target``."""

    target: np.ndarray

    def __call__(self, logits: np.ndarray) -> tuple[float, np.ndarray]:
        diff = logits - self.target
        return 0.5 * float(np.sum(diff * diff)), diff


@dataclass
class DiffStep:
    step: int
    task_loss: float
    topo_estimate: float
    grad_norm: float

    def as_csv(self) -> str:
        return f"{self.step},{self.task_loss!r},{self.topo_estimate!r},{self.grad_norm!r}"


DIFF_CSV_HEADER = "step,task_loss,topo_estimate,grad_norm"


@dataclass
class DiffResult:
    cell: AlphaCell
    trace: list[DiffStep] = field(default_factory=list)
    diverged: bool = False

    def csv_lines(self) -> list[str]:
        return [DIFF_CSV_HEADER] + [s.as_csv() for s in self.trace]


def run_diff_search(
    cell: AlphaCell,
    w: MirrorWeights,
    task_loss,
    scale: float = 0.5,
    steps: int = 500,
    lr: float = 0.1,
    K: int = 5,
    rng: np.random.Generator | None = None,
) -> DiffResult:
    """Descend the task loss while ascending expected topology score.

    The topology term is reward-like, so its REINFORCE gradient enters
    the update with opposite sign to the task gradient:

        logits <- logits - lr * (task_grad - scale * topo_grad)

    Non-finite logits abort the run with the trace collected so far.
    """
    rng = rng or np.random.default_rng()
    logits = cell.logits.copy()
    result = DiffResult(cell=cell)
    for step in range(steps):
        loss, task_grad = task_loss(logits)
        topo, topo_grad = topology_loss_and_grad(
            AlphaCell(cell.nodes, cell.ops, logits), w, K, rng
        )
        update = task_grad - scale * topo_grad
        stepped = logits - lr * update
        result.trace.append(
            DiffStep(
                step=step,
                task_loss=loss,
                topo_estimate=topo,
                grad_norm=float(np.linalg.norm(update)),
            )
        )
        if not np.all(np.isfinite(stepped)):
            # keep the last finite iterate
            result.diverged = True
            break
        logits = stepped
    result.cell = AlphaCell(cell.nodes, cell.ops, logits)
    return result


def cell_to_obj(cell: AlphaCell) -> dict:
    return {
        "nodes": cell.nodes,
        "ops": [op.name for op in cell.ops],
        "logits": {
            f"{i},{j}": [float(v) for v in cell.logits[e]]
            for e, (i, j) in enumerate(cell.edges)
        },
    }


def cell_from_obj(obj: dict) -> AlphaCell:
    try:
        nodes = int(obj["nodes"])
        ops = tuple(op_by_name(name) for name in obj["ops"])
        edges = cell_edges(nodes)
        logits = np.array([obj["logits"][f"{i},{j}"] for i, j in edges], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed cell object: {exc}") from None
    return AlphaCell(nodes, ops, logits)
