"""Block architecture representation.

A *block* is a small DAG of layers drawn from a fixed operation pool; full
networks are assumed to be built by stacking blocks, which is out of scope
here.  Each layer names its operation, kernel size and up to two
predecessors.  Predecessor codes use the convention:

    0       absent (only legal as ``pred2`` of a unary op)
    1       the block input
    i + 1   the layer at position i

Everything in this module is an immutable value: blocks can be shared
between threads freely.  The module also provides the bijection between
blocks and state-action trajectories, a canonical JSON serialization used
as the evaluator cache key, exhaustive enumeration of small search spaces
(the brute-force oracle used throughout the test suite), and DOT export.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Sequence, Union

DEFAULT_MAX_LEN = 24


class ArchError(Exception):
    """Base error for architecture handling."""


class InvalidArchitectureError(ArchError):
    """Raised when an operation requires a valid block and got violations."""

    def __init__(self, violations: Sequence[str]):
        super().__init__("invalid architecture: " + "; ".join(violations))
        self.violations = list(violations)


class InconsistentTrajectoryError(ArchError):
    """Raised when trajectory steps do not describe a single valid block."""


class ParseError(ArchError):
    """Raised on malformed or invalid canonical architecture text."""


class OpCategory(str, Enum):
    DWCONV = "dwconv"
    MAXPOOL = "maxpool"
    AVGPOOL = "avgpool"
    IDENTITY = "identity"
    ADD = "add"
    CONCAT = "concat"


# Canonical category order; also the one-hot layout of the feature encoding.
CATEGORY_ORDER: tuple[OpCategory, ...] = (
    OpCategory.DWCONV,
    OpCategory.MAXPOOL,
    OpCategory.AVGPOOL,
    OpCategory.IDENTITY,
    OpCategory.ADD,
    OpCategory.CONCAT,
)

LEGAL_KERNELS: dict[OpCategory, tuple[int, ...]] = {
    OpCategory.DWCONV: (1, 3, 5),
    OpCategory.MAXPOOL: (3, 5),
    OpCategory.AVGPOOL: (3, 5),
    OpCategory.IDENTITY: (0,),
    OpCategory.ADD: (0,),
    OpCategory.CONCAT: (0,),
}

BINARY_CATEGORIES = frozenset({OpCategory.ADD, OpCategory.CONCAT})


@dataclass(frozen=True)
class OpKind:
    """An operation choice: category plus kernel size (0 when kernel-free)."""

    category: OpCategory
    kernel: int = 0

    def __post_init__(self):
        if self.kernel not in LEGAL_KERNELS[self.category]:
            raise ValueError(
                f"kernel {self.kernel} is not legal for {self.category.value} "
                f"(legal: {LEGAL_KERNELS[self.category]})"
            )

    @property
    def is_binary(self) -> bool:
        return self.category in BINARY_CATEGORIES

    @property
    def name(self) -> str:
        """Short token such as ``dwconv3`` or ``add``."""
        if self.kernel:
            return f"{self.category.value}{self.kernel}"
        return self.category.value

    def sort_key(self) -> tuple[int, int]:
        return (CATEGORY_ORDER.index(self.category), self.kernel)

    def __repr__(self):  # compact, readable in Q-table dumps
        return f"OpKind({self.name})"


DWCONV1 = OpKind(OpCategory.DWCONV, 1)
DWCONV3 = OpKind(OpCategory.DWCONV, 3)
DWCONV5 = OpKind(OpCategory.DWCONV, 5)
MAXPOOL3 = OpKind(OpCategory.MAXPOOL, 3)
MAXPOOL5 = OpKind(OpCategory.MAXPOOL, 5)
AVGPOOL3 = OpKind(OpCategory.AVGPOOL, 3)
AVGPOOL5 = OpKind(OpCategory.AVGPOOL, 5)
IDENTITY = OpKind(OpCategory.IDENTITY)
ADD = OpKind(OpCategory.ADD)
CONCAT = OpKind(OpCategory.CONCAT)

#: Every available operation, in canonical order.
FULL_POOL: tuple[OpKind, ...] = (
    DWCONV1, DWCONV3, DWCONV5,
    MAXPOOL3, MAXPOOL5,
    AVGPOOL3, AVGPOOL5,
    IDENTITY, ADD, CONCAT,
)

_OPS_BY_NAME = {op.name: op for op in FULL_POOL}


def op_by_name(name: str) -> OpKind:
    """Look up an operation by its short token (``dwconv3``, ``add``, ...)."""
    try:
        return _OPS_BY_NAME[name]
    except KeyError:
        raise ValueError(f"unknown op name {name!r}") from None


def sorted_pool(op_pool: Iterable[OpKind]) -> tuple[OpKind, ...]:
    """The pool as a duplicate-free tuple in canonical order."""
    return tuple(sorted(set(op_pool), key=OpKind.sort_key))


@dataclass(frozen=True)
class LayerCode:
    """A position-free layer descriptor: the currency of agent decisions."""

    op: OpKind
    pred1: int
    pred2: int = 0

    def at(self, position: int) -> "Layer":
        return Layer(position=position, op=self.op, pred1=self.pred1, pred2=self.pred2)

    def sort_key(self) -> tuple[int, int, int, int]:
        return (*self.op.sort_key(), self.pred1, self.pred2)

    def __repr__(self):
        return f"LayerCode({self.op.name},{self.pred1},{self.pred2})"


@dataclass(frozen=True)
class Layer:
    """A layer at a concrete 1-based position inside a block."""

    position: int
    op: OpKind
    pred1: int
    pred2: int = 0

    @property
    def code(self) -> LayerCode:
        return LayerCode(op=self.op, pred1=self.pred1, pred2=self.pred2)

    def __repr__(self):
        return f"Layer(t={self.position},{self.op.name},{self.pred1},{self.pred2})"


@dataclass(frozen=True)
class BlockArch:
    """An ordered block of layers.

    ``max_len`` is a validity bound, not part of the architecture's identity:
    equality and hashing compare the layers only, so a block survives a
    round-trip through serialization or a trajectory regardless of the bound
    it was built under.
    """

    layers: tuple[Layer, ...]
    max_len: int = field(default=DEFAULT_MAX_LEN, compare=False)

    def __len__(self) -> int:
        return len(self.layers)


#: Sentinel action that ends a block instead of appending a layer.
TERMINATE = "<terminate>"

Action = Union[LayerCode, str]


@dataclass(frozen=True)
class TrajectoryStep:
    """One (state, action) pair: the layer at step t and the decision taken at t."""

    state: Layer
    action: Action


@dataclass(frozen=True)
class Trajectory:
    """The state-action view of a block: step t's state is layer t, its action
    is the decision producing layer t+1, and the final action is TERMINATE."""

    steps: tuple[TrajectoryStep, ...]
    max_len: int = field(default=DEFAULT_MAX_LEN, compare=False)

    def __len__(self) -> int:
        return len(self.steps)


def _layer_violations(layer: Layer, position: int) -> list[str]:
    out = []
    if layer.position != position:
        out.append(f"layer {position}: stored position {layer.position} != {position}")
    if layer.pred1 == 0:
        out.append(f"layer {position}: pred1 must not be 0")
    if layer.op.is_binary:
        if layer.pred2 == 0:
            out.append(f"layer {position}: binary op {layer.op.name} needs two predecessors")
        elif layer.pred1 == layer.pred2:
            out.append(f"layer {position}: binary op with identical predecessors")
    else:
        if layer.pred2 != 0:
            out.append(f"layer {position}: unary op {layer.op.name} must have pred2 = 0")
    # legal nonzero codes at position t are 1..t (input or an earlier layer)
    for slot, pred in (("pred1", layer.pred1), ("pred2", layer.pred2)):
        if pred < 0 or pred > position:
            out.append(f"layer {position}: {slot} code {pred} out of range (0..{position})")
    return out


def validate(arch: BlockArch) -> list[str]:
    """All invariant violations of ``arch``; an empty list means ok."""
    violations = []
    n = len(arch.layers)
    if n < 1:
        violations.append("block must contain at least one layer")
    if n > arch.max_len:
        violations.append(f"length {n} exceeds max_len {arch.max_len}")
    for idx, layer in enumerate(arch.layers):
        violations.extend(_layer_violations(layer, idx + 1))
    return violations


def require_valid(arch: BlockArch) -> BlockArch:
    violations = validate(arch)
    if violations:
        raise InvalidArchitectureError(violations)
    return arch


def arch_from_codes(codes: Sequence[LayerCode], max_len: int = DEFAULT_MAX_LEN) -> BlockArch:
    """Assemble a block from per-position decisions."""
    layers = tuple(code.at(t + 1) for t, code in enumerate(codes))
    return BlockArch(layers=layers, max_len=max_len)


def to_trajectory(arch: BlockArch) -> Trajectory:
    """The state-action trajectory of a valid block."""
    require_valid(arch)
    steps = []
    for idx, layer in enumerate(arch.layers):
        if idx + 1 < len(arch.layers):
            action: Action = arch.layers[idx + 1].code
        else:
            action = TERMINATE
        steps.append(TrajectoryStep(state=layer, action=action))
    return Trajectory(steps=tuple(steps), max_len=arch.max_len)


def from_trajectory(traj: Trajectory) -> BlockArch:
    """Inverse of :func:`to_trajectory`."""
    if not traj.steps:
        raise InconsistentTrajectoryError("empty trajectory does not describe a block")
    for idx, step in enumerate(traj.steps):
        is_last = idx + 1 == len(traj.steps)
        if is_last:
            if step.action != TERMINATE:
                raise InconsistentTrajectoryError("final action must be TERMINATE")
        else:
            if step.action == TERMINATE:
                raise InconsistentTrajectoryError(f"TERMINATE before final step (step {idx + 1})")
            if step.action != traj.steps[idx + 1].state.code:
                raise InconsistentTrajectoryError(
                    f"action at step {idx + 1} does not produce the state at step {idx + 2}"
                )
    arch = BlockArch(layers=tuple(s.state for s in traj.steps), max_len=traj.max_len)
    violations = validate(arch)
    if violations:
        raise InconsistentTrajectoryError("; ".join(violations))
    return arch


def arch_to_obj(arch: BlockArch) -> dict:
    """The plain-data form used by the file format and the wire protocol."""
    return {
        "layers": [
            {"op": layer.op.category.value, "k": layer.op.kernel, "p": [layer.pred1, layer.pred2]}
            for layer in arch.layers
        ]
    }


def canonical_serialize(arch: BlockArch) -> str:
    """Deterministic whitespace-free text; the evaluator cache key."""
    require_valid(arch)
    return json.dumps(arch_to_obj(arch), separators=(",", ":"))


def arch_from_obj(obj: object, max_len: int = DEFAULT_MAX_LEN) -> BlockArch:
    """Build and validate a block from its plain-data form."""
    if not isinstance(obj, dict) or not isinstance(obj.get("layers"), list):
        raise ParseError("expected an object with a 'layers' list")
    layers = []
    for idx, item in enumerate(obj["layers"]):
        if not isinstance(item, dict):
            raise ParseError(f"layer {idx + 1}: expected an object")
        try:
            op_name = item["op"]
            kernel = item["k"]
            preds = item["p"]
        except (KeyError, TypeError) as exc:
            raise ParseError(f"layer {idx + 1}: missing field {exc}") from None
        try:
            category = OpCategory(op_name)
        except ValueError:
            raise ParseError(f"layer {idx + 1}: unknown op name {op_name!r}") from None
        if not isinstance(kernel, int) or isinstance(kernel, bool):
            raise ParseError(f"layer {idx + 1}: kernel must be an integer")
        if (not isinstance(preds, list) or len(preds) != 2
                or not all(isinstance(p, int) and not isinstance(p, bool) for p in preds)):
            raise ParseError(f"layer {idx + 1}: 'p' must be a pair of integers")
        try:
            op = OpKind(category, kernel)
        except ValueError as exc:
            raise ParseError(f"layer {idx + 1}: {exc}") from None
        layers.append(Layer(position=idx + 1, op=op, pred1=preds[0], pred2=preds[1]))
    arch = BlockArch(layers=tuple(layers), max_len=max_len)
    violations = validate(arch)
    if violations:
        raise ParseError("; ".join(violations))
    return arch


def parse_arch(text: str, max_len: int = DEFAULT_MAX_LEN) -> BlockArch:
    """Parse canonical architecture text back into a valid block."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid JSON: {exc}") from None
    return arch_from_obj(obj, max_len=max_len)


def legal_codes(position: int, op_pool: Sequence[OpKind]) -> list[LayerCode]:
    """Every legal layer descriptor at a 1-based position, in canonical order.

    The legal set depends only on the position: nonzero predecessor codes
    range over 1..position regardless of what the earlier layers are.
    """
    codes = []
    for op in sorted_pool(op_pool):
        if op.is_binary:
            if position < 2:
                continue
            for p1 in range(1, position + 1):
                for p2 in range(1, position + 1):
                    if p1 != p2:
                        codes.append(LayerCode(op=op, pred1=p1, pred2=p2))
        else:
            for p1 in range(1, position + 1):
                codes.append(LayerCode(op=op, pred1=p1))
    return codes


def enumerate_blocks(max_layers: int, op_pool: Iterable[OpKind]) -> Iterator[BlockArch]:
    """Yield every valid block with 1..max_layers layers, exactly once.

    Deterministic order: shorter blocks first, then lexicographic in the
    canonical per-position descriptor order.  Combinatorial growth makes
    this practical only for small spaces (max_layers <= 4 or so); those
    small spaces are the exhaustive oracle the tests compare against.
    """
    pool = sorted_pool(op_pool)
    per_position = [legal_codes(t, pool) for t in range(1, max_layers + 1)]

    def exact_length(prefix: list[LayerCode], n: int) -> Iterator[BlockArch]:
        t = len(prefix)
        if t == n:
            yield arch_from_codes(prefix, max_len=max_layers)
            return
        for code in per_position[t]:
            yield from exact_length(prefix + [code], n)

    for n in range(1, max_layers + 1):
        yield from exact_length([], n)


def successor_free_positions(arch: BlockArch) -> list[int]:
    """Positions of layers no later layer consumes; they feed the implicit
    output concat."""
    referenced = set()
    for layer in arch.layers:
        for pred in (layer.pred1, layer.pred2):
            if pred > 1:
                referenced.add(pred - 1)
    return [layer.position for layer in arch.layers if layer.position not in referenced]


def to_dot(arch: BlockArch, name: str = "block") -> str:
    """DOT digraph: an input node, one node per layer, and the implicit
    output concat node."""
    require_valid(arch)
    lines = [f"digraph {name} {{"]
    lines.append('  input [label="input" shape=oval];')
    for layer in arch.layers:
        label = layer.op.category.value
        if layer.op.kernel:
            label = f"{label} {layer.op.kernel}"
        lines.append(f'  l{layer.position} [label="{label}" shape=box];')
    lines.append('  output [label="output" shape=oval];')
    for layer in arch.layers:
        for pred in (layer.pred1, layer.pred2):
            if pred == 0:
                continue
            src = "input" if pred == 1 else f"l{pred - 1}"
            lines.append(f"  {src} -> l{layer.position};")
    for position in successor_free_positions(arch):
        lines.append(f"  l{position} -> output;")
    lines.append("}")
    return "\n".join(lines) + "\n"
