"""
Building blocks by hand
=======================

A block is a small DAG of layers.  Each layer names its operation and one
or two predecessors by code: 1 is the block input, i+1 is layer i.  This
script assembles the classic two-conv-plus-shortcut block, checks it,
serializes it, and renders it as DOT.
"""

from irlas import (
    ADD,
    DWCONV3,
    LayerCode,
    arch_from_codes,
    canonical_serialize,
    enumerate_blocks,
    parse_arch,
    to_dot,
    validate,
)

# two 3x3 depthwise convs in a chain, then add the chain to the input
codes = [
    LayerCode(op=DWCONV3, pred1=1),
    LayerCode(op=DWCONV3, pred1=2),
    LayerCode(op=ADD, pred1=1, pred2=3),
]
block = arch_from_codes(codes, max_len=24)
print("layers:", len(block.layers))
print("violations:", validate(block) or "none")

# the canonical text form round-trips exactly
text = canonical_serialize(block)
print("canonical:", text)
assert parse_arch(text) == block

# a malformed variant: Add with twice the same predecessor
bad = arch_from_codes(
    [LayerCode(op=DWCONV3, pred1=1), LayerCode(op=ADD, pred1=1, pred2=1)],
    max_len=24,
)
print("bad block violations:", validate(bad))

# graph rendering for writeups: feed this to `dot -Tpng`
print()
print(to_dot(block, name="shortcut_block"))

# small spaces can be enumerated outright
from irlas import IDENTITY

pool = (DWCONV3, IDENTITY, ADD)
count = sum(1 for _ in enumerate_blocks(3, pool))
print(f"blocks with up to 3 layers over {len(pool)} ops: {count}")
