"""
Plugging in an external evaluator
=================================

Real accuracy numbers come from separate worker processes speaking a
one-JSON-object-per-line protocol on stdin/stdout:

    -> {"id": 7, "arch": {"layers": [...]}}
    <- {"id": 7, "accuracy": 63.1}       on success
    <- {"id": 7, "error": "why"}         on per-architecture failure

This script writes a tiny worker to disk, talks to it through the
bridge, and fans requests out over a bounded window.
"""

import sys
import tempfile
from pathlib import Path

from irlas import (
    ADD,
    DWCONV3,
    IDENTITY,
    ExternalEvaluator,
    enumerate_blocks,
    parallel_window,
)

# a worker that scores blocks by layer count and rejects 3-layer ones
WORKER = '''
import json, sys
for line in sys.stdin:
    req = json.loads(line)
    layers = req["arch"]["layers"]
    if len(layers) == 3:
        resp = {"id": req["id"], "error": "refusing 3-layer blocks"}
    else:
        resp = {"id": req["id"], "accuracy": 50.0 + 5.0 * len(layers)}
    print(json.dumps(resp), flush=True)
'''

with tempfile.TemporaryDirectory() as tmp:
    script = Path(tmp) / "worker.py"
    script.write_text(WORKER)
    evaluator = ExternalEvaluator(f"{sys.executable} {script}", timeout=30.0)

    pool = (DWCONV3, IDENTITY, ADD)
    space = list(enumerate_blocks(3, pool))
    blocks = space[:8] + space[-4:]  # mostly short blocks plus 3-layer ones
    outcomes = parallel_window(evaluator, blocks, window=4)
    evaluator.close()

ok = sum(1 for o in outcomes if o.ok)
print(f"{ok} scored, {len(outcomes) - ok} rejected\n")
for outcome in outcomes:
    shape = " ".join(
        f"{l.op.name}({l.pred1},{l.pred2})" for l in outcome.arch.layers
    )
    if outcome.ok:
        print(f"  {outcome.accuracy:5.1f}  {shape}")
    else:
        print(f"  error  {shape}: {outcome.error}")
