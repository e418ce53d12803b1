"""
Does the learned score react to structural edits?
=================================================

A useful topology score must move when the block's wiring changes.  This
script trains weights against the shortcut block, then perturbs the
block three ways (prepend a conv, append a conv, drop the shortcut) and
reports how far the feature count and the score move for each edit.
"""

import numpy as np

from irlas import (
    ADD,
    DWCONV3,
    IDENTITY,
    IrlConfig,
    expert_library,
    feature_count,
    mirror_stimuli,
    residual_variants,
    to_trajectory,
    train_mirror,
)

ML = 4  # the perturbed blocks need one spare position
pool = (DWCONV3, IDENTITY, ADD)
expert = expert_library("resnet_block", max_len=ML)
weights, trace = train_mirror(expert, IrlConfig(op_pool=pool, max_len=ML))
print(f"trained in {len(trace.iterations)} iterations, "
      f"margin {weights.final_margin:.4f}")

mu_star = feature_count(to_trajectory(expert.arch), weights.gamma).mu
f_star = mirror_stimuli(weights, expert.arch)

print(f"\n{'edit':<20} {'|d mu|':>8} {'|d F|':>8}")
for name, arch in residual_variants(max_len=ML).items():
    mu = feature_count(to_trajectory(arch), weights.gamma).mu
    d_mu = float(np.linalg.norm(mu - mu_star))
    d_f = abs(mirror_stimuli(weights, arch) - f_star)
    print(f"{name:<20} {d_mu:>8.4f} {d_f:>8.4f}")

# the same table is available from the command line:
#   irlas irl-train --pool dwconv3,identity,add --max-len 4 --out w.json
#   irlas modify-diag --weights w.json --max-len 4
