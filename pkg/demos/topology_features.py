"""
From blocks to feature counts
=============================

Topology scoring works on a discounted sum of per-layer feature vectors:
a one-hot over the six op categories, the kernel size, and the two
predecessor codes, all scaled into [0, 1].  Layer t is discounted by
gamma^t, so early layers dominate the count.
"""

import numpy as np

from irlas import (
    cosine_similarity,
    expert_library,
    feature_count,
    residual_variants,
    to_trajectory,
)

GAMMA = 0.9

expert = expert_library("resnet_block")
traj = to_trajectory(expert.arch)
count = feature_count(traj, GAMMA)

np.set_printoptions(precision=4, suppress=True)
print("feature dimension:", count.mu.shape[0])
print("expert mu:", count.mu)

# structural edits move the count; similar blocks stay close
print()
print(f"{'variant':<20} {'cosine':>8} {'|d mu|':>8}")
for name, arch in residual_variants().items():
    mu = feature_count(to_trajectory(arch), GAMMA).mu
    sim = cosine_similarity(mu, count.mu)
    dist = float(np.linalg.norm(mu - count.mu))
    print(f"{name:<20} {sim:>8.4f} {dist:>8.4f}")

# stronger discounting concentrates the count on the first layer
print()
for gamma in (0.5, 0.9, 1.0):
    mu = feature_count(traj, gamma).mu
    print(f"gamma={gamma}: |mu| = {np.linalg.norm(mu):.4f}")
