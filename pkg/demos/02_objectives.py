"""
The losses, one number at a time
================================

The embedding T(x) is both a metric space for triplets and the feature
map of a discriminator. This script evaluates each objective on inputs
small enough to check in your head.
"""

import math

import numpy as np

from tripletgan import objectives as obj
from tripletgan.tensor import Tensor

# A triplet: query at the origin, positive at distance 1, negative at 2.
q = np.zeros((1, 2))
pos = np.array([[1.0, 0.0]])
neg = np.array([[0.0, 2.0]])
d = obj.triplet_distances(q, pos, neg)
print("d+ =", d.d_pos.item(), " d- =", d.d_neg.item())
print("p(correct order) =", obj.triplet_prob(d).item(), "(sigmoid(1) =", 1 / (1 + math.exp(-1)), ")")
print("triplet loss    =", obj.triplet_loss(q, pos, neg).item())

# Swap positive and negative: the loss grows, the probabilities sum to one.
swapped = obj.triplet_prob(obj.triplet_distances(q, neg, pos)).item()
print("p + p_swapped   =", obj.triplet_prob(d).item() + swapped)

# The discriminator reads real-vs-fake off the same features:
# D = sum(exp t) / (sum(exp t) + 1).
for feats in ([[0.0]], [[0.0, 0.0]], [[3.0, -1.0, 0.5]]):
    print("D_T", feats, "=", obj.disc_prob(np.array(feats)).item())

# Everything is computed in log space, so extreme features are harmless.
big = np.full((1, 4), 1000.0)
print("log(1 - D) at t=1000:", obj.log_disc_fake(big).item())

# Unsupervised part: with D = 0.5 on both sides the loss is 2 ln 2.
zero = np.zeros((8, 1))
print("L_Tu at D=0.5:", obj.unsup_disc_loss(zero, zero).item(), " 2 ln 2 =", 2 * math.log(2))

# Feature matching compares batch means only.
real = np.array([[1.0, 1.0], [3.0, 3.0]])
fake = np.array([[1.0, 1.0]])
print("L_G =", obj.feature_matching_loss(real, fake).item())

# The discriminator step adds the two parts.
loss, report = obj.combined_disc_loss((Tensor(q), Tensor(pos), Tensor(neg)), zero, zero)
print(report)
