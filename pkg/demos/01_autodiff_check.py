"""
Reverse-mode differentiation, checked by hand
=============================================

Every loss in the package is built from a few dozen tensor ops. Here we
push a small batch through a two-layer network, ask for gradients and
compare them with central finite differences.
"""

import numpy as np

from tripletgan import tensor as tn
from tripletgan.tensor import Tensor, backward

rng = np.random.default_rng(0)

# a 3 -> 5 -> 2 network with tanh in the middle
W1 = Tensor(rng.standard_normal((3, 5)) * 0.5, requires_grad=True)
b1 = Tensor(rng.standard_normal(5) * 0.1, requires_grad=True)
W2 = Tensor(rng.standard_normal((5, 2)) * 0.5, requires_grad=True)
x = rng.standard_normal((4, 3))


def loss_fn():
    h = tn.tanh(Tensor(x) @ W1 + b1)
    out = h @ W2
    # log-sum-exp over the two outputs, averaged over the batch
    return tn.mean(tn.logsumexp(out, axis=1))


loss = loss_fn()
backward(loss)
print("loss", loss.item())
print("graph root op:", loss.op)

# finite differences on W1, one entry at a time
h = 1e-5
num = np.zeros_like(W1.data)
for idx in np.ndindex(W1.shape):
    keep = W1.data[idx]
    W1.data[idx] = keep + h
    up = loss_fn().item()
    W1.data[idx] = keep - h
    down = loss_fn().item()
    W1.data[idx] = keep
    num[idx] = (up - down) / (2 * h)

err = np.abs(W1.grad - num).max() / np.abs(num).max()
print("relative error on W1:", err)

# logsumexp shifts by the max, so huge inputs are fine
print("logsumexp([1000, 1000]) =", tn.logsumexp([1000.0, 1000.0]).item())
