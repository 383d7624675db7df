"""
The MNIST protocol
==================

100 labeled digits (10 per class), 16 output features, 60000 random
triplets per epoch and 9-NN evaluation on the 10000 test images.

Pass the directory holding the four IDX files to run it for real; the
full 500-epoch schedule takes many hours on a CPU. Without an argument
the script writes a tiny synthetic IDX pair and runs two epochs on it,
which exercises the same code path in seconds.
"""

import os
import sys
import tempfile

import numpy as np

from tripletgan import ModelConfig, TrainConfig, evaluate, fit, load_idx, select_labeled_subset
from tripletgan.data import write_idx

if len(sys.argv) > 1:
    root = sys.argv[1]
    epochs = int(sys.argv[2]) if len(sys.argv) > 2 else 500
    files = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte",
             "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")
    paths = [os.path.join(root, f) for f in files]
    triplets, batch = 60_000, 100
else:
    root = tempfile.mkdtemp(prefix="idx-")
    rng = np.random.default_rng(0)
    paths = []
    for split, n in (("train", 300), ("test", 100)):
        labels = rng.integers(0, 10, n).astype(np.uint8)
        # each digit lights up its own 3-row band of a 28x28 canvas
        images = rng.integers(0, 40, (n, 28, 28)).astype(np.uint8)
        for i, c in enumerate(labels):
            images[i, 3 * c:3 * c + 3] = 255
        ip, lp = os.path.join(root, f"{split}-images"), os.path.join(root, f"{split}-labels")
        write_idx(images, labels, ip, lp)
        paths += [ip, lp]
    epochs, triplets, batch = 2, 2000, 100

train = load_idx(paths[0], paths[1])
test = load_idx(paths[2], paths[3], split="test")
train = select_labeled_subset(train, 10, seed=0)
print(f"{len(train)} train images ({train.num_labeled} labeled), {len(test)} test images, "
      f"pixels in [{train.features.min()}, {train.features.max()}]")

cfg = TrainConfig(mode="tripletgan", epochs=epochs, pretrain_epochs=min(20, epochs),
                  batch_size=batch, triplet_batch_size=batch,
                  random_triplets_per_epoch=triplets, seed=0,
                  model=ModelConfig(feature_dim=16))
state = fit(train, cfg, progress=print)
report = evaluate(state.embedder, train, test, k=9)
print(f"9-NN accuracy {100 * report.accuracy:.2f}%, mAP {report.map:.4f}")
