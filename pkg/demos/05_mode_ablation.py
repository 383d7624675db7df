"""
Does the GAN help with few labels?
==================================

Same data, three training modes: triplets only, GAN only, and both. The
task is deliberately noisy (sigma 0.35 in 16 dimensions) with 5 labels
per class. Expect gan_only to lag, and tripletgan to edge out
triplet_only on average. Single seeds are noisy, which is why five are
run by default; pass seed numbers on the command line to choose others.
"""

import sys

import numpy as np

from tripletgan import ModelConfig, TrainConfig, evaluate, fit, make_blobs, select_labeled_subset

seeds = [int(s) for s in sys.argv[1:]] or list(range(5))
model = ModelConfig(embed_hidden=(64, 64), feature_dim=4, activation="tanh",
                    noise_dim=16, gen_hidden=(64, 64))

results = {m: [] for m in ("triplet_only", "gan_only", "tripletgan")}
for seed in seeds:
    train = select_labeled_subset(make_blobs(4, 1000, 16, 0.8, 0.35, seed=seed), 5, seed=seed)
    test = make_blobs(4, 250, 16, 0.8, 0.35, seed=1000 + seed, split="test")
    for mode in results:
        extra = {} if mode == "gan_only" else {"random_triplets_per_epoch": 4000}
        cfg = TrainConfig(mode=mode, epochs=20, pretrain_epochs=20, seed=seed, model=model, **extra)
        state = fit(train, cfg)
        acc = evaluate(state.embedder, train, test, k=9, metrics="knn").accuracy
        results[mode].append(acc)
        print(f"seed {seed} {mode:>12}: {acc:.3f}")

for mode, accs in results.items():
    print(f"{mode:>12}: mean {np.mean(accs):.3f} over {len(accs)} seed(s)")
