import json
import math

import numpy as np
import pytest

from tripletgan.errors import (
    CheckpointVersionError,
    DimensionError,
    FingerprintError,
    MalformedCheckpointError,
)
from tripletgan.networks import (
    EmbedderSpec,
    GeneratorSpec,
    embed,
    generate,
    init_params,
    load_checkpoint,
    save_checkpoint,
)
from tripletgan.tensor import Tensor

SMALL = EmbedderSpec(input_dim=6, hidden=(5, 4), feature_dim=3)
GEN = GeneratorSpec(noise_dim=4, output_dim=6, hidden=(8,))


def test_duplicate_rows_embed_identically(rng):
    p = init_params(SMALL, 0)
    x = rng.standard_normal((3, 6))
    x = np.vstack([x, x[1:2]])
    out = embed(p, x).data
    assert np.array_equal(out[1], out[3])


def test_zero_final_layer_gives_zero_embeddings(rng):
    p = init_params(SMALL, 0)
    p.tensors["layer2.weight"].data[:] = 0.0
    out = embed(p, rng.standard_normal((5, 6))).data
    assert np.array_equal(out, np.zeros((5, 3)))


def test_mnist_default_shape():
    spec = EmbedderSpec(input_dim=784)
    assert spec.widths == (784, 512, 256, 16)
    p = init_params(spec, 1)
    assert embed(p, np.zeros((2, 784))).shape == (2, 16)


@pytest.mark.parametrize("batch", [0, 1, 7])
def test_output_shapes_any_batch(batch, rng):
    e, g = init_params(SMALL, 0), init_params(GEN, 0)
    assert embed(e, rng.standard_normal((batch, 6))).shape == (batch, 3)
    assert generate(g, rng.standard_normal((batch, 4))).shape == (batch, 6)


def test_wrong_input_width():
    with pytest.raises(DimensionError):
        embed(init_params(SMALL, 0), np.zeros((2, 5)))


def test_tanh_head_range(rng):
    g = init_params(GEN, 3)
    out = generate(g, rng.uniform(-1, 1, (200, 4)) * 50).data
    assert np.all(np.abs(out) <= 1.0)
    out = generate(g, rng.uniform(-1, 1, (200, 4))).data
    assert np.all(np.abs(out) < 1.0)


def test_generate_deterministic(rng):
    z = rng.uniform(-1, 1, (5, 4))
    a = generate(init_params(GEN, 9), z).data
    b = generate(init_params(GEN, 9), z).data
    assert np.array_equal(a, b)


def test_init_biases_zero_and_seeded():
    a, b = init_params(SMALL, 42), init_params(SMALL, 42)
    assert a.equals(b)
    for name, t in a.tensors.items():
        if name.endswith("bias"):
            assert np.all(t.data == 0.0)
    assert not a.equals(init_params(SMALL, 43))


def test_init_weight_law():
    spec = EmbedderSpec(input_dim=100, hidden=(), feature_dim=100)
    w = init_params(spec, 5).tensors["layer0.weight"].data
    limit = math.sqrt(6.0 / 200.0)
    assert np.all(np.abs(w) <= limit)
    # uniform(-L, L): variance L^2 / 3; mean of 10^4 draws has sd L / sqrt(3e4)
    assert w.size == 10_000
    assert abs(w.mean()) < 3 * limit / math.sqrt(3 * w.size)
    assert w.var() == pytest.approx(limit ** 2 / 3, rel=0.05)


def test_checkpoint_round_trip(tmp_path, rng):
    p = init_params(SMALL, 0)
    for t in p.tensors.values():
        t.data = rng.standard_normal(t.shape) * 1e-3 + 1 / 3
    path = tmp_path / "ck.json"
    save_checkpoint(p, path)
    q = load_checkpoint(path, expected_spec=SMALL)
    assert p.equals(q)
    doc = json.loads(path.read_text())
    assert doc["version"] == 1
    assert doc["params"]["layer0.weight"]["shape"] == [6, 5]


def test_checkpoint_fingerprint_mismatch(tmp_path):
    path = tmp_path / "ck.json"
    save_checkpoint(init_params(SMALL, 0), path)
    other = EmbedderSpec(input_dim=6, hidden=(5, 4), feature_dim=4)
    with pytest.raises(FingerprintError):
        load_checkpoint(path, expected_spec=other)


def test_checkpoint_truncated(tmp_path):
    path = tmp_path / "ck.json"
    save_checkpoint(init_params(SMALL, 0), path)
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(MalformedCheckpointError):
        load_checkpoint(path)


def test_checkpoint_unknown_version(tmp_path):
    path = tmp_path / "ck.json"
    save_checkpoint(init_params(SMALL, 0), path)
    doc = json.loads(path.read_text())
    doc["version"] = 2
    path.write_text(json.dumps(doc))
    with pytest.raises(CheckpointVersionError):
        load_checkpoint(path)


def test_checkpoint_wrong_value_count(tmp_path):
    path = tmp_path / "ck.json"
    save_checkpoint(init_params(SMALL, 0), path)
    doc = json.loads(path.read_text())
    doc["params"]["layer0.bias"]["values"].pop()
    path.write_text(json.dumps(doc))
    with pytest.raises(MalformedCheckpointError):
        load_checkpoint(path)


def test_frozen_tracks_no_gradient(rng):
    p = init_params(SMALL, 0).frozen()
    out = embed(p, Tensor(rng.standard_normal((2, 6))))
    assert not out.requires_grad
