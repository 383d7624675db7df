"""Losses and probabilities of the triplet-GAN, all evaluated in log domain.

Features are the embedder outputs ``t = T(x)`` (rows of a B x M tensor).
The discriminator's real-probability is ``sum(exp(t)) / (sum(exp(t)) + 1)``,
i.e. ``sigmoid(logsumexp(t))``; every log-probability below is written
through softplus so large features never overflow.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import tensor as tn
from .errors import ContractError, DimensionError
from .tensor import Tensor


@dataclass
class TripletDistances:
    d_pos: Tensor
    d_neg: Tensor


@dataclass
class LossReport:
    l_ts: float | None
    l_tu: float | None
    l_td: float
    l_g: float | None = None
    d_real_mean: float | None = None
    d_fake_mean: float | None = None

    def as_dict(self):
        return asdict(self)


def _t(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _nonempty(t, what):
    if t.shape[0] == 0:
        raise ContractError(f"{what}: empty batch")


# ---------------------------------------------------------------------------
# triplet part


def triplet_distances(f_query, f_pos, f_neg):
    """Euclidean distances query->positive and query->negative, one per row."""
    f_query, f_pos, f_neg = _t(f_query), _t(f_pos), _t(f_neg)
    if not f_query.shape == f_pos.shape == f_neg.shape:
        raise DimensionError(
            f"triplet embeddings differ in shape: {f_query.shape}, {f_pos.shape}, {f_neg.shape}")
    return TripletDistances(tn.row_norm(f_query - f_pos), tn.row_norm(f_query - f_neg))


def triplet_prob(d):
    """P(negative is farther than positive) = sigmoid(d_neg - d_pos)."""
    return tn.sigmoid(_t(d.d_neg) - _t(d.d_pos))


def triplet_loss(f_query, f_pos, f_neg):
    """Mean over triplets of -log p, i.e. mean softplus(d_pos - d_neg)."""
    f_query = _t(f_query)
    _nonempty(f_query, "triplet_loss")
    d = triplet_distances(f_query, f_pos, f_neg)
    return tn.mean(tn.softplus(d.d_pos - d.d_neg))


# ---------------------------------------------------------------------------
# discriminator built on the features


def disc_logit(features):
    """logit of D_T: logsumexp over the M features of each row."""
    features = _t(features)
    if features.ndim != 2:
        raise DimensionError(f"features must be B x M, got {features.shape}")
    return tn.logsumexp(features, axis=1)


def disc_prob(features):
    return tn.sigmoid(disc_logit(features))


def log_disc_real(features):
    """log D_T(x) = -softplus(-logit)."""
    return tn.neg(tn.softplus(tn.neg(disc_logit(features))))


def log_disc_fake(features):
    """log(1 - D_T(x)) = -softplus(logit)."""
    return tn.neg(tn.softplus(disc_logit(features)))


def unsup_disc_loss(real_features, fake_features):
    """-V(D_T, G) with expectations as batch means."""
    real_features, fake_features = _t(real_features), _t(fake_features)
    _nonempty(real_features, "unsup_disc_loss(real)")
    _nonempty(fake_features, "unsup_disc_loss(fake)")
    return (tn.mean(tn.softplus(tn.neg(disc_logit(real_features))))
            + tn.mean(tn.softplus(disc_logit(fake_features))))


def feature_matching_loss(real_features, fake_features):
    """Squared distance between the batch means of real and generated features."""
    real_features, fake_features = _t(real_features), _t(fake_features)
    if real_features.ndim != 2 or fake_features.ndim != 2 \
            or real_features.shape[1] != fake_features.shape[1]:
        raise DimensionError(
            f"feature batches disagree: {real_features.shape} vs {fake_features.shape}")
    _nonempty(real_features, "feature_matching_loss(real)")
    _nonempty(fake_features, "feature_matching_loss(fake)")
    gap = tn.mean(real_features, axis=0) - tn.mean(fake_features, axis=0)
    return tn.tsum(tn.square(gap))


def combined_disc_loss(triplet=None, real=None, fake=None):
    """Discriminator objective plus its report.

    ``triplet`` is a ``(f_query, f_pos, f_neg)`` tuple of feature tensors or
    None (GAN-only). ``real``/``fake`` are feature batches or both None
    (triplet-only). Returns ``(loss_tensor, LossReport)``.
    """
    if triplet is None and real is None:
        raise ContractError("combined_disc_loss needs a triplet batch or a real/fake pair")
    if (real is None) != (fake is None):
        raise ContractError("real and fake batches must be given together")

    l_ts = triplet_loss(*triplet) if triplet is not None else None
    l_tu = unsup_disc_loss(real, fake) if real is not None else None
    if l_ts is None:
        total = l_tu
    elif l_tu is None:
        total = l_ts
    else:
        total = l_ts + l_tu

    report = LossReport(
        l_ts=None if l_ts is None else float(l_ts.data),
        l_tu=None if l_tu is None else float(l_tu.data),
        l_td=float(total.data),
    )
    if real is not None:
        report.d_real_mean = float(np.mean(disc_prob(_t(real).detach()).data))
        report.d_fake_mean = float(np.mean(disc_prob(_t(fake).detach()).data))
    return total, report
