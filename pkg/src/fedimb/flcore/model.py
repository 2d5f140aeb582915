"""Single-hidden-layer relu classifier with analytic gradients.

Parameters live in one flat float64 vector; ``W1``, ``b1``, ``W2``, ``b2``
are reshaped views into it, so algorithm code can do plain vector arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParameterError, NumericFailureError

COS_EPS = 1e-12


@dataclass
class ModelParams:
    vec: np.ndarray
    d: int
    h: int
    n_classes: int

    def __post_init__(self):
        expected = self.size_for(self.d, self.h, self.n_classes)
        if self.vec.shape != (expected,):
            raise InvalidParameterError(
                f"parameter vector has shape {self.vec.shape}, expected ({expected},)"
            )

    @staticmethod
    def size_for(d, h, n_classes):
        return d * h + h + h * n_classes + n_classes

    @property
    def arch(self):
        return (self.d, self.h, self.n_classes)

    @property
    def W1(self):
        return self.vec[: self.d * self.h].reshape(self.d, self.h)

    @property
    def b1(self):
        o = self.d * self.h
        return self.vec[o : o + self.h]

    @property
    def W2(self):
        o = self.d * self.h + self.h
        return self.vec[o : o + self.h * self.n_classes].reshape(self.h, self.n_classes)

    @property
    def b2(self):
        return self.vec[-self.n_classes :]

    def with_vec(self, vec) -> "ModelParams":
        return ModelParams(np.asarray(vec, dtype=np.float64), self.d, self.h, self.n_classes)

    def copy(self) -> "ModelParams":
        return self.with_vec(self.vec.copy())

    def zeros_like(self) -> "ModelParams":
        return self.with_vec(np.zeros_like(self.vec))

    def check_compatible(self, other: "ModelParams"):
        if self.arch != other.arch:
            raise InvalidParameterError(f"architecture mismatch: {self.arch} vs {other.arch}")


def init_params(d, h, n_classes, seed) -> ModelParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    if min(d, h, n_classes) < 1:
        raise InvalidParameterError("all layer sizes must be >= 1")
    rng = np.random.default_rng(seed)
    p = ModelParams(np.zeros(ModelParams.size_for(d, h, n_classes)), d, h, n_classes)
    p.W1[...] = rng.uniform(-1.0, 1.0, (d, h)) / np.sqrt(d)
    p.W2[...] = rng.uniform(-1.0, 1.0, (h, n_classes)) / np.sqrt(h)
    return p


def forward(params: ModelParams, x):
    """Return (logits, z) where z is the relu hidden representation."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.d:
        raise InvalidParameterError(f"batch has shape {x.shape}, expected (m, {params.d})")
    z = np.maximum(x @ params.W1 + params.b1, 0.0)
    return z @ params.W2 + params.b2, z


# -- regularizers -----------------------------------------------------------
# Each term returns (value, direct gradient w.r.t. the flat vector or None,
# gradient w.r.t. the representation z or None).


class ProximalTerm:
    """(mu/2) * ||w - anchor||^2."""

    def __init__(self, anchor: ModelParams, mu: float):
        self.anchor = anchor.vec
        self.mu = mu

    def __call__(self, params, z):
        diff = params.vec - self.anchor
        return 0.5 * self.mu * float(diff @ diff), self.mu * diff, None


class LinearCorrection:
    """<correction, w>; its gradient shifts every step by ``correction`` (Scaffold's c - c_i)."""

    def __init__(self, correction: np.ndarray):
        self.correction = correction

    def __call__(self, params, z):
        return float(self.correction @ params.vec), self.correction, None


def _cosine_and_grad(z, u):
    nz = np.linalg.norm(z, axis=1)
    nu = np.linalg.norm(u, axis=1)
    prod = nz * nu
    denom = np.maximum(prod, COS_EPS)
    dot = np.einsum("ij,ij->i", z, u)
    cos = dot / denom
    guarded = prod > COS_EPS
    safe_nz2 = np.where(guarded, nz * nz, 1.0)
    grad = u / denom[:, None] - np.where(guarded, cos / safe_nz2, 0.0)[:, None] * z
    return cos, grad


class ContrastiveTerm:
    """Batch-mean model-contrastive loss, scaled by ``mu``.

    Per sample: -log(exp(s_g) / (exp(s_g) + exp(s_p))) with
    s_g = cos(z, z_global)/tau and s_p = cos(z, z_prev)/tau.
    """

    def __init__(self, z_global, z_prev, mu: float, tau: float):
        self.z_global = z_global
        self.z_prev = z_prev
        self.mu = mu
        self.tau = tau

    def __call__(self, params, z):
        cg, dg = _cosine_and_grad(z, self.z_global)
        cp, dp = _cosine_and_grad(z, self.z_prev)
        sg, sp = cg / self.tau, cp / self.tau
        top = np.maximum(sg, sp)
        lse = top + np.log(np.exp(sg - top) + np.exp(sp - top))
        per = lse - sg
        w_p = np.exp(sp - lse)  # softmax weight of the negative pair; d per/d sg = -w_p
        m = z.shape[0]
        scale = self.mu / (m * self.tau)
        dz = scale * (-w_p[:, None] * dg + w_p[:, None] * dp)
        return self.mu * float(per.mean()), None, dz


def cross_entropy(logits, labels):
    shifted = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(shifted).sum(axis=1))
    return float((logsum - shifted[np.arange(labels.size), labels]).mean())


def loss_and_grad(params: ModelParams, x, labels, regularizers=()):
    """Mean softmax cross-entropy plus regularizers, and its exact gradient."""
    labels = np.asarray(labels, dtype=np.int64)
    logits, z = forward(params, x)
    if labels.size and (labels.min() < 0 or labels.max() >= params.n_classes):
        raise InvalidParameterError(f"labels must lie in [0, {params.n_classes})")
    m = labels.size
    with np.errstate(invalid="ignore", over="ignore"):
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        sums = e.sum(axis=1)
        loss = float((np.log(sums) - shifted[np.arange(m), labels]).mean())
        dlogits = e / sums[:, None]
    dlogits[np.arange(m), labels] -= 1.0
    dlogits /= m

    grad = params.zeros_like()
    grad.W2[...] = z.T @ dlogits
    grad.b2[...] = dlogits.sum(axis=0)
    dz = dlogits @ params.W2.T
    direct = []
    for term in regularizers:
        value, dvec, dz_term = term(params, z)
        loss += value
        if dvec is not None:
            direct.append(dvec)
        if dz_term is not None:
            dz = dz + dz_term
    da = dz * (z > 0)
    grad.W1[...] = np.asarray(x, dtype=np.float64).T @ da
    grad.b1[...] = da.sum(axis=0)
    for dvec in direct:
        grad.vec += dvec
    if not np.isfinite(loss) or not np.all(np.isfinite(grad.vec)):
        raise NumericFailureError(f"non-finite loss or gradient (loss={loss})")
    return loss, grad
