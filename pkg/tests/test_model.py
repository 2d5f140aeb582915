import math

import numpy as np
import pytest

from fedimb.errors import InvalidParameterError, NumericFailureError
from fedimb.flcore import ModelParams, forward, init_params, loss_and_grad
from fedimb.flcore.model import ContrastiveTerm, LinearCorrection, ProximalTerm, cross_entropy

from .oracle import central_difference, total_loss


def test_init_deterministic_and_zero_bias():
    a, b = init_params(5, 4, 3, seed=1), init_params(5, 4, 3, seed=1)
    assert a.vec.tobytes() == b.vec.tobytes()
    assert not a.b1.any() and not a.b2.any()
    assert np.abs(a.W1).max() <= 1 / np.sqrt(5) and np.abs(a.W2).max() <= 1 / np.sqrt(4)


def test_init_single_hidden_unit_shape():
    p = init_params(7, 1, 3, seed=0)
    assert p.W1.size == 7 and p.W1.shape == (7, 1)


def test_views_share_storage():
    p = init_params(3, 2, 2, seed=0)
    p.W2[0, 0] = 42.0
    assert 42.0 in p.vec


def test_forward_zero():
    p = ModelParams(np.zeros(ModelParams.size_for(3, 4, 5)), 3, 4, 5)
    logits, z = forward(p, np.zeros((2, 3)))
    assert not logits.any() and not z.any() and logits.shape == (2, 5)


def test_forward_scalar_trace():
    p = ModelParams(np.array([1.0, 0.0, 1.0, 0.0]), 1, 1, 1)
    logits, z = forward(p, [[2.0]])
    assert z[0, 0] == 2.0 and logits[0, 0] == 2.0
    logits, z = forward(p, [[-3.0]])
    assert z[0, 0] == 0.0


def test_forward_dim_mismatch():
    with pytest.raises(InvalidParameterError):
        forward(init_params(3, 2, 2, 0), np.zeros((1, 4)))


def test_uniform_logits_loss_is_log_b():
    p = ModelParams(np.zeros(ModelParams.size_for(4, 3, 10)), 4, 3, 10)
    loss, _ = loss_and_grad(p, np.random.default_rng(0).random((6, 4)), np.arange(6))
    assert loss == pytest.approx(math.log(10), abs=1e-12)


def test_regularizers_off_equal_plain_cross_entropy():
    p = init_params(4, 3, 3, 2)
    x = np.random.default_rng(1).random((5, 4))
    y = np.array([0, 1, 2, 1, 0])
    loss, _ = loss_and_grad(p, x, y)
    assert loss == cross_entropy(forward(p, x)[0], y)
    loss_prox, _ = loss_and_grad(p, x, y, (ProximalTerm(p, 0.0),))
    assert loss_prox == loss


def test_non_finite_loss_raises():
    p = init_params(2, 2, 2, 0)
    p.vec[:] = np.inf
    with pytest.raises(NumericFailureError):
        loss_and_grad(p, np.ones((1, 2)), [0])


def test_contrastive_equal_representations_is_log2():
    z = np.array([[1.0, 2.0, 0.5]])
    value, _, _ = ContrastiveTerm(z, z, mu=1.0, tau=0.5)(None, z)
    assert value == pytest.approx(math.log(2), abs=1e-12)


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-30)


def random_problem(rng):
    d, h, b = (int(v) for v in rng.integers(1, 6, size=3))
    b = max(b, 2)
    p = init_params(d, h, b, int(rng.integers(1 << 30)))
    p.vec[:] += rng.normal(0, 0.3, p.vec.size)
    m = int(rng.integers(1, 5))
    x = rng.normal(0.5, 0.5, (m, d))
    y = rng.integers(0, b, m)
    return p, x, y


def kink_free(p, x, margin=1e-4):
    pre = x @ p.W1 + p.b1
    return np.abs(pre).min() > margin


KINDS = ["fedavg", "fedprox", "scaffold", "moon"]


def gradient_cases(kind, n=100, seed=0):
    rng = np.random.default_rng([seed, KINDS.index(kind)])
    done = 0
    while done < n:
        p, x, y = random_problem(rng)
        if not kink_free(p, x):
            continue
        done += 1
        yield rng, p, x, y


@pytest.mark.parametrize("kind", KINDS)
def test_gradients_match_finite_differences(kind):
    arch = (0, 0, 0)
    worst = 0.0
    for rng, p, x, y in gradient_cases(kind):
        arch = p.arch
        kwargs, terms = {}, ()
        if kind == "fedprox":
            anchor = p.with_vec(p.vec + rng.normal(0, 0.2, p.vec.size))
            mu = float(rng.uniform(0.01, 2))
            kwargs = {"anchor": anchor.vec, "mu": mu}
            terms = (ProximalTerm(anchor, mu),)
        elif kind == "scaffold":
            corr = rng.normal(0, 0.3, p.vec.size)
            kwargs = {"correction": corr}
            terms = (LinearCorrection(corr),)
        elif kind == "moon":
            zg = np.abs(rng.normal(0.5, 0.5, (len(y), p.h)))
            zp = np.abs(rng.normal(0.5, 0.5, (len(y), p.h)))
            mu, tau = float(rng.uniform(0.1, 2)), float(rng.uniform(0.2, 1.5))
            kwargs = {"z_glob": zg, "z_prev": zp, "moon_mu": mu, "tau": tau}
            terms = (ContrastiveTerm(zg, zp, mu, tau),)
        loss, grad = loss_and_grad(p, x, y, terms)
        f = lambda v: total_loss(v, arch, x, y, **kwargs)  # noqa: E731
        assert loss == pytest.approx(f(p.vec), rel=1e-10, abs=1e-12)
        numeric = central_difference(f, p.vec)
        err = rel_err(grad.vec, numeric)
        worst = max(worst, err)
        assert err < 1e-6, (kind, err)
    print(f"{kind}: worst relative gradient error {worst:.2e}")
