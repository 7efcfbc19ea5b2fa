"""Analytic gradients against central finite differences.

The heavyweight sweep (100 networks at the production step size) lives in
the acceptance suite; this module keeps a fast version of the same check
plus hand-oracles for the optimizer update rule.
"""

from __future__ import annotations

import numpy as np
import pytest

from whalesift.corpus import Label
from whalesift.seqclassifier import (
    AdamOptimizer,
    TrainConfig,
    grad_items,
    gradients,
    init_params,
    param_items,
)

FD_STEP = 1e-5
REL_TOL = 1e-4


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    num = np.linalg.norm(analytic - numeric)
    den = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)
    return num / den


def finite_difference_grads(net, batch, mask, step=FD_STEP):
    """Central differences on the mean batch loss, one coordinate at a time."""

    def loss():
        _, value = gradients(net, batch, dropout_mask=mask)
        return value

    out = {}
    for name, p in param_items(net):
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            keep = p[idx]
            p[idx] = keep + step
            up = loss()
            p[idx] = keep - step
            down = loss()
            p[idx] = keep
            g[idx] = (up - down) / (2.0 * step)
            it.iternext()
        out[name] = g
    return out


def make_case(rng, d_in=3, hidden=(3, 2, 2), t_len=4, batch_size=3):
    net = init_params(d_in, hidden, seed=int(rng.integers(1 << 30)))
    batch = [
        (rng.standard_normal((t_len, d_in)), Label(int(rng.integers(2))))
        for _ in range(batch_size)
    ]
    return net, batch


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(1009)
    worst = 0.0
    for _ in range(8):
        net, batch = make_case(rng)
        analytic, _ = gradients(net, batch)
        numeric = finite_difference_grads(net, batch, mask=None)
        for name, a in grad_items(analytic):
            err = relative_error(a, numeric[name])
            worst = max(worst, err)
            assert err < REL_TOL, f"{name}: relative error {err:.3e}"
    # The check must actually have teeth: the gradients are not all zero.
    assert worst > 0.0


def test_gradients_match_finite_differences_with_dropout_mask():
    # A fixed (already-scaled) mask makes the dropped-out loss deterministic,
    # so the same finite-difference check applies through the mask.
    rng = np.random.default_rng(2003)
    net, batch = make_case(rng)
    keep = 1.0 / (1.0 - net.dropout_rate)
    mask = np.array([keep, 0.0])  # gru2 hidden width is 2 in make_case
    analytic, _ = gradients(net, batch, dropout_mask=mask)
    numeric = finite_difference_grads(net, batch, mask=mask)
    for name, a in grad_items(analytic):
        assert relative_error(a, numeric[name]) < REL_TOL, name


def test_gradients_match_finite_differences_batch_of_one():
    rng = np.random.default_rng(3001)
    net, batch = make_case(rng, batch_size=1, t_len=1)
    analytic, _ = gradients(net, batch)
    numeric = finite_difference_grads(net, batch, mask=None)
    for name, a in grad_items(analytic):
        assert relative_error(a, numeric[name]) < REL_TOL, name


def test_gradient_step_reduces_loss():
    rng = np.random.default_rng(4001)
    net, batch = make_case(rng)
    grads, before = gradients(net, batch)
    lookup = dict(grad_items(grads))
    for name, p in param_items(net):
        p -= 0.05 * lookup[name]
    _, after = gradients(net, batch)
    assert after < before


def test_adam_constant_gradient_hand_oracle():
    # With a constant gradient g, bias correction makes m_hat = g and
    # v_hat = g*g at every step, so each update is exactly
    # lr * g / (|g| + eps): the parameter slides by ~lr per step.
    cfg = TrainConfig(learning_rate=2e-3)
    net = init_params(3, (3, 2, 2), seed=7)
    before = {name: p.copy() for name, p in param_items(net)}

    grads, _ = gradients(net, [(np.zeros((2, 3)), Label.RELEVANT)])
    for _, g in grad_items(grads):
        g[:] = 0.5

    opt = AdamOptimizer(net, cfg)
    steps = 3
    for _ in range(steps):
        opt.step(net, grads)

    expected_delta = steps * cfg.learning_rate * 0.5 / (0.5 + cfg.epsilon)
    for name, p in param_items(net):
        np.testing.assert_allclose(
            before[name] - p, expected_delta, atol=1e-12, err_msg=name
        )
    assert opt.step_count == steps


def test_adam_first_step_size_is_learning_rate():
    # Bias correction means even the very first step has magnitude ~lr in
    # every coordinate whose gradient is comfortably nonzero.
    rng = np.random.default_rng(5003)
    net, batch = make_case(rng)
    cfg = TrainConfig()
    before = {name: p.copy() for name, p in param_items(net)}
    grads, _ = gradients(net, batch)
    glookup = dict(grad_items(grads))
    AdamOptimizer(net, cfg).step(net, grads)
    for name, p in param_items(net):
        delta = np.abs(before[name] - p)
        # eps in the denominator shaves lr*eps/|g| off the step, so only
        # coordinates with |g| >> eps see the full learning rate.
        strong = np.abs(glookup[name]) > 1e-3
        assert np.max(delta) < cfg.learning_rate * 1.0001
        if strong.any():
            np.testing.assert_allclose(
                delta[strong], cfg.learning_rate, rtol=1e-3, err_msg=name
            )


def test_adam_zero_learning_rate_freezes_params():
    rng = np.random.default_rng(6007)
    net, batch = make_case(rng)
    cfg = TrainConfig(learning_rate=0.0)
    before = {name: p.copy() for name, p in param_items(net)}
    grads, _ = gradients(net, batch)
    opt = AdamOptimizer(net, cfg)
    opt.step(net, grads)
    opt.step(net, grads)
    for name, p in param_items(net):
        np.testing.assert_array_equal(before[name], p, err_msg=name)


def test_grad_items_mirror_param_items():
    net = init_params(3, (3, 2, 2), seed=1)
    grads, _ = gradients(net, [(np.zeros((2, 3)), Label.IRRELEVANT)])
    param_names = [name for name, _ in param_items(net)]
    grad_names = [name for name, _ in grad_items(grads)]
    assert param_names == grad_names
    for (_, p), (_, g) in zip(param_items(net), grad_items(grads)):
        assert p.shape == g.shape


def test_gradients_are_finite():
    rng = np.random.default_rng(7001)
    for _ in range(5):
        net, batch = make_case(rng, t_len=8)
        grads, loss = gradients(net, batch)
        assert np.isfinite(loss)
        for name, g in grad_items(grads):
            assert np.all(np.isfinite(g)), name
