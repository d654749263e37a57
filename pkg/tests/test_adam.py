import numpy as np
import pytest

from bumpmark.errors import NumericError
from bumpmark.nn.adam import AdamState, adam_step


def test_zero_gradient_leaves_params_unchanged():
    p = [np.array([1.0, -2.0]), np.array([[3.0]])]
    state = AdamState(lr=1e-3)
    adam_step(p, [np.zeros(2), np.zeros((1, 1))], state)
    assert np.allclose(p[0], [1.0, -2.0])
    assert np.allclose(p[1], 3.0)


def test_two_hand_computed_scalar_steps():
    # hand trace for a scalar parameter, g=1 both steps, default betas
    lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
    theta = 2.0
    m = v = 0.0
    for t in (1, 2):
        g = 1.0
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1**t)
        vhat = v / (1 - b2**t)
        theta -= lr * mhat / (np.sqrt(vhat) + eps)

    p = [np.array([2.0])]
    state = AdamState(lr=0.1)
    adam_step(p, [np.array([1.0])], state)
    adam_step(p, [np.array([1.0])], state)
    assert abs(p[0][0] - theta) <= 1e-12


def test_first_step_magnitude_is_lr():
    # bias correction makes the very first step ~lr regardless of g scale
    for g in (1e-4, 1.0, 100.0):
        p = [np.array([0.0])]
        adam_step(p, [np.array([g])], AdamState(lr=0.01))
        assert np.isclose(abs(p[0][0]), 0.01, rtol=1e-3)


def test_step_counter_and_moment_shapes():
    p = [np.zeros((2, 3))]
    state = AdamState(lr=1e-3)
    adam_step(p, [np.ones((2, 3))], state)
    assert state.step == 1
    assert state.m[0].shape == (2, 3)
    assert state.v[0].shape == (2, 3)


def test_non_finite_gradient_rejected():
    p = [np.array([1.0])]
    with pytest.raises(NumericError):
        adam_step(p, [np.array([np.nan])], AdamState(lr=1e-3))


def test_converges_on_quadratic():
    p = [np.array([5.0])]
    state = AdamState(lr=0.1)
    for _ in range(500):
        adam_step(p, [2.0 * p[0]], state)
    assert abs(p[0][0]) < 1e-2
