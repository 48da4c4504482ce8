import numpy as np
import pytest
from hypothesis import given, strategies as st

from smlp.optim import (
    ALL_METHODS,
    Method,
    OptimizerError,
    OptimizerSpec,
    apply_update,
    init_state,
    lookahead,
    lr_at,
    needs_lookahead,
)

floats = st.floats(-10, 10, allow_nan=False)


def test_seven_methods():
    assert len(ALL_METHODS) == 7


def test_lr_schedule():
    assert lr_at(OptimizerSpec(Method.CONSTANT_SGD, alpha=0.1), 500) == 0.1
    decayed = OptimizerSpec(Method.DECAYED_SGD, alpha=0.1)
    assert lr_at(decayed, 0) == 0.1
    assert lr_at(decayed, 1000) == pytest.approx(0.05)
    assert lr_at(OptimizerSpec(Method.DECAYED_NESTEROV, alpha=0.1, decay_rate=0.01), 100) == pytest.approx(0.05)


def test_sgd_step():
    new, state = apply_update(OptimizerSpec(Method.CONSTANT_SGD, alpha=0.1),
                              init_state([np.ones(1)]), [np.ones(1)], [np.full(1, 2.0)])
    assert new[0].tolist() == pytest.approx([0.8]) and state.t == 1


def test_momentum_two_steps():
    spec = OptimizerSpec(Method.CONSTANT_MOMENTUM, alpha=0.1, momentum=0.5)
    p, s = [np.zeros(1)], init_state([np.zeros(1)])
    p, s = apply_update(spec, s, p, [np.ones(1)])
    p, s = apply_update(spec, s, p, [np.ones(1)])
    # v1 = -0.1, v2 = 0.5 * -0.1 - 0.1
    assert p[0][0] == pytest.approx(-0.1 - 0.15)


def test_decayed_momentum_uses_step_count():
    spec = OptimizerSpec(Method.DECAYED_MOMENTUM, alpha=1.0, momentum=0.0, decay_rate=1.0)
    p, s = [np.zeros(1)], init_state([np.zeros(1)])
    steps = []
    for _ in range(3):
        q, s = apply_update(spec, s, p, [np.ones(1)])
        steps.append(float(p[0][0] - q[0][0]))
        p = q
    assert steps == pytest.approx([1, 1 / 2, 1 / 3])


def test_adam_first_step():
    spec = OptimizerSpec(Method.ADAM, alpha=1e-3)
    new, state = apply_update(spec, init_state([np.zeros(1)]), [np.zeros(1)], [np.full(1, 0.01)])
    assert new[0][0] == pytest.approx(-9.99999e-4, rel=1e-9)
    assert state.t == 1


@given(st.lists(floats.filter(lambda g: abs(g) > 1e-3), min_size=1, max_size=8))
def test_adam_first_step_bounded_by_alpha(gs):
    g = np.array(gs)
    spec = OptimizerSpec(Method.ADAM, alpha=0.01)
    new, _ = apply_update(spec, init_state([np.zeros_like(g)]), [np.zeros_like(g)], [g])
    assert np.all(np.abs(new[0]) < 0.01)
    assert np.array_equal(np.sign(new[0]), -np.sign(g))


@pytest.mark.parametrize("method", list(Method))
def test_zero_gradient_fixed_point(method):
    spec = OptimizerSpec(method)
    p = [np.arange(6.0).reshape(2, 3), np.ones(3)]
    state = init_state(p)
    for _ in range(3):
        new, state = apply_update(spec, state, p, [np.zeros_like(q) for q in p])
        assert all(np.array_equal(a, b) for a, b in zip(new, p))


@given(st.lists(st.lists(floats, min_size=3, max_size=3), min_size=1, max_size=5))
def test_zero_momentum_equals_sgd(grad_seq):
    sgd = OptimizerSpec(Method.CONSTANT_SGD, alpha=0.05)
    mom = OptimizerSpec(Method.CONSTANT_MOMENTUM, alpha=0.05, momentum=0.0)
    p1 = p2 = [np.ones(3)]
    s1 = s2 = init_state(p1)
    for g in grad_seq:
        p1, s1 = apply_update(sgd, s1, p1, [np.array(g)])
        p2, s2 = apply_update(mom, s2, p2, [np.array(g)])
    # p + (0 * v - lr * g) and p - lr * g differ only in the sign of zero
    assert np.array_equal(p1[0], p2[0])


def test_nesterov_lookahead():
    for method in Method:
        assert needs_lookahead(OptimizerSpec(method)) == (method in (Method.CONSTANT_NESTEROV,
                                                                     Method.DECAYED_NESTEROV))
    spec = OptimizerSpec(Method.CONSTANT_NESTEROV, alpha=0.1, momentum=0.5)
    p = [np.zeros(2)]
    assert lookahead(spec, init_state(p), p)[0].tolist() == [0, 0]
    p, s = apply_update(spec, init_state(p), p, [np.array([1.0, -2.0])])
    assert lookahead(spec, s, p)[0].tolist() == pytest.approx([-0.15, 0.3])


def test_nesterov_on_quadratic_converges():
    # f(x) = x^2 / 2, gradient evaluated at the lookahead point
    spec = OptimizerSpec(Method.CONSTANT_NESTEROV, alpha=0.1, momentum=0.9)
    p, s = [np.array([5.0])], init_state([np.zeros(1)])
    for _ in range(300):
        g = lookahead(spec, s, p)[0]
        p, s = apply_update(spec, s, p, [g])
    assert abs(p[0][0]) < 1e-6


def test_update_is_functional():
    p = [np.ones(2)]
    s = init_state(p)
    apply_update(OptimizerSpec(Method.ADAM), s, p, [np.ones(2)])
    assert p[0].tolist() == [1, 1] and s.t == 0 and s.m[0].tolist() == [0, 0]


def test_errors():
    spec = OptimizerSpec()
    with pytest.raises(OptimizerError):
        apply_update(spec, init_state([np.ones(2)]), [np.ones(2)], [np.array([np.nan, 0])])
    with pytest.raises(OptimizerError):
        apply_update(spec, init_state([np.ones(2)]), [np.ones(2)], [np.ones(3)])
    with pytest.raises(OptimizerError):
        apply_update(spec, init_state([np.ones(2)]), [np.ones(2)], [])
    for bad in (dict(alpha=0), dict(momentum=1.0), dict(beta1=1.0), dict(eps=0), dict(decay_rate=-1)):
        with pytest.raises(OptimizerError):
            OptimizerSpec(**bad)
    with pytest.raises(ValueError):
        OptimizerSpec("rmsprop")
