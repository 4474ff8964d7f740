import numpy as np
import pytest
from hypothesis import given, strategies as st

from nullax import dual
from nullax.dual import Dual, DomainError, pullback


def hessian_vars(values):
    """Seed scalars so both groups carry the same coordinate directions."""
    n = len(values)
    eye = np.eye(n)
    return [Dual([v, eye[k], eye[k], None], (n, n)) for k, v in enumerate(values)]


def test_product_rule_and_mixed_block():
    x, y = hessian_vars([0.7, 1.3])
    f = dual.sin(x * y) + x**3
    a, b = 0.7, 1.3
    c, s = np.cos(a * b), np.sin(a * b)
    np.testing.assert_allclose(f.value, np.sin(a * b) + a**3)
    np.testing.assert_allclose(f.part(1), [b * c + 3 * a * a, a * c])
    np.testing.assert_allclose(
        f.part(3), [[-b * b * s + 6 * a, c - a * b * s], [c - a * b * s, -a * a * s]]
    )


@pytest.mark.parametrize(
    "fn, d1, d2",
    [
        (dual.exp, np.exp, np.exp),
        (dual.log, lambda v: 1 / v, lambda v: -1 / v**2),
        (dual.sqrt, lambda v: 0.5 / np.sqrt(v), lambda v: -0.25 * v**-1.5),
        (dual.tanh, lambda v: 1 - np.tanh(v) ** 2, lambda v: -2 * np.tanh(v) * (1 - np.tanh(v) ** 2)),
        (dual.cos, lambda v: -np.sin(v), lambda v: -np.cos(v)),
    ],
)
def test_elementary_second_derivatives(fn, d1, d2):
    (x,) = hessian_vars([0.83])
    r = fn(x)
    assert r.part(1)[0] == pytest.approx(d1(0.83), rel=1e-13)
    assert r.part(3)[0, 0] == pytest.approx(d2(0.83), rel=1e-13)


def test_division_and_negative_integer_power():
    x, y = hessian_vars([2.0, -3.0])
    q = x / y
    np.testing.assert_allclose(q.part(1), [1 / -3.0, -2.0 / 9.0])
    np.testing.assert_allclose(q.part(3), [[0.0, -1 / 9.0], [-1 / 9.0, -4.0 / 27.0]])
    c = y**-2
    assert c.part(1)[1] == pytest.approx(2 / 27.0)


def test_three_groups_give_third_derivative():
    eye = np.ones(1)
    x = Dual([0.5, eye, eye, None, eye, None, None, None], (1, 1, 1))
    r = x**4
    assert r.part(7)[0, 0, 0] == pytest.approx(24 * 0.5)


def test_batch_indexing_matches_ndarray():
    v = np.arange(12.0).reshape(2, 2, 3)
    d = Dual([v, np.ones((4,) + v.shape)], (4,))
    np.testing.assert_array_equal(d[..., 1].value, v[..., 1])
    assert d[..., 1].part(1).shape == (4, 2, 2)
    assert d.sum(axis=-1).value.shape == (2, 2)
    assert d.swapaxes(-1, -2).shape == (2, 3, 2)


def test_stack_mixes_constants_and_duals():
    (x,) = hessian_vars([1.5])
    s = dual.stack([x, 2.0, x * x], axis=-1)
    assert s.shape == (3,)
    np.testing.assert_allclose(s.part(1)[0], [1.0, 0.0, 3.0])


def test_domain_errors():
    (x,) = hessian_vars([-1.0])
    with pytest.raises(DomainError):
        dual.log(x)
    with pytest.raises(DomainError):
        dual.sqrt(x)
    with pytest.raises(DomainError):
        x / 0.0
    with pytest.raises(DomainError):
        dual.power(x, 0.5)


def test_ndarray_defers_to_dual():
    (x,) = hessian_vars([2.0])
    r = np.array([3.0]) * x
    assert isinstance(r, Dual)


def test_pullback_is_exact():
    x, y = hessian_vars([0.4, 1.1])

    def fn(a, b):
        return [dual.exp(a * b) * a, a - b]

    direct = fn(x, y)
    pulled = pullback(fn, [x, y])
    for u, v in zip(direct, pulled):
        for mask in range(4):
            np.testing.assert_allclose(u.part(mask), v.part(mask), atol=1e-14)


@given(st.floats(0.1, 3.0), st.floats(-2.0, 2.0))
def test_gradient_matches_central_differences(a, b):
    def f(u, v):
        return dual.sin(u * v) * dual.exp(-u) + u**2.5 / (1 + v * v)

    x, y = hessian_vars([a, b])
    g = f(x, y).part(1)
    h = 1e-6
    fd = [(f(a + h, b) - f(a - h, b)) / (2 * h), (f(a, b + h) - f(a, b - h)) / (2 * h)]
    np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-8)
