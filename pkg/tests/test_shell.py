import numpy as np
import pytest
from hypothesis import given, strategies as st

from nullax import tensor as T
from nullax.expr import ExprSyntaxError
from nullax.library import FIELDS_SHELL, random_potentials_shell
from nullax.shell import (
    POLYCONVEX_NAMES_SHELL,
    CoefficientSetShell,
    NullLagrangianShell,
    PotentialSetShell,
    StatePointShell,
    assemble_lagrangian_shell,
    assemble_P_shell,
    build_coefficients_shell,
    eps_bracket,
    polyconvex_args_shell,
    total_divergence_P_shell,
)
from nullax.variational import el_residual, sample_points

X, Y, TH = [0.3, 0.6], [0.1, -0.2, 0.4], [0.5, 0.0, -0.3]
E = np.eye(3)


def zero_coeffs(**kw):
    c = dict(A=0.0, B=np.zeros((2, 3)), Bt=np.zeros((2, 3)), Bh=np.zeros((3, 3)), C=np.zeros(3), Ct=np.zeros(3))
    c.update(kw)
    return CoefficientSetShell(**c)


def state(F=None, G=None):
    return StatePointShell(
        np.array(X), np.array(Y), np.array(TH),
        np.zeros((3, 2)) if F is None else np.asarray(F, float),
        np.zeros((3, 2)) if G is None else np.asarray(G, float),
    )


def random_state(rng):
    return StatePointShell(*(rng.normal(size=s) for s in [(2,), (3,), (3,), (3, 2), (3, 2)]))


# -- coefficients -----------------------------------------------------------------


def test_zero_potentials_zero_coefficients():
    c = build_coefficients_shell(PotentialSetShell(), X, Y, TH)
    for _, v in c.items():
        assert not np.any(v)


@pytest.mark.parametrize("c", [1.0, -2.5, 3.0])
def test_curl_of_Phat(c):
    coef = build_coefficients_shell(PotentialSetShell(Phat=[f"{c}*y2"]), X, Y, TH)
    np.testing.assert_allclose(coef.C, [0.0, 0.0, -c])
    assert not np.any(coef.B)


def test_scalar_coefficient_from_Pbar():
    assert build_coefficients_shell(PotentialSetShell(Pbar=["x2", "0"]), X, Y, TH).A == pytest.approx(-1.0)
    assert build_coefficients_shell(PotentialSetShell(Pbar=["0", "3*x1"]), X, Y, TH).A == pytest.approx(3.0)


def test_hand_differentiated_set():
    p = PotentialSetShell(
        Pbar=["y1*t2", "x1*y3"],
        Phat=["x2*y1", "t1", "0"],
        Ptil=["y2*t1", "x1*t3", "t2*y1"],
    )
    c = build_coefficients_shell(p, X, Y, TH)
    assert c.A == pytest.approx(0.4)
    np.testing.assert_allclose(c.B, [[0, 0, 0], [-0.1, 0, 0.3]])
    np.testing.assert_allclose(c.Bt, [[0, 0.4, 0], [0, 0, 0]])
    np.testing.assert_allclose(c.C, [0, 0, 0])
    np.testing.assert_allclose(c.Ct, [-0.2, 0, 0])
    Bh = np.zeros((3, 3))
    Bh[0, 1] = -0.5
    np.testing.assert_allclose(c.Bh, Bh)


def test_numeric_and_symbolic_coefficients_agree():
    p = random_potentials_shell(3)
    L = NullLagrangianShell(p)
    rng = np.random.default_rng(0)
    for _ in range(5):
        s = random_state(rng)
        c = build_coefficients_shell(p, s.x, s.y, s.theta)
        np.testing.assert_allclose(L(s), assemble_lagrangian_shell(c, s), rtol=1e-12, atol=1e-12)


# -- assembly --------------------------------------------------------------------


def test_zero_coefficients_give_zero():
    rng = np.random.default_rng(1)
    assert assemble_lagrangian_shell(zero_coeffs(), random_state(rng)) == 0.0


def test_basis_wedge():
    F = E[:, :2]
    assert assemble_lagrangian_shell(zero_coeffs(C=E[2]), state(F=F)) == pytest.approx(1.0)


def test_mixed_term():
    F = np.zeros((3, 2))
    G = np.zeros((3, 2))
    F[0, 0] = 1.0
    G[0, 1] = 1.0
    Bh = np.zeros((3, 3))
    Bh[0, 0] = 1.0
    assert assemble_lagrangian_shell(zero_coeffs(Bh=Bh), state(F, G)) == pytest.approx(1.0)


def test_linear_term_sign():
    # B F is 2x2 with entries B_Ai F_iB; only (B F)_12 set
    B = np.zeros((2, 3))
    B[0, 0] = 1.0
    F = np.zeros((3, 2))
    F[0, 1] = 1.0
    assert assemble_lagrangian_shell(zero_coeffs(B=B), state(F=F)) == pytest.approx(-1.0)


def test_constant_Pbar_divergence_vector():
    P = assemble_P_shell(PotentialSetShell(Pbar=["2", "5"]), state())
    np.testing.assert_allclose(P, [5.0, -2.0])


def test_zero_potentials_zero_P():
    np.testing.assert_allclose(assemble_P_shell(PotentialSetShell(), state()), [0.0, 0.0])


# -- nullity checks --------------------------------------------------------------


@pytest.mark.parametrize("seed", range(4))
def test_euler_lagrange_vanishes(seed):
    L = NullLagrangianShell(random_potentials_shell(seed))
    x = sample_points(np.random.default_rng(seed), 20, 2)
    for spec in FIELDS_SHELL:
        r = el_residual(L, spec, x)
        assert np.abs(r.values).max() / r.scale.max() <= 1e-8


@pytest.mark.parametrize("seed", range(4))
def test_divergence_identity(seed):
    p = random_potentials_shell(seed)
    L = NullLagrangianShell(p)
    x = sample_points(np.random.default_rng(seed + 10), 20, 2)
    for spec in FIELDS_SHELL:
        lag = el_residual(L, spec, x).lagrangian
        div = total_divergence_P_shell(p, spec, x)
        assert np.max(np.abs(lag - div) / (1 + np.abs(lag))) <= 1e-8


def test_divergence_matches_finite_differences():
    from nullax.expr import field_jet
    from nullax.nulllag3d import StatePoint3D

    p = random_potentials_shell(5)
    spec = FIELDS_SHELL[2]
    x0 = np.array([0.4, 0.55])
    h = 1e-5

    def P_at(x):
        j = field_jet(spec, x)
        s = StatePointShell(x, j.chi, j.theta, j.F, j.G)
        return np.asarray(assemble_P_shell(p, s))

    fd = sum((P_at(x0 + h * np.eye(2)[a]) - P_at(x0 - h * np.eye(2)[a]))[a] / (2 * h) for a in range(2))
    exact = total_divergence_P_shell(p, spec, x0[None])[0]
    assert fd == pytest.approx(exact, rel=1e-6, abs=1e-7)


def test_non_null_term_detected():
    from nullax.variational import ExprLagrangian, SumLagrangian

    L = SumLagrangian([NullLagrangianShell(PotentialSetShell(Phat=["y2"])), ExprLagrangian("F11^2 + F21*G12", 2)], [1, 1])
    x = sample_points(np.random.default_rng(0), 10, 2)
    r = el_residual(L, FIELDS_SHELL[1], x)
    assert np.abs(r.values).max() > 1e-4


# -- eps bracket -----------------------------------------------------------------


@given(st.lists(st.floats(-10, 10), min_size=8, max_size=8), st.floats(-5, 5))
def test_eps_bracket_linear(vals, lam):
    a = np.array(vals[:4]).reshape(2, 2)
    b = np.array(vals[4:]).reshape(2, 2)
    assert eps_bracket(a + lam * b) == pytest.approx(eps_bracket(a) + lam * eps_bracket(b), abs=1e-9)


@given(st.lists(st.floats(-10, 10), min_size=4, max_size=4))
def test_eps_bracket_vanishes_on_symmetric(vals):
    a = np.array(vals).reshape(2, 2)
    assert eps_bracket(a + a.T) == 0.0


# -- polyconvex arguments --------------------------------------------------------


def test_polyconvex_basis_state():
    F = E[:, :2]
    args = polyconvex_args_shell(state(F=F))
    assert tuple(args) == POLYCONVEX_NAMES_SHELL
    np.testing.assert_array_equal(args["F"], F)
    np.testing.assert_array_equal(args["Fe1^Fe2"], E[2])
    for k in ("G", "Ge1^Fe2", "Fe1(x)Ge2-Fe2(x)Ge1"):
        assert not np.any(args[k])


def test_polyconvex_count():
    args = polyconvex_args_shell(random_state(np.random.default_rng(2)))
    assert sum(np.size(v) for v in args.values()) == 27


def test_polyconvex_F_equals_G():
    s = random_state(np.random.default_rng(3))
    s = StatePointShell(s.x, s.y, s.theta, s.F, s.F)
    args = polyconvex_args_shell(s)
    np.testing.assert_allclose(args["Ge1^Fe2"], args["Fe1^Fe2"])
    np.testing.assert_allclose(args["Fe1^Fe2"], T.wedge(s.F[:, 0], s.F[:, 1]))


# -- file format -----------------------------------------------------------------


def test_from_text():
    p = PotentialSetShell.from_text("# shell\nPbar[2] = x1\nPhat[1] = y2\n\nPtil[3] = t1*y3\n")
    assert p.Pbar[1].pretty() == "x1"
    assert p.Phat[0].pretty() == "y2"
    assert p.Ptil[2].pretty() == "t1*y3"
    assert p.Pbar[0].is_zero


@pytest.mark.parametrize(
    "text",
    ["Pbar[3] = x1", "Phat[1] = x3", "Q[1] = y1", "Phat[1] = y2 +", "Phat[0] = 1"],
)
def test_from_text_errors(text):
    with pytest.raises((ExprSyntaxError, ValueError)):
        PotentialSetShell.from_text(text)
