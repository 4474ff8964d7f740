import numpy as np
import pytest

from nullax import tensor as T
from nullax.expr import FieldSpec, field_jet
from nullax.library import FIELDS_3D, random_potentials_3d
from nullax.nulllag3d import (
    CoefficientFields3D,
    CoefficientSet3D,
    NullLagrangian3D,
    PotentialSet3D,
    StatePoint3D,
    assemble_lagrangian,
    assemble_P,
    assemble_P_direct,
    build_coefficients,
    divergence_P_fd,
    flatten_args,
    polyconvex_args3d,
    total_derivative_state,
    total_divergence_P,
)
from nullax.variational import el_residual


def state(rng, batch=()):
    return StatePoint3D(*(rng.normal(size=tuple(batch) + s) for s in ((3,), (3,), (3,), (3, 3), (3, 3))))


def nonzero(c: CoefficientSet3D):
    return {k for k, v in c.items() if np.any(np.asarray(v) != 0)}


class TestCoefficients:
    def test_zero_potentials(self, rng):
        c = build_coefficients(PotentialSet3D.zero(), *rng.normal(size=(3, 3)))
        assert nonzero(c) == set()

    def test_det_potential(self, rng):
        c = build_coefficients(PotentialSet3D(M=["y1"]), *rng.normal(size=(3, 3)))
        assert nonzero(c) == {"D"} and c.D == 1.0

    def test_rotation_dependent_L(self):
        c = build_coefficients(PotentialSet3D(L=["x2*t1"]), [0.1, 0.7, 0.2], [0, 0, 0], [0.3, 0, 0])
        assert nonzero(c) == {"Bt"}
        expected = np.zeros((3, 3))
        expected[0, 0] = 0.7
        np.testing.assert_allclose(c.Bt, expected)
        assert c.A == 0.0

    def test_indicial_relations_against_finite_differences(self, rng):
        p = random_potentials_3d(5)
        z = rng.uniform(-1, 1, 9)
        c = build_coefficients(p, z[:3], z[3:6], z[6:])
        h = 1e-6

        def grad(f):
            out = np.zeros(9)
            for k in range(9):
                e = np.zeros(9)
                e[k] = h
                names = ("x1", "x2", "x3", "y1", "y2", "y3", "t1", "t2", "t3")
                up = float(f.evaluate(dict(zip(names, z + e))))
                dn = float(f.evaluate(dict(zip(names, z - e))))
                out[k] = (up - dn) / (2 * h)
            return out

        g = {
            name: np.array([grad(f) for f in getattr(p, name)])
            for name in ("L", "M", "Mt")
        }
        for name in ("K", "Kt", "H"):
            g[name] = np.array([[grad(f) for f in row] for row in getattr(p, name)])
        X, Y, Th = slice(0, 3), slice(3, 6), slice(6, 9)
        eps = T.EPS
        np.testing.assert_allclose(c.A, np.trace(g["L"][:, X]), atol=1e-7)
        np.testing.assert_allclose(c.D, np.trace(g["M"][:, Y]), atol=1e-7)
        np.testing.assert_allclose(c.Dt, np.trace(g["Mt"][:, Th]), atol=1e-7)
        J = (
            np.einsum("jca->ajc", g["K"][:, :, Th])
            - np.einsum("acj->ajc", g["Kt"][:, :, Y])
            + g["H"][:, :, X]
        )
        np.testing.assert_allclose(c.J, J, atol=1e-7)
        np.testing.assert_allclose(c.B, g["L"][:, Y] - np.einsum("abc,icb->ai", eps, g["K"][:, :, X]), atol=1e-7)
        np.testing.assert_allclose(c.C, np.einsum("ijk,kaj->ia", eps, g["K"][:, :, Y]) + g["M"][:, X], atol=1e-7)
        np.testing.assert_allclose(c.Bt, g["L"][:, Th] - np.einsum("abc,gcb->ag", eps, g["Kt"][:, :, X]), atol=1e-7)
        np.testing.assert_allclose(c.Ct, np.einsum("ibg,gab->ia", eps, g["Kt"][:, :, Th]) + g["Mt"][:, X], atol=1e-7)
        np.testing.assert_allclose(c.Bh, g["Mt"][:, Y] + np.einsum("abg,gib->ai", eps, g["H"][:, :, Th]), atol=1e-7)
        np.testing.assert_allclose(c.Ch, g["M"][:, Th] + np.einsum("ijk,ajk->ia", eps, g["H"][:, :, Y]), atol=1e-7)

    def test_symbolic_and_numeric_paths_agree(self, rng):
        p = random_potentials_3d(11)
        x, y, th = rng.uniform(-1, 1, (3, 6, 3))
        numeric = build_coefficients(p, x, y, th)
        env = {}
        for names, arr in ((("x1", "x2", "x3"), x), (("y1", "y2", "y3"), y), (("t1", "t2", "t3"), th)):
            env.update({n: arr[:, k] for k, n in enumerate(names)})
        symbolic = CoefficientFields3D.from_potentials(p).evaluate(env, (6,))
        for (k, a), (_, b) in zip(numeric.items(), symbolic.items()):
            np.testing.assert_allclose(a, b, atol=1e-13, err_msg=k)


class TestAssembly:
    def test_zero(self, rng):
        assert assemble_lagrangian(CoefficientSet3D.zero(), state(rng)) == 0.0

    def test_det_term(self, rng):
        c = CoefficientSet3D.zero()
        c.D = 1.0
        s = state(rng)
        s.F = np.diag([2.0, 3.0, 4.0])
        assert assemble_lagrangian(c, s) == 24.0

    def test_J_term(self):
        c = CoefficientSet3D.zero()
        J = np.zeros((3, 3, 3))
        J[0, 0, 0] = 1.0
        c.J = J
        s = StatePoint3D(np.zeros(3), np.zeros(3), np.zeros(3), np.eye(3), np.eye(3))
        assert assemble_lagrangian(c, s) == 0.0
        # F = I, G = e1 (x) e2: G^T e_1 = e2, F^T e_1 = e1, e2 ^ e1 = -e3
        J = np.zeros((3, 3, 3))
        J[0, 0, 2] = 1.0
        c.J = J
        s.G = np.outer([1, 0, 0], [0, 1, 0])
        assert assemble_lagrangian(c, s) == -1.0

    def test_matches_indicial_sum(self, rng):
        c = CoefficientSet3D(*(rng.normal(size=s) for s in [(), (), (), (3, 3), (3, 3), (3, 3), (3, 3), (3, 3), (3, 3), (3, 3, 3)]))
        s = state(rng)
        F, G = s.F, s.G
        cF, cG = T.cof(F), T.cof(G)
        e = T.EPS
        ref = (
            c.A
            + np.einsum("ai,ia", c.B, F)
            + np.einsum("ia,ia", c.C, cF)
            + c.D * np.linalg.det(F)
            + np.einsum("ag,ga", c.Bt, G)
            + np.einsum("ia,ia", c.Ct, cG)
            + c.Dt * np.linalg.det(G)
            + np.einsum("gi,gA,iA", c.Bh, cG, F)
            + np.einsum("ig,iA,gA", c.Ch, cF, G)
            + np.einsum("gjC,gA,jB,CAB", c.J, G, F, e)
        )
        assert assemble_lagrangian(c, s) == pytest.approx(ref, rel=1e-12)


class TestDivergenceVector:
    def test_zero(self, rng):
        np.testing.assert_array_equal(assemble_P(PotentialSet3D.zero(), state(rng)), np.zeros(3))

    def test_det_potential(self, rng):
        s = state(rng)
        s.F = np.eye(3)
        np.testing.assert_allclose(assemble_P(PotentialSet3D(M=["y1"]), s), [s.y[0], 0, 0])

    def test_indicial_equals_direct(self, rng):
        for seed in range(5):
            p = random_potentials_3d(seed)
            s = state(rng, (10,))
            np.testing.assert_allclose(assemble_P(p, s), assemble_P_direct(p, s), atol=1e-12 * 50)

    def test_indicial_formula(self, rng):
        p = random_potentials_3d(2)
        s = state(rng)
        pot = p.evaluate(
            {n: v for names, arr in ((("x1", "x2", "x3"), s.x), (("y1", "y2", "y3"), s.y), (("t1", "t2", "t3"), s.theta)) for n, v in zip(names, arr)},
            (),
        )
        e = T.EPS
        ref = (
            pot["L"]
            + np.einsum("ABC,iB,iC->A", e, s.F, pot["K"])
            + np.einsum("iA,i->A", T.cof(s.F), pot["M"])
            + np.einsum("ABC,aB,aC->A", e, s.G, pot["Kt"])
            + np.einsum("aA,a->A", T.cof(s.G), pot["Mt"])
            + np.einsum("ABC,aB,iC,ai->A", e, s.G, s.F, pot["H"])
        )
        np.testing.assert_allclose(assemble_P(p, s), ref, atol=1e-12)

    def test_classical_reduction(self, rng):
        reduced = PotentialSet3D(L=["x1*y2 + x3"], M=["y1*x2", "x3^2", "y3"], K=[["y2*x1", "0", "x3"], [], ["y1", "x2", "0"]])
        s = state(rng)
        pot = reduced.evaluate({"x1": s.x[0], "x2": s.x[1], "x3": s.x[2], "y1": s.y[0], "y2": s.y[1], "y3": s.y[2]}, ())
        ref = pot["L"] + T.gibbs_cross(s.F.T @ pot["K"]) + T.cof(s.F).T @ pot["M"]
        np.testing.assert_allclose(assemble_P(reduced, s), ref, atol=1e-13)

    def test_total_divergence_det(self):
        spec = FieldSpec.from_strings(["x1", "x2", "x3"])
        assert total_divergence_P(PotentialSet3D(M=["y1"]), spec, [0.2, 0.3, 0.4]) == pytest.approx(1.0)

    def test_divergence_equals_lagrangian(self, rng):
        for seed in range(3):
            p = random_potentials_3d(seed)
            L = NullLagrangian3D(p)
            for spec in FIELDS_3D:
                x = rng.uniform(0, 1, (20, 3))
                j = field_jet(spec, x)
                val = L(StatePoint3D.from_jet(x, j))
                div = total_divergence_P(p, spec, x)
                np.testing.assert_allclose(div, val, atol=1e-8 * (1 + np.abs(val).max()))

    def test_chain_rule_matches_finite_differences(self, rng):
        p = random_potentials_3d(8)
        x = rng.uniform(0.2, 0.8, (5, 3))
        spec = FIELDS_3D[4]
        np.testing.assert_allclose(divergence_P_fd(p, spec, x), total_divergence_P(p, spec, x), rtol=1e-6, atol=1e-7)


def test_piola_identity(rng):
    for spec in FIELDS_3D:
        x = rng.uniform(0, 1, (10, 3))
        st, _ = total_derivative_state(spec, x)
        dcof = T.cof(st.F).part(1)  # (t, batch, i, A)
        div = sum(dcof[a, ..., a] for a in range(3))
        np.testing.assert_allclose(div, 0.0, atol=1e-12)


class TestNullity:
    def test_el_residual_vanishes(self, rng):
        for seed in range(4):
            L = NullLagrangian3D(random_potentials_3d(100 + seed))
            for spec in FIELDS_3D:
                r = el_residual(L, spec, rng.uniform(0, 1, (20, 3)))
                assert (np.abs(r.values).max(axis=-1) / r.scale).max() < 1e-8

    def test_symbolic_lagrangian_matches_numeric_assembly(self, rng):
        p = random_potentials_3d(3)
        x = rng.uniform(0, 1, (7, 3))
        j = field_jet(FIELDS_3D[2], x)
        s = StatePoint3D.from_jet(x, j)
        c = build_coefficients(p, x, j.chi, j.theta)
        np.testing.assert_allclose(NullLagrangian3D(p)(s), assemble_lagrangian(c, s), atol=1e-13)


class TestPotentialFile:
    def test_parse(self):
        p = PotentialSet3D.from_text("# comment\nL[1] = x2*t1\nK[1,2] = y3  # trailing\n\nH[3,1] = 2\n")
        assert p.L[0].pretty() == "x2*t1"
        assert p.K[0][1].pretty() == "y3"
        assert p.H[2][0].pretty() == "2"
        assert p.M[1].is_zero

    @pytest.mark.parametrize("text", ["Q[1] = x1", "L[4] = x1", "K[1] = x1", "L[1] = x1 +", "L[1] x1"])
    def test_errors(self, text):
        with pytest.raises(ValueError):
            PotentialSet3D.from_text(text)


class TestPolyconvexArgs:
    def test_identity_state(self):
        s = StatePoint3D(np.zeros(3), np.zeros(3), np.zeros(3), np.eye(3), np.eye(3))
        args = polyconvex_args3d(s)
        for k in ("F", "cofF", "G", "cofG", "cofG_Ft", "cofF_Gt"):
            np.testing.assert_array_equal(args[k], np.eye(3))
        assert args["detF"] == 1.0 and args["detG"] == 1.0
        np.testing.assert_array_equal(args["T"], T.EPS)

    def test_no_rotation_gradient(self):
        s = StatePoint3D(np.zeros(3), np.zeros(3), np.zeros(3), np.eye(3), np.zeros((3, 3)))
        args = polyconvex_args3d(s)
        assert args["detF"] == 1.0 and args["detG"] == 0.0
        for k in ("G", "cofG", "cofG_Ft", "cofF_Gt", "T"):
            assert not np.any(args[k])

    def test_count(self, rng):
        assert flatten_args(polyconvex_args3d(state(rng))).size == 83

    def test_wedge_definition(self, rng):
        s = state(rng)
        Targ = polyconvex_args3d(s)["T"]
        for a in range(3):
            for j in range(3):
                np.testing.assert_allclose(Targ[a, j], np.cross(s.G.T @ np.eye(3)[a], s.F.T @ np.eye(3)[j]))
