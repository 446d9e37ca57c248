import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kahlerqch import scalar as sf
from kahlerqch.errors import BuildRejected, DomainError, InfeasibleManufacturedSolution, NotClosedError, UsageError
from kahlerqch.exterior import wedge
from kahlerqch.scalar import Box, ChartPoint
from kahlerqch.surfaces import (
    FAMILY_MUTATIONS,
    J_MATRIX,
    JBAR_MATRIX,
    AlphaProfile,
    SurfaceSpec,
    build,
    build_calabi,
    build_coth,
    build_tan,
    build_tanh,
    classify_alpha,
    grid_tolerance,
    h_gradient_potentials,
    manufacture_h_from_H,
    mutate_theta3,
    pde_coefficients,
    potential_from_closed_form,
    volume_potential,
)
from kahlerqch.verify import run_suite

from conftest import COTH_DOMAIN, H_COTH, H_HALF, model

x, y, z = sf.x, sf.y, sf.z
ZS = ChartPoint(z=np.linspace(0.1, 0.6, 30))


def ev(f, pts):
    return np.asarray(sf.evaluate(f, pts))


@pytest.mark.parametrize(
    "family, want",
    [("tan", (2.0, -4.0)), ("coth", (2.0, 4.0)), ("tanh", (-2.0, 4.0))],
)
def test_pde_coefficients(family, want):
    # Delta ln H = c1 h^2 + c2 H^2 with a = 1
    assert pde_coefficients(family, 1.0) == pytest.approx(want)
    assert pde_coefficients(family, 2.0) == pytest.approx(tuple(4 * w for w in want))


def test_pde_coefficients_reject_calabi():
    with pytest.raises(UsageError):
        pde_coefficients("calabi", 1.0)


class TestClassify:
    def test_tan_branch(self):
        prof = classify_alpha(2.0, "tan")
        assert prof.variant == "tan" and prof.value == pytest.approx(1.0)
        np.testing.assert_allclose(ev(prof.alpha, ZS), 2 * np.tan(ZS.z))

    def test_semi_symmetric(self):
        prof = classify_alpha(0.0)
        assert prof.variant == "semi"
        np.testing.assert_allclose(ev(prof.alpha, ZS), -2 / ZS.z)

    @pytest.mark.parametrize("branch", ["coth", "tanh"])
    def test_negative_D(self, branch):
        prof = classify_alpha(-8.0, branch)
        assert prof.variant == branch and prof.value == pytest.approx(2.0)

    @pytest.mark.parametrize("D, branch", [(2.0, "coth"), (0.0, "tan"), (-2.0, None), (-2.0, "tan")])
    def test_branch_mismatch(self, D, branch):
        with pytest.raises(UsageError):
            classify_alpha(D, branch)

    def test_for_interval_picks_sign_branch(self):
        prof = AlphaProfile.for_interval("semi", None, (-2.0, -0.5))
        np.testing.assert_allclose(ev(prof.A.partial("z") - prof.alpha, ChartPoint(z=np.linspace(-2, -0.5, 9))), 0,
                                   atol=1e-12)
        with pytest.raises(UsageError):
            AlphaProfile.for_interval("sec", 1.0, (0.1, 0.2))

    @settings(max_examples=40, deadline=None)
    @given(st.floats(-20, 20).filter(lambda d: abs(d) > 1e-3), st.sampled_from(["coth", "tanh"]))
    def test_riccati_holds(self, D, branch):
        prof = classify_alpha(D, "tan" if D > 0 else branch)
        lo, hi = prof.natural
        lo = max(lo, hi - 3.0) if math.isfinite(hi) else lo
        hi = min(hi, lo + 3.0)
        zs = ChartPoint(z=np.linspace(lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo), 40))
        a, da = ev(prof.alpha, zs), ev(prof.alpha.partial("z"), zs)
        np.testing.assert_allclose(da, a * a / 2 + D, rtol=1e-9, atol=1e-9)
        np.testing.assert_allclose(ev(prof.A.partial("z"), zs), a, rtol=1e-9, atol=1e-9)


class TestProfileValidation:
    def test_zero_constant(self):
        with pytest.raises(UsageError):
            AlphaProfile.constant(0.0)

    def test_tan_interval_beyond_pole(self):
        with pytest.raises(BuildRejected):
            AlphaProfile.tan(1.0).validate((0.1, 2.0))

    def test_interval_through_zero(self):
        # alpha = 2a tan az vanishes at z = 0, which is excluded from every admissible interval
        with pytest.raises(BuildRejected):
            AlphaProfile.tan(1.0).validate((-0.3, 0.3))

    def test_user_profile_depends_on_z_only(self):
        with pytest.raises(UsageError):
            AlphaProfile.user(x * z, z)

    def test_user_antiderivative_checked(self):
        with pytest.raises(BuildRejected):
            AlphaProfile.user(2 * sf.tan(2 * z), sf.ln(sf.cos(2 * z))).validate((0.1, 0.6))


class TestPotentials:
    def test_xy(self):
        F = potential_from_closed_form(y, x)
        pts = Box().sample(20, 0)
        np.testing.assert_allclose(ev(F, pts), pts.x * pts.y, atol=1e-13)

    def test_not_closed(self):
        with pytest.raises(NotClosedError):
            potential_from_closed_form(y, -x)

    def test_volume_potential(self):
        l2, n2 = volume_potential(1 + x**2)
        assert l2.is_const(0.0)
        xs = np.linspace(-1, 1, 11)
        np.testing.assert_allclose(ev(n2, ChartPoint(x=xs)), xs + 2 * xs**3 / 3 + xs**5 / 5, atol=1e-12)

    def test_volume_potential_rejects_nonpositive_h(self):
        with pytest.raises(BuildRejected):
            volume_potential(x, Box())

    @pytest.mark.parametrize("family", ["tan", "tanh", "coth"])
    def test_gradient_potentials_signs(self, family):
        H = sf.exp(x + 2 * y)
        l2, n2 = h_gradient_potentials(H, 0.5, family)
        s = 1.0 if family != "coth" else -1.0
        p = ChartPoint(x=0.1, y=0.2)
        assert float(sf.evaluate(l2, p)) == pytest.approx(-s * 2.0)
        assert float(sf.evaluate(n2, p)) == pytest.approx(s * 1.0)


class TestBuilders:
    def test_unknown_family(self):
        with pytest.raises(UsageError):
            SurfaceSpec("sec", Box())

    def test_calabi_needs_profile(self):
        with pytest.raises(UsageError):
            build_calabi(SurfaceSpec("calabi", Box()))

    def test_calabi_potential_mismatch(self):
        spec = SurfaceSpec("calabi", Box(), alpha=AlphaProfile.constant(1.0), l2=sf.ZERO, n2=2 * x)
        with pytest.raises(BuildRejected) as exc:
            build_calabi(spec)
        assert exc.value.max_residual == pytest.approx(1.0)

    def test_calabi_default_potential(self):
        m = build(SurfaceSpec("calabi", Box(), alpha=AlphaProfile.constant(2.0), h=1 + y**2))
        assert m.l2.is_const(0.0)
        assert run_suite(m, 20, 0).passed

    def test_generalized_needs_H_and_a(self):
        with pytest.raises(UsageError):
            build_tan(SurfaceSpec("tan", Box(), a=1.0))
        with pytest.raises(UsageError):
            build_tan(SurfaceSpec("tan", Box(), H=H_HALF))

    def test_H_off_the_equation(self):
        with pytest.raises(BuildRejected) as exc:
            build_tan(SurfaceSpec("tan", Box(), a=1.0, H=sf.ONE))
        assert exc.value.max_residual == pytest.approx(2.0)
        assert set(exc.value.point) == {"x", "y", "z", "t"}

    def test_nonpositive_h(self):
        with pytest.raises(BuildRejected) as exc:
            build_tan(SurfaceSpec("tan", Box(), a=1.0, h=x + 0.2, H=H_HALF))
        assert exc.value.point["x"] <= -0.2

    def test_explicit_potentials_must_match_gradients(self):
        spec = SurfaceSpec("coth", COTH_DOMAIN, a=0.5, h=manufacture_h_from_H(H_COTH, 0.5, "coth", COTH_DOMAIN),
                           H=H_COTH, l2=-2 * y, n2=2 * x)
        with pytest.raises(BuildRejected):
            build_coth(spec)

    def test_beta_vanishing_is_a_domain_error(self):
        with pytest.raises((DomainError, BuildRejected)):
            build_tanh(SurfaceSpec("tanh", Box(z=(-0.5, 0.5)), a=1.0, H=H_HALF))

    def test_manufacture_infeasible(self):
        with pytest.raises(InfeasibleManufacturedSolution):
            manufacture_h_from_H(sf.exp(5 * (x**2 + y**2)), 1.0, "tanh", Box())

    def test_manufactured_pair_solves_equation(self):
        h = manufacture_h_from_H(H_COTH, 0.5, "coth", COTH_DOMAIN)
        c1, c2 = pde_coefficients("coth", 0.5)
        res = sf.laplacian_xy(sf.ln(H_COTH)) - c1 * h * h - c2 * H_COTH**2
        np.testing.assert_allclose(ev(res, COTH_DOMAIN.sample(30, 0)), 0, atol=1e-12)

    def test_l2n2_sign_flip_builds_but_fails(self):
        H = sf.exp((x**2 + y**2) / 10)
        h = sf.sqrt((sf.laplacian_xy(sf.ln(H)) + 4 * H**2) / 2)
        m = build(SurfaceSpec("tan", Box(), a=1.0, h=h, H=H, l2n2_sign=-1.0))
        r = run_suite(m, 20, 0)
        assert "structure_eq_dtheta3" in r.failing()


class TestModel:
    def test_complex_structures(self):
        for J in (J_MATRIX, JBAR_MATRIX):
            np.testing.assert_array_equal(J @ J, -np.eye(4))
            np.testing.assert_array_equal(J.T @ J, np.eye(4))

    @pytest.mark.parametrize("name", ["calabi_const", "tan_const"])
    def test_kaehler_forms_are_J_duals(self, name):
        m = model(name)
        pts = m.sample(5, 0)
        # Omega(E_a, E_b) = g(J E_a, E_b) = J[b, a]
        np.testing.assert_allclose(m.omega.frame_components(m.frame, pts), np.broadcast_to(m.J.T, (5, 4, 4)),
                                   atol=1e-12)
        np.testing.assert_allclose(m.omega_bar.frame_components(m.frame, pts),
                                   np.broadcast_to(m.Jbar.T, (5, 4, 4)), atol=1e-12)

    def test_frame_shape(self):
        m = model("tan_gradient")
        pts = m.sample(10, 0)
        E = m.frame.frame_matrix(pts)
        np.testing.assert_allclose(E[:, 3], np.broadcast_to([0, 0, 1, 0], (10, 4)))  # E4 = d_z
        np.testing.assert_allclose(E[:, 2, :3], 0, atol=1e-15)  # E3 along d_t

    def test_describe(self):
        d = model("coth_manufactured").describe()
        assert d["family"] == "coth" and d["a"] == 0.5 and "H" in d

    def test_volume_form_orientation(self):
        m = model("tanh_const")
        pts = m.sample(5, 0)
        vol = m.frame.volume().frame_components(m.frame, pts)
        assert np.allclose(vol[:, 0, 1, 2, 3], 1.0)
        np.testing.assert_allclose(wedge(m.omega, m.omega).frame_components(m.frame, pts)[:, 0, 1, 2, 3], 2.0)


class TestMutations:
    def test_three_documented_per_family(self):
        assert all(len(v) == 3 for v in FAMILY_MUTATIONS.values())

    def test_unknown_mutation(self):
        with pytest.raises(UsageError):
            mutate_theta3(model("tan_const"), "dz")

    def test_mutation_changes_only_theta3(self):
        m = model("tan_const")
        bad = mutate_theta3(m, "dx")
        assert bad.coframe_data["p3x"] is not m.coframe_data["p3x"]
        assert bad.coframe_data["p4x"] is m.coframe_data["p4x"]
        assert bad.frame.duality_residual(bad.sample(10, 0)) < 1e-12
        assert "theta3 dx sign flipped" in bad.notes and not m.notes

    def test_calabi_dt_flip_is_an_isometry(self):
        # theta3 with -dt is the pullback under t -> -t, so nothing can detect it;
        # that is why the Calabi family documents the overall flip instead
        r = run_suite(mutate_theta3(model("calabi_const"), "dt"), 30, 0)
        assert r.passed


def test_grid_tolerance():
    assert grid_tolerance(0.1) == pytest.approx(0.1)
