import math

import numpy as np
import pytest

from fifthmkdv.errors import NumericalGuardError, ResolutionError, UsageError
from fifthmkdv.evolution import (
    EquationCoeffs,
    Trajectory,
    conserved_quantities,
    evolve_cubic_nls,
    evolve_fifth_mkdv,
    linear_fifth_propagator,
)
from fifthmkdv.spectral import (
    SPECTRAL,
    ComplexField,
    RealField,
    SpaceGrid,
    l2_norm,
    spectral_coefficients,
    spectral_derivative,
    to_spectral,
)


def smooth_real(grid, mass=0.1, seed=0):
    """Band-limited real datum with prescribed L2 norm."""
    x = grid.x
    L = grid.length
    u = np.exp(np.cos(2 * math.pi * x / L)) + 0.3 * np.sin(4 * math.pi * x / L + 0.4)
    u -= u.mean() * 0.5
    f = RealField(grid, u)
    return RealField(grid, u * (mass / l2_norm(f)))


def monomial_rhs(u, m):
    """Nonlinearity evaluated directly from monomial coefficients on a fine grid."""
    d1, d2, d3 = (spectral_derivative(u, k).samples for k in (1, 2, 3))
    v = u.samples
    return m["u2_uxxx"] * v**2 * d3 + m["u_ux_uxx"] * v * d1 * d2 + m["ux3"] * d1**3 + m["u4_ux"] * v**4 * d1


class TestCoeffs:
    def test_integrable_regrouping(self):
        c = EquationCoeffs.integrable()
        assert (c.c1, c.c2, c.c3, c.c0) == pytest.approx((5 / 3, 10, 5, -30))
        assert c.monomials() == pytest.approx({"u2_uxxx": 10, "u_ux_uxx": 40, "ux3": 10, "u4_ux": -30})
        assert c.conserves_mass

    def test_regrouping_matches_monomials_pointwise(self):
        # oracle: expand (u^3)_xxx numerically and compare with the monomial form
        g = SpaceGrid(2 * math.pi, 128)
        u = RealField(g, 0.3 * np.cos(g.x) + 0.2 * np.sin(2 * g.x))
        c = EquationCoeffs.integrable()
        grouped = (
            c.c1 * spectral_derivative(RealField(g, u.samples**3), 3).samples
            + c.c2 * u.samples * spectral_derivative(u, 1).samples * spectral_derivative(u, 2).samples
            + c.c3 * u.samples**2 * spectral_derivative(u, 3).samples
            + c.c0 * u.samples**4 * spectral_derivative(u, 1).samples
        )
        np.testing.assert_allclose(grouped, monomial_rhs(u, c.monomials()), atol=1e-12)

    def test_generic_not_conservative(self):
        assert not EquationCoeffs(1, 0, 0).conserves_mass


class TestLinear:
    def test_identity(self):
        g = SpaceGrid(2 * math.pi, 32)
        u = ComplexField(g, np.random.default_rng(0).standard_normal(32))
        np.testing.assert_allclose(linear_fifth_propagator(u, 0.0).samples, u.samples, atol=1e-14)

    def test_single_mode_phase(self):
        g = SpaceGrid(2 * math.pi, 256)
        t = 1.0
        for k in (1, 3, 17, 100):
            u = ComplexField(g, np.exp(1j * k * g.x))
            out = linear_fifth_propagator(u, t).samples
            ref = np.exp(1j * t * float(k) ** 5) * np.exp(1j * k * g.x)
            assert np.max(np.abs(out - ref)) < 1e-12 * max(1.0, 1e-12 * k**5)

    def test_unitary(self):
        g = SpaceGrid(3.0, 64)
        rng = np.random.default_rng(1)
        u = ComplexField(g, rng.standard_normal(64) + 1j * rng.standard_normal(64))
        c = spectral_coefficients(RealField(g, rng.standard_normal(64))).copy()
        c[32] = 0.0  # a real field's Nyquist mode has no real propagated partner
        v = RealField(g, c, SPECTRAL)
        for t in (0.1, 7.3, -2.0):
            assert l2_norm(linear_fifth_propagator(u, t)) == pytest.approx(l2_norm(u), rel=1e-12)
            assert l2_norm(linear_fifth_propagator(v, t)) == pytest.approx(l2_norm(v), rel=1e-12)


class TestMkdv:
    def test_zero_coeffs_is_linear(self):
        g = SpaceGrid(2 * math.pi, 64)
        u0 = smooth_real(g, 1.0)
        traj = evolve_fifth_mkdv(u0, EquationCoeffs(), T=1.0, dt=0.05)
        ref = linear_fifth_propagator(u0, 1.0).samples
        assert np.max(np.abs(traj.fields[-1].samples - ref)) < 1e-10

    def test_integrable_mass_drift(self):
        g = SpaceGrid(2 * math.pi, 64)
        u0 = smooth_real(g, 0.1)
        traj = evolve_fifth_mkdv(u0, EquationCoeffs.integrable(), T=0.1, dt=1e-3, sample_times=np.linspace(0, 0.1, 6))
        assert conserved_quantities(traj).max_mass_drift < 1e-6

    def test_reality(self):
        g = SpaceGrid(2 * math.pi, 32)
        traj = evolve_fifth_mkdv(smooth_real(g, 1.0), EquationCoeffs(1, 2, 3), T=0.05)
        for f in traj.fields:
            assert f.samples.dtype == np.float64

    def test_fourth_order(self):
        # long box: h k_max^5 stays moderate, so the asymptotic regime is reached
        g = SpaceGrid(8 * math.pi, 32)
        u0 = smooth_real(g, 1.0)
        co = EquationCoeffs(1.0, 0.5, -0.7, 2.0)
        T = 0.5
        ref = evolve_fifth_mkdv(u0, co, T, dt=T / 3200).fields[-1].samples
        errs = []
        for steps in (50, 100):
            out = evolve_fifth_mkdv(u0, co, T, dt=T / steps).fields[-1].samples
            errs.append(np.max(np.abs(out - ref)))
        order = math.log2(errs[0] / errs[1])
        assert order > 3.8

    def test_band_limit_holds(self):
        g = SpaceGrid(2 * math.pi, 64)
        u0 = RealField(g, 0.5 * np.cos(2 * g.x))
        traj = evolve_fifth_mkdv(u0, EquationCoeffs(1, 0, 0), 0.05, dt=1e-3, band_limit=3.0)
        c = spectral_coefficients(traj.fields[-1])
        assert np.max(np.abs(c[4:-3])) < 1e-14
        assert np.abs(c[2]) > 0.1

    def test_band_limit_rejects_wide_data(self):
        g = SpaceGrid(2 * math.pi, 64)
        with pytest.raises(ResolutionError):
            evolve_fifth_mkdv(RealField(g, np.cos(5 * g.x)), EquationCoeffs(), 0.1, 0.01, band_limit=3.0)

    def test_blowup_guard(self):
        g = SpaceGrid(2 * math.pi, 64)
        u0 = smooth_real(g, 5.0)
        with pytest.raises(NumericalGuardError):
            evolve_fifth_mkdv(u0, EquationCoeffs(1, 3, 0), T=1.0, dt=0.2, sample_times=np.linspace(0, 1, 6))

    def test_requires_real(self):
        g = SpaceGrid(1.0, 8)
        with pytest.raises(UsageError):
            evolve_fifth_mkdv(ComplexField(g, np.zeros(8)), EquationCoeffs(), 1.0, 0.1)


class TestNls:
    def test_constant_solution(self):
        g = SpaceGrid(2 * math.pi, 32)
        a = 0.8
        traj = evolve_cubic_nls(ComplexField(g, np.full(32, a)), T=1.0, dt=1e-3)
        ref = a * np.exp(1j * a * a * 1.0)
        assert np.max(np.abs(traj.fields[-1].samples - ref)) < 1e-10

    def test_constant_solution_focusing_and_backward(self):
        g = SpaceGrid(2 * math.pi, 16)
        a = 1.1
        traj = evolve_cubic_nls(ComplexField(g, np.full(16, a)), T=-0.5, dt=1e-3, sigma=-1)
        assert traj.times[0] == -0.5
        ref = a * np.exp(1j * a * a * 0.5)
        assert np.max(np.abs(traj.fields[0].samples - ref)) < 1e-10

    def test_zero(self):
        g = SpaceGrid(1.0, 16)
        traj = evolve_cubic_nls(ComplexField(g, np.zeros(16)), T=1.0, dt=0.1)
        assert not np.any(traj.fields[-1].samples)

    def test_mass_drift_gaussian(self):
        g = SpaceGrid(30.0, 256)
        u0 = ComplexField(g, 1.2 * np.exp(-((g.x - 15) ** 2) / 2))
        traj = evolve_cubic_nls(u0, T=1.0, dt=1e-3, sample_times=np.linspace(0, 1, 11))
        tab = conserved_quantities(traj)
        assert tab.max_mass_drift < 1e-8
        assert tab.max_energy_drift < 1e-6

    def test_soliton(self):
        # focusing oracle: A sech(A y / sqrt 2) exp(-i A^2 t / 2)
        g = SpaceGrid(60.0, 256)
        A = 1.3
        prof = A / np.cosh(A * (g.x - 30) / math.sqrt(2))
        traj = evolve_cubic_nls(ComplexField(g, prof), T=2.0, dt=1e-3, sigma=-1)
        ref = prof * np.exp(-0.5j * A * A * 2.0)
        assert np.max(np.abs(traj.fields[-1].samples - ref)) < 1e-8

    def test_fourth_order(self):
        g = SpaceGrid(20.0, 128)
        u0 = ComplexField(g, 1.5 * np.exp(-((g.x - 10) ** 2)) * np.exp(0.5j * g.x * 2 * math.pi / 20))
        T = 1.0
        ref = evolve_cubic_nls(u0, T, T / 1600).fields[-1].samples
        e1 = np.max(np.abs(evolve_cubic_nls(u0, T, T / 25).fields[-1].samples - ref))
        e2 = np.max(np.abs(evolve_cubic_nls(u0, T, T / 50).fields[-1].samples - ref))
        assert math.log2(e1 / e2) > 3.8


class TestTrajectory:
    def test_increasing_times(self):
        g = SpaceGrid(1.0, 8)
        f = ComplexField(g, np.zeros(8))
        with pytest.raises(UsageError):
            Trajectory(g, [0.0, 0.0], [f, f])

    def test_linear_zero_drift(self):
        g = SpaceGrid(2 * math.pi, 32)
        traj = evolve_fifth_mkdv(smooth_real(g, 1.0), EquationCoeffs(), 1.0, 0.1, sample_times=[0, 0.5, 1])
        assert conserved_quantities(traj).max_mass_drift < 1e-12
