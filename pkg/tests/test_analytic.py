import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from stochengine import EngineParams, table1_overdamped, table1_underdamped
from stochengine.analytic import (
    analytic_report,
    carnot_comparison,
    carnot_limit,
    efficiency_report,
    optimum,
    overdamped_efficiency,
    overdamped_optimum,
    overdamped_variance_first_order,
    underdamped_covariance_first_order,
    underdamped_efficiency,
    underdamped_optimum,
)
from stochengine.moments import IntegratorOptions, integrate_to_periodic_steady_state
from stochengine.spectral import solve_spectral, spectral_power

# frozen from the dense Kronecker-form balance (tests/oracles.py) at eps = 1e-4
KAPPA_TABLE1_M1 = 0.50689688
QH_PER_EPS_TABLE1_M1 = 0.25344844


@st.composite
def params(draw, underdamped=False):
    T0 = draw(st.floats(0.2, 5))
    eps = draw(st.floats(0.01, 1))
    return EngineParams(
        m=draw(st.floats(0.05, 5)) if underdamped else 0.0,
        gamma=draw(st.floats(0.1, 5)),
        omega=draw(st.floats(0.1, 10)),
        T0=T0,
        T1=draw(st.floats(0.01, 0.99)) * T0 / eps,
        q0=draw(st.floats(0.1, 20)),
        epsilon=eps,
    )


class TestOverdampedOptimum:
    def test_table1(self, od):
        opt = overdamped_optimum(od)
        assert opt.symbols["g"] == pytest.approx(2 * math.sqrt(2), rel=1e-15)
        assert opt.q1_star == pytest.approx(math.sqrt(2) / 4, rel=1e-15)
        assert opt.phi_star == pytest.approx(-math.pi / 4, rel=1e-15)
        assert opt.power_leading == pytest.approx(0.03125, rel=1e-15)
        assert overdamped_optimum(od.with_(epsilon=0.1)).power_leading == pytest.approx(3.125e-4, rel=1e-14)

    def test_static_bath(self, od):
        opt = overdamped_optimum(od.with_(T1=0.0))
        assert opt.q1_star == 0.0 and opt.power_leading == 0.0

    def test_fast_drive_limit(self, od):
        opt = overdamped_optimum(od.with_(omega=1e6))
        assert abs(opt.phi_star) < 1e-5
        assert opt.q1_star == pytest.approx(0.25, rel=1e-6)

    @given(params(), st.floats(0.01, 100))
    @settings(max_examples=50)
    def test_phase_scale_invariance(self, p, lam):
        scaled = p.with_(gamma=lam * p.gamma, q0=lam * p.q0)
        assert overdamped_optimum(scaled).phi_star == pytest.approx(overdamped_optimum(p).phi_star, abs=1e-12)

    def test_is_power_maximiser_by_direct_search(self):
        from scipy.optimize import minimize

        p = table1_overdamped(epsilon=1e-3)

        def neg_power(x):
            from stochengine import ControlProfile

            return -spectral_power(solve_spectral(p, ControlProfile.for_params(p, x[0], x[1]), 10)) / p.epsilon**2

        res = minimize(neg_power, [0.3, -0.5], method="Nelder-Mead", options={"xatol": 1e-8, "fatol": 1e-14})
        opt = overdamped_optimum(p)
        assert res.x[0] == pytest.approx(opt.q1_star, abs=1e-4)
        assert res.x[1] == pytest.approx(opt.phi_star, abs=1e-4)


class TestOverdampedVariance:
    def test_values(self, od):
        assert overdamped_variance_first_order(od, 0.0) == 1.0
        assert overdamped_variance_first_order(od, math.pi / 4) == pytest.approx(1.25, rel=1e-15)
        assert overdamped_variance_first_order(od.with_(epsilon=0.0), 0.7) == 1.0


class TestOverdampedEfficiency:
    def test_table1(self, od):
        eff = overdamped_efficiency(od)
        assert eff.Qh == pytest.approx(0.25 * (1 + math.pi / 16), rel=1e-15)
        assert eff.Qh == pytest.approx(0.299087, abs=1e-6)
        assert eff.Qc == pytest.approx(0.200913, abs=1e-6)
        assert eff.eta == pytest.approx(math.pi / 8, rel=1e-15)
        assert (eff.t1, eff.t2) == pytest.approx((math.pi / 4, 3 * math.pi / 4))

    def test_degenerate(self, od):
        eff = overdamped_efficiency(od.with_(T1=0.0))
        assert eff.Qh == eff.Qc == 0.0
        assert eff.degenerate and eff.eta == 0.0

    @given(params())
    @settings(max_examples=100)
    def test_cycle_identity(self, p):
        eff = overdamped_efficiency(p)
        W = 2 * math.pi / p.omega * overdamped_optimum(p).power_leading
        assert eff.Qh - eff.Qc == pytest.approx(W, rel=1e-12)
        assert W == pytest.approx(2 * p.epsilon**2 * math.pi * p.T1**2 * p.q0 / (8 * p.gamma * p.omega * p.T0), rel=1e-12)


class TestCarnot:
    def test_limit(self, od):
        assert abs(carnot_limit(od) - math.pi / 8) < 1e-10

    def test_table1(self, od):
        assert carnot_comparison(od) == pytest.approx(3 * math.pi / 16, rel=1e-15)

    def test_small_temperature_amplitude(self, od):
        assert carnot_comparison(od.with_(T1=1e-9)) == pytest.approx(math.pi / 8, rel=1e-8)

    def test_requires_modulation(self, od):
        with pytest.raises(ValueError):
            carnot_comparison(od.with_(T1=0.0))


class TestUnderdampedOptimum:
    def test_table1(self, ud):
        opt = underdamped_optimum(ud)
        s = opt.symbols
        assert (s["alpha"], s["beta"], s["denom"]) == (28.0, 76.0, 96.0)
        assert opt.q1_star == pytest.approx(10 * 0.5 * math.sqrt(6560) / 96, rel=1e-15)
        assert opt.q1_star == pytest.approx(4.2184, abs=1e-4)
        assert opt.phi_star == pytest.approx(math.atan2(-28, 76), rel=1e-15)
        assert opt.phi_star == pytest.approx(-0.35296, abs=1e-4)
        # frozen from a Nelder-Mead search on the dense Kronecker balance at eps=1e-4
        assert opt.phi_star == pytest.approx(-0.3529895, abs=1e-6)
        assert opt.power_leading == pytest.approx(5 / 192, rel=1e-14)

    def test_static_bath(self, ud):
        opt = underdamped_optimum(ud.with_(T1=0.0))
        assert opt.q1_star == 0.0 and opt.power_leading == 0.0

    @given(params(underdamped=True))
    @settings(max_examples=100)
    def test_validity_denominator_is_positive(self, p):
        # 2 gamma beta - alpha omega m reduces to omega gamma (4 gamma^2 + 4 q0 m + omega^2 m^2)
        s = underdamped_optimum(p).symbols
        g, w, m, q0 = p.gamma, p.omega, p.m, p.q0
        assert s["denom"] == pytest.approx(w * g * (4 * g * g + 4 * q0 * m + w * w * m * m), rel=1e-12)
        assert s["denom"] > 0

    def test_small_mass_recovers_overdamped(self, od):
        ud = od.with_(m=1e-6)
        a, b = underdamped_optimum(ud), overdamped_optimum(od)
        assert a.q1_star == pytest.approx(b.q1_star, rel=1e-4)
        assert a.phi_star == pytest.approx(b.phi_star, rel=1e-4)
        assert a.power_leading == pytest.approx(b.power_leading, rel=1e-4)

    def test_matches_numeric_first_order_optimum(self):
        from scipy.optimize import minimize

        from stochengine import ControlProfile

        p = table1_underdamped(epsilon=1e-3)

        def neg_power(x):
            return -spectral_power(solve_spectral(p, ControlProfile.for_params(p, x[0], x[1]), 10)) / p.epsilon**2

        res = minimize(neg_power, [4.0, -0.3], method="Nelder-Mead", options={"xatol": 1e-9, "fatol": 1e-15})
        opt = underdamped_optimum(p)
        assert res.x[0] == pytest.approx(opt.q1_star, rel=1e-4)
        assert res.x[1] == pytest.approx(opt.phi_star, abs=1e-4)
        assert -res.fun == pytest.approx(opt.power_leading / p.epsilon**2, rel=1e-5)


class TestUnderdampedCovariance:
    def test_equipartition(self, ud):
        s11, s12, s22 = underdamped_covariance_first_order(ud.with_(epsilon=0.0), np.linspace(0, 3, 5))
        assert np.all(s11 == 0.1) and np.all(s12 == 0.0) and np.all(s22 == 1.0)

    def test_cross_moment_at_zero(self, ud):
        _, s12, _ = underdamped_covariance_first_order(ud.with_(epsilon=0.01), 0.0)
        assert s12 == pytest.approx(0.01 * (2 * 0.5 / 96) * 2, rel=1e-14)
        assert s12 == pytest.approx(2.083e-4, abs=1e-7)

    def test_cross_moment_mean_zero(self, ud):
        t = np.linspace(0, ud.period, 4001)[:-1]
        _, s12, _ = underdamped_covariance_first_order(ud.with_(epsilon=0.1), t)
        assert abs(np.mean(s12)) < 1e-15

    @pytest.mark.parametrize("m", [0.5, 1.0, 2.0])
    def test_matches_numerics_to_first_order(self, m):
        # errors shrink by ~4x per halving of eps, confirming all three entries
        errors = []
        for eps in (0.02, 0.01):
            p = table1_underdamped(m=m, epsilon=eps)
            traj = integrate_to_periodic_steady_state(p, optimum(p).profile(p), IntegratorOptions(4000, 200, 1e-12))
            first = np.array(underdamped_covariance_first_order(p, traj.t)).T
            errors.append(np.max(np.abs(traj.samples - first), axis=0))
        ratio = errors[0] / errors[1]
        assert np.all(ratio > 3.5) and np.all(ratio < 4.5)
        assert np.all(errors[1] < 0.05 * 0.01)


class TestUnderdampedEfficiency:
    def test_table1(self, ud):
        eff = underdamped_efficiency(ud.with_(epsilon=0.1))
        assert eff.kappa2 == pytest.approx(5 / 12, rel=1e-14)
        assert eff.kappa1 == pytest.approx(2 * math.sqrt(260) / math.hypot(28, 76), rel=1e-14)
        assert eff.kappa == pytest.approx(KAPPA_TABLE1_M1, abs=1e-8)
        assert eff.Qh == pytest.approx(0.1 * QH_PER_EPS_TABLE1_M1, abs=1e-9)
        assert eff.eta == pytest.approx(0.1 * math.pi * 5 / 192 / QH_PER_EPS_TABLE1_M1, rel=1e-7)

    def test_kappa_against_dense_oracle(self):
        m, eps = 0.7, 1e-4
        p = table1_underdamped(m=m, epsilon=eps)
        opt = underdamped_optimum(p)
        c = oracles.dense_balance(m, 1, 1, 2, 1, 0.5, 10, eps, opt.q1_star, opt.phi_star, 20)
        amp = 2 * abs(eps * 0.5 / 2 / m - c[21, 3]) / eps
        assert underdamped_efficiency(p).kappa == pytest.approx(amp * m / 0.5, rel=1e-4)

    def test_degenerate(self, ud):
        eff = underdamped_efficiency(ud.with_(T1=0.0))
        assert eff.Qh == 0.0 and eff.degenerate and eff.eta == 0.0

    @given(params(underdamped=True))
    @settings(max_examples=100)
    def test_efficiency_identity(self, p):
        eff = underdamped_efficiency(p)
        W = 2 * math.pi / p.omega * underdamped_optimum(p).power_leading
        assert eff.eta * eff.Qh == pytest.approx(W, rel=1e-12)

    def test_small_mass_limits(self, od):
        eff = underdamped_efficiency(od.with_(m=1e-6))
        assert eff.kappa1 == pytest.approx(1.0, abs=1e-5)
        # kinetic energy keeps a heat exchange at m -> 0:
        # kappa/m -> sqrt(q0^2 + gamma^2 omega^2) / (2 gamma^2)
        assert eff.kappa / 1e-6 == pytest.approx(math.sqrt(5) / 2, rel=1e-4)


class TestReports:
    def test_dispatch(self, od, ud):
        assert optimum(od) == overdamped_optimum(od)
        assert efficiency_report(ud) == underdamped_efficiency(ud)

    def test_report_has_symbols(self, ud):
        report = analytic_report(ud)
        for key in ("g", "alpha", "beta", "r", "r2", "theta", "kappa", "kappa1", "kappa2", "q1_star", "phi_star"):
            assert key in report
        assert report["power"] == underdamped_optimum(ud).power_leading
