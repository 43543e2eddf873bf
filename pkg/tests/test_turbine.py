import math

import numpy as np
import pytest

from rews.exceptions import ConfigError, EnvelopeError
from rews.turbine import (PlantState, TurbineParams, default_turbine_params,
                          load_params_file, optimal_torque_gain, phi,
                          phi_clamped, phi_prime_u, plant_derivative,
                          rk4_plant_step, steady_state_rotor_speed, step_plant,
                          torque_controller)


class TestParams:
    def test_defaults_consistent(self, params):
        assert params.swept_area == pytest.approx(math.pi * 63.0 ** 2, rel=1e-12)
        j = 534.116 + 3.8759228e7 / 97.0 ** 2
        assert params.inertia_equivalent == pytest.approx(j, rel=1e-12)

    def test_positive_fields_enforced(self):
        with pytest.raises(ConfigError):
            TurbineParams(rho=-1.0, rotor_radius=63, gear_ratio=97,
                          inertia_generator=534.116, inertia_rotor=3.9e7)

    def test_inconsistent_derived_fields_rejected(self):
        with pytest.raises(ConfigError, match="swept_area"):
            TurbineParams(rho=1.225, rotor_radius=63, gear_ratio=97,
                          inertia_generator=534.116, inertia_rotor=3.9e7,
                          swept_area=1.0)
        with pytest.raises(ConfigError, match="inertia_equivalent"):
            TurbineParams(rho=1.225, rotor_radius=63, gear_ratio=97,
                          inertia_generator=534.116, inertia_rotor=3.9e7,
                          inertia_equivalent=1.0)

    def test_params_file_round_trip(self, tmp_path, params):
        path = tmp_path / "turbine.txt"
        path.write_text(
            "# fixture constants\n"
            f"rho={params.rho}\n"
            f"rotor_radius={params.rotor_radius}\n"
            f"gear_ratio={params.gear_ratio}\n"
            f"inertia_generator={params.inertia_generator}\n"
            f"inertia_rotor={params.inertia_rotor}\n")
        assert load_params_file(path) == params

    def test_params_file_unknown_key(self, tmp_path):
        path = tmp_path / "turbine.txt"
        path.write_text("rho=1.2\nbogus=1\n")
        with pytest.raises(ConfigError, match="bogus"):
            load_params_file(path)


class TestPhi:
    def test_doubling_inertia_halves_phi(self, params, curve):
        doubled = TurbineParams(
            rho=params.rho, rotor_radius=params.rotor_radius,
            gear_ratio=params.gear_ratio,
            inertia_generator=2 * params.inertia_generator,
            inertia_rotor=2 * params.inertia_rotor)
        a = phi(params, curve, 1.0, 10.0)
        b = phi(doubled, curve, 1.0, 10.0)
        assert b == pytest.approx(a / 2, rel=1e-12)

    def test_phi_equals_aero_torque_over_nj(self, params, curve):
        omega_r, u = 1.0, 10.0
        lam = omega_r * params.rotor_radius / u
        p_w = 0.5 * params.rho * params.swept_area * u ** 3 * curve.cp(lam)
        t_r = p_w / omega_r
        expected = t_r / (params.gear_ratio * params.inertia_equivalent)
        assert phi(params, curve, omega_r, u) == pytest.approx(expected, rel=1e-12)

    def test_phi_hand_value(self, params, curve):
        # Direct scalar evaluation at omega_r = 1, u = 8 (lambda = 7.875).
        expected = (params.rho * params.swept_area
                    / (2 * params.gear_ratio * params.inertia_equivalent)
                    * 8.0 ** 3 * curve.cp(7.875))
        assert phi(params, curve, 1.0, 8.0) == pytest.approx(expected, rel=1e-12)
        assert phi(params, curve, 1.0, 8.0) > 0

    def test_phi_envelope_errors(self, params, curve):
        with pytest.raises(EnvelopeError):
            phi(params, curve, 1.0, 1.0)   # lambda = 63, way out
        with pytest.raises(EnvelopeError):
            phi(params, curve, 1.0, -3.0)
        with pytest.raises(EnvelopeError):
            phi(params, curve, 0.01, 8.0)  # below the rotor-speed bound

    def test_phi_clamped_matches_inside(self, params, curve):
        val, clamped = phi_clamped(params, curve, 1.0, 8.0)
        assert not clamped
        assert val == phi(params, curve, 1.0, 8.0)

    def test_phi_clamped_saturates_outside(self, params, curve):
        # Above the envelope the value freezes at the envelope-edge wind.
        u_hi = 1.0 * params.rotor_radius / curve.lambda_min
        val, clamped = phi_clamped(params, curve, 1.0, u_hi * 2)
        assert clamped
        assert val == pytest.approx(phi(params, curve, 1.0, u_hi), rel=1e-12)
        val_lo, clamped_lo = phi_clamped(params, curve, 1.0, 1e-6)
        assert clamped_lo
        u_lo = 1.0 * params.rotor_radius / curve.lambda_max
        assert val_lo == pytest.approx(phi(params, curve, 1.0, u_lo), rel=1e-12)


class TestPhiPrime:
    def test_positive_above_kappa_root(self, params, curve):
        # lambda > lambda_zero implies a strictly increasing nonlinearity.
        u = 8.0
        omega = (curve.lambda_zero + 0.3) * u / params.rotor_radius
        assert phi_prime_u(params, curve, omega, u) > 0

    def test_matches_finite_differences(self, params, curve):
        rng = np.random.default_rng(11)
        checked = 0
        while checked < 20:
            omega = rng.uniform(0.5, 1.2)
            u = rng.uniform(5.0, 10.0)
            lam = omega * params.rotor_radius / u
            if not (curve.lambda_min + 0.1 < lam < curve.lambda_max - 0.1):
                continue
            h = 1e-5 * u
            fd = (phi(params, curve, omega, u + h)
                  - phi(params, curve, omega, u - h)) / (2 * h)
            assert phi_prime_u(params, curve, omega, u) == pytest.approx(fd, rel=1e-4)
            checked += 1

    def test_zero_at_kappa_root(self, params, curve):
        u = 8.0
        omega = curve.lambda_zero * u / params.rotor_radius
        slope_scale = phi_prime_u(params, curve, omega * 1.05, u)
        assert abs(phi_prime_u(params, curve, omega, u)) <= 1e-6 * slope_scale

    def test_monotone_in_u_above_condition(self, params, curve):
        # Fixed rotor speed above lambda_zero * u / R: increasing wind
        # sweeps must increase phi strictly.
        rng = np.random.default_rng(5)
        for _ in range(25):
            omega = rng.uniform(0.6, 1.1)
            lam_hi = rng.uniform(curve.lambda_zero + 0.2, curve.lambda_max)
            lam_lo = rng.uniform(curve.lambda_zero + 0.05, lam_hi)
            us = omega * params.rotor_radius / np.linspace(lam_hi, lam_lo, 10)
            vals = [phi(params, curve, omega, u) for u in us]
            assert all(a < b for a, b in zip(vals, vals[1:]))


class TestController:
    def test_quadratic_law(self):
        assert torque_controller(2.0, 3.0) == 18.0
        assert torque_controller(2.0, 6.0) == 4 * torque_controller(2.0, 3.0)

    def test_rejects_nonpositive(self):
        with pytest.raises(EnvelopeError):
            torque_controller(2.0, 0.0)
        with pytest.raises(ConfigError):
            torque_controller(-1.0, 3.0)

    def test_optimal_gain_settles_at_peak_tsr(self, params, curve):
        # Long closed-loop run at constant wind must settle where the
        # tip-speed ratio sits at the curve peak.
        k_opt = optimal_torque_gain(params, curve)
        u = 8.0
        w = 0.9 * curve.lambda_star * u / params.rotor_radius
        for _ in range(60000):
            t_g = torque_controller(k_opt, params.gear_ratio * w)
            w = rk4_plant_step(params, curve, w, t_g, u, 0.01)
        lam = w * params.rotor_radius / u
        assert lam == pytest.approx(curve.lambda_star, abs=1e-6)

    def test_steady_state_map_matches_peak(self, params, curve):
        k_opt = optimal_torque_gain(params, curve)
        for u in (5.0, 7.0, 9.0):
            w = steady_state_rotor_speed(params, curve, k_opt, u)
            assert w * params.rotor_radius / u == pytest.approx(
                curve.lambda_star, rel=1e-9)


class TestStepPlant:
    def test_equilibrium_fixed_point(self, params, curve):
        omega_r, u = 0.9, 8.0
        t_r = (phi(params, curve, omega_r, u)
               * params.gear_ratio * params.inertia_equivalent)
        state = PlantState(omega_r=omega_r, t=0.0)
        new = step_plant(params, curve, state, t_r / params.gear_ratio, u, 0.01)
        assert new.omega_r == pytest.approx(omega_r, abs=1e-13)
        assert new.t == 0.01

    def test_zero_torque_accelerates(self, params, curve):
        # Positive cp and no generator load: speed strictly increases.
        state = PlantState(omega_r=0.7, t=0.0)
        new = step_plant(params, curve, state, 0.0, 8.0, 0.01)
        assert new.omega_r > state.omega_r

    def test_dt_must_be_positive(self, params, curve):
        with pytest.raises(ConfigError):
            step_plant(params, curve, PlantState(0.9), 100.0, 8.0, 0.0)

    def test_integration_order_at_least_four(self, params, curve):
        # Step-halving (Richardson) estimate of the local order inside a
        # single polynomial piece of the interpolant, where the
        # right-hand side is smooth.
        u, t_g, w0 = 7.0, 25000.0, 0.8355
        def local_diff(dt):
            one = rk4_plant_step(params, curve, w0, t_g, u, dt)
            half = rk4_plant_step(
                params, curve,
                rk4_plant_step(params, curve, w0, t_g, u, dt / 2),
                t_g, u, dt / 2)
            return abs(one - half)
        d1, d2 = local_diff(0.25), local_diff(0.125)
        observed_order = math.log2(d1 / d2) - 1.0
        assert observed_order >= 4.0

    def test_derivative_consistent_with_torque_balance(self, params, curve):
        omega_r, u, t_g = 0.9, 8.0, 20000.0
        expected = (phi(params, curve, omega_r, u) / params.gear_ratio
                    - t_g / (params.gear_ratio * params.inertia_equivalent))
        assert plant_derivative(params, curve, omega_r, t_g, u) == expected
