import json

import numpy as np
import pytest

from rews.estimators import EstimatorConfig, Family
from rews.exceptions import ConfigError
from rews.harness import (CASE_STUDIES, Scenario, SimTrace, case_study_circle,
                          classify_trace, emit_outputs,
                          make_step_wind_scenario, read_trace_csv,
                          run_scenario, scenario_from_json, write_trace_csv)
from rews.stability import certify
from rews.cli import main as cli_main


def _scenario(**overrides):
    kwargs = dict(gamma=40.0, beta=10.0, delay_T=0.0,
                  wind_profile=[(0.0, 7.0)], duration=30.0)
    kwargs.update(overrides)
    return make_step_wind_scenario(**kwargs)


class TestScenarioValidation:
    def test_empty_profile_rejected(self):
        scn = _scenario()
        with pytest.raises(ConfigError, match="at least one"):
            Scenario(
                wind_profile=(), duration=scn.duration, dt=scn.dt,
                turbine=scn.turbine, curve=scn.curve,
                controller_gain=scn.controller_gain, estimator=scn.estimator,
                initial_omega_r=scn.initial_omega_r,
                initial_u_guess=scn.initial_u_guess)

    def test_first_segment_must_start_at_zero(self):
        with pytest.raises(ConfigError, match="t = 0"):
            _scenario(wind_profile=[(1.0, 7.0)])

    def test_segments_must_be_ordered(self):
        with pytest.raises(ConfigError, match="ordered"):
            _scenario(wind_profile=[(0.0, 5.0), (20.0, 7.0), (20.0, 9.0)])

    def test_wind_must_be_positive(self):
        with pytest.raises(ConfigError, match="positive"):
            _scenario(wind_profile=[(0.0, 5.0), (10.0, -7.0)])

    def test_last_segment_inside_run(self):
        with pytest.raises(ConfigError, match="after the run ends"):
            _scenario(wind_profile=[(0.0, 5.0), (30.0, 7.0)], duration=30.0)

    def test_estimator_grid_must_match(self):
        scn = _scenario()
        with pytest.raises(ConfigError, match="sample time"):
            Scenario(
                wind_profile=scn.wind_profile, duration=scn.duration,
                dt=scn.dt, turbine=scn.turbine, curve=scn.curve,
                controller_gain=scn.controller_gain,
                estimator=EstimatorConfig(family=Family.PI, gamma=40.0, dt=0.02),
                initial_omega_r=scn.initial_omega_r,
                initial_u_guess=scn.initial_u_guess)

    def test_wind_at_piecewise_lookup(self):
        scn = _scenario(wind_profile=[(0.0, 5.0), (10.0, 7.0)], duration=30.0)
        assert scn.wind_at(0.0) == 5.0
        assert scn.wind_at(9.99) == 5.0
        assert scn.wind_at(10.0) == 7.0
        assert scn.wind_at(29.0) == 7.0


class TestRunScenario:
    def test_record_count(self):
        scn = _scenario(duration=30.0)
        trace = run_scenario(scn)
        assert len(trace) == int(round(30.0 / scn.dt)) + 1
        assert trace.t[0] == 0.0
        assert trace.t[-1] == pytest.approx(30.0)

    def test_first_estimate_is_the_guess(self):
        scn = _scenario()
        trace = run_scenario(scn)
        assert trace.u_hat[0] == pytest.approx(scn.initial_u_guess, rel=1e-12)

    def test_divergence_guard_stops_early(self):
        scn = make_step_wind_scenario(
            100.0, 200.0, 0.3,
            wind_profile=[(0.0, 5.0), (30.0, 7.0), (60.0, 9.0)],
            duration=120.0)
        trace = run_scenario(scn)
        assert trace.stopped_early
        assert trace.stop_time is not None and trace.stop_time < 120.0
        assert len(trace) < scn.n_steps() + 1
        assert classify_trace(trace) == "diverged"

    def test_internal_state_family_has_no_observer_columns(self):
        scn = _scenario(family=Family.IANDI, beta=0.0)
        trace = run_scenario(scn)
        assert np.all(np.isnan(trace.omega_hat_r))
        assert np.all(np.isnan(trace.eps))


class TestClassifier:
    def test_converged_label(self):
        trace = run_scenario(_scenario(duration=60.0))
        assert classify_trace(trace) == "converged"
        tail = trace.u_hat[-100:]
        assert np.max(np.abs(tail - trace.u_true[-100:])) < 0.05

    def test_oscillatory_label(self):
        # A long loop delay sustains a limit cycle without tripping the
        # divergence guard.
        scn = make_step_wind_scenario(
            40.0, 10.0, 1.4, wind_profile=[(0.0, 5.0), (30.0, 7.0)],
            duration=120.0)
        trace = run_scenario(scn)
        assert classify_trace(trace) == "oscillatory"
        assert not trace.stopped_early


class TestConcordance:
    def test_six_reference_configs(self):
        # Certification is sufficient, not necessary: every certified
        # configuration must simulate as converged; refusals carry no
        # simulation obligation.
        circle = case_study_circle()
        for name, gamma, beta, delay in CASE_STUDIES:
            verdict = certify(gamma, beta, delay, circle)
            if verdict.certified:
                trace = run_scenario(make_step_wind_scenario(gamma, beta, delay))
                assert classify_trace(trace) == "converged", name

    def test_randomized_configs(self):
        circle = case_study_circle()
        rng = np.random.default_rng(1234)
        profile = [(0.0, 5.0), (100.0, 7.0)]
        certified_seen = 0
        for _ in range(20):
            gamma = rng.uniform(30.0, 100.0)
            beta = rng.uniform(0.0, 15.0)
            delay = 0.01 * rng.integers(0, 51)
            if not certify(gamma, beta, delay, circle).certified:
                continue
            certified_seen += 1
            trace = run_scenario(make_step_wind_scenario(
                gamma, beta, delay, wind_profile=profile, duration=200.0))
            assert classify_trace(trace) == "converged"
        assert certified_seen > 0


class TestSerialization:
    def test_trace_csv_round_trip_bit_exact(self, tmp_path):
        trace = run_scenario(_scenario(family=Family.IANDI, beta=0.0,
                                       duration=5.0))
        path = tmp_path / "trace.csv"
        write_trace_csv(trace, path)
        data = read_trace_csv(path)
        for name in ("t", "u_true", "omega_r", "omega_hat_r", "eps",
                     "u_hat", "t_g", "clamp_count"):
            assert np.array_equal(data[name], getattr(trace, name),
                                  equal_nan=True), name

    def test_trace_csv_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ConfigError, match="header"):
            read_trace_csv(path)

    def test_empty_trace_refused(self, tmp_path):
        trace = run_scenario(_scenario(duration=5.0))
        empty = SimTrace(
            scenario=trace.scenario,
            **{c: getattr(trace, c)[:0]
               for c in ("t", "u_true", "omega_r", "omega_hat_r", "eps",
                         "u_hat", "t_g", "clamp_count")})
        with pytest.raises(ConfigError):
            write_trace_csv(empty, tmp_path / "empty.csv")
        with pytest.raises(ConfigError):
            emit_outputs(empty, tmp_path / "empty")


class TestScenarioFromJson:
    def test_defaults(self):
        scn = scenario_from_json({
            "wind_profile": [[0.0, 5.0], [30.0, 7.0]],
            "duration": 60.0,
            "estimator": {"family": "pi", "gamma": 40.0, "beta": 10.0,
                          "delay": 0.3},
        })
        assert scn.dt == 0.01
        assert scn.estimator.gamma == 40.0
        assert scn.estimator.n_delay == 30
        # "steady" initial speed puts the plant at the peak tip-speed ratio.
        lam0 = scn.initial_omega_r * scn.turbine.rotor_radius / 5.0
        assert lam0 == pytest.approx(scn.curve.lambda_star, rel=1e-9)

    def test_explicit_initial_conditions(self):
        scn = scenario_from_json({
            "wind_profile": [[0.0, 7.0]],
            "duration": 30.0,
            "estimator": {"family": "p", "gamma": 40.0},
            "initial": {"omega_r": 0.8, "u_guess": 6.0},
        })
        assert scn.initial_omega_r == 0.8
        assert scn.initial_u_guess == 6.0
        assert scn.estimator.family is Family.EQUIV_P

    def test_malformed_rejected(self):
        with pytest.raises(ConfigError, match="malformed"):
            scenario_from_json({"duration": 30.0})


class TestEmitOutputs:
    def test_trace_artifacts(self, tmp_path):
        trace = run_scenario(_scenario(duration=5.0))
        out = tmp_path / "run"
        written = emit_outputs(trace, out, circle=case_study_circle())
        names = {p.split("/")[-1] for p in map(str, written)}
        assert names == {"trace.csv", "timeseries.svg", "rotor_speed.svg",
                         "nyquist.csv", "verdict.json", "nyquist.svg"}
        for p in written:
            assert (out / p.split("/")[-1]).exists()
        verdict = json.loads((out / "verdict.json").read_text())
        assert verdict["verdict"] in ("ConvergenceCertified", "NotCertified")

    def test_report_artifact(self, tmp_path):
        written = emit_outputs({"cases": []}, tmp_path / "rep")
        assert json.loads(open(written[0]).read()) == {"cases": []}


class TestReproducibility:
    def test_repeated_evaluation_is_identical(self):
        def once():
            scn = make_step_wind_scenario(40.0, 10.0, 0.3,
                                          wind_profile=[(0.0, 5.0), (30.0, 7.0)],
                                          duration=60.0)
            trace = run_scenario(scn)
            verdict = certify(40.0, 10.0, 0.3, case_study_circle())
            return trace, verdict
        t1, v1 = once()
        t2, v2 = once()
        assert np.array_equal(t1.u_hat, t2.u_hat)
        assert np.array_equal(t1.omega_r, t2.omega_r)
        assert v1 == v2


class TestCli:
    def test_simulate_command(self, tmp_path, capsys):
        spec = {
            "wind_profile": [[0.0, 5.0], [20.0, 7.0]],
            "duration": 40.0,
            "estimator": {"family": "pi", "gamma": 40.0, "beta": 10.0,
                          "delay": 0.3},
        }
        scn_path = tmp_path / "scenario.json"
        scn_path.write_text(json.dumps(spec))
        out = tmp_path / "out"
        rc = cli_main(["simulate", "--scenario", str(scn_path),
                       "--out", str(out)])
        assert rc == 0
        assert (out / "trace.csv").exists()
        assert "ConvergenceCertified" in capsys.readouterr().out

    def test_stability_command_exit_codes(self, tmp_path):
        out = tmp_path / "ok"
        assert cli_main(["stability", "--gamma", "40", "--beta", "10",
                         "--delay", "0.3", "--out", str(out),
                         "--require-certified"]) == 0
        out2 = tmp_path / "bad"
        assert cli_main(["stability", "--gamma", "100", "--beta", "10",
                         "--delay", "0.3", "--out", str(out2),
                         "--require-certified"]) == 2
        assert (out2 / "verdict.json").exists()

    def test_margins_command(self, capsys):
        assert cli_main(["margins", "--gamma", "40", "--delay", "0.3"]) == 0
        out = capsys.readouterr().out
        value = float(out.strip().rsplit(" ", 1)[-1])
        assert 12.0 <= value <= 16.0

    def test_bad_scenario_file_is_a_clean_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"duration": 10.0}))
        rc = cli_main(["simulate", "--scenario", str(bad),
                       "--out", str(tmp_path / "o")])
        assert rc == 1
        assert "error:" in capsys.readouterr().err
