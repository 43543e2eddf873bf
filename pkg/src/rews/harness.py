"""Closed-loop scenarios: plant + quadratic torque law + estimator.

Runs piecewise-constant wind schedules, classifies the resulting
estimate traces, reproduces the six standard case studies, and emits
CSV/JSON/SVG artifacts.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import stability, svgplot
from .cp_model import CpCurve, default_cp_curve, read_curve_csv
from .estimators import EstimatorConfig, Family, init_estimator, step_estimator
from .exceptions import ConfigError
from .stability import CircleSpec, circle_from_gains, circle_from_sector
from .turbine import (TurbineParams, default_turbine_params, load_params_file,
                      optimal_torque_gain, rk4_plant_step,
                      steady_state_rotor_speed)

__all__ = [
    "Scenario",
    "SimTrace",
    "CaseResult",
    "run_scenario",
    "run_case_studies",
    "classify_trace",
    "case_study_circle",
    "default_sector_bounds",
    "make_step_wind_scenario",
    "scenario_from_json",
    "write_trace_csv",
    "read_trace_csv",
    "emit_outputs",
    "CASE_STUDIES",
]

# Sector slopes behind the standard case-study circle (fixed constants so
# the verdicts do not depend on the locally chosen operating envelope).
CASE_STUDY_K1 = 0.016
CASE_STUDY_K2 = 0.095

# Estimate magnitude beyond which a run is cut short and marked diverged.
DIVERGENCE_GUARD = 1e3

# Trace classification thresholds (implementation choices, echoed in the
# report header): a wind segment counts as settled when the estimate
# stays within SETTLE_TOL of the true speed over its final 20%; a run
# counts as diverged when trailing window peak-to-peak amplitudes grow
# strictly over the last DIVERGE_WINDOWS windows of the final segment
# and end above the settle tolerance.
SETTLE_TOL = 0.05       # m/s
SETTLE_FRACTION = 0.2
DIVERGE_WINDOWS = 3
_SEGMENT_WINDOWS = 6

CASE_STUDIES = [
    ("case1", 40.0, 10.0, 0.3),
    ("case2", 100.0, 10.0, 0.3),
    ("case3", 100.0, 200.0, 0.3),
    ("case4", 40.0, 10.0, 0.3),
    ("case5", 40.0, 10.0, 0.6),
    ("case6", 40.0, 10.0, 2.0),
]

_STEP_WIND = [(0.0, 5.0), (150.0, 7.0), (300.0, 9.0)]
_STEP_DURATION = 450.0
_DEFAULT_DT = 0.01
_DEFAULT_U_GUESS = 8.0


@dataclass(frozen=True)
class Scenario:
    wind_profile: tuple          # ((t_start, U), ...) time-ordered, first at 0
    duration: float              # s
    dt: float                    # s, shared plant/estimator grid
    turbine: TurbineParams
    curve: CpCurve
    controller_gain: float       # K of the quadratic torque law, N m s^2
    estimator: EstimatorConfig
    initial_omega_r: float       # rad/s
    initial_u_guess: float       # m/s

    def __post_init__(self):
        profile = tuple((float(t), float(u)) for t, u in self.wind_profile)
        object.__setattr__(self, "wind_profile", profile)
        if not profile:
            raise ConfigError("wind profile must contain at least one segment")
        if profile[0][0] != 0.0:
            raise ConfigError("first wind segment must start at t = 0")
        starts = [t for t, _ in profile]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ConfigError("wind segments must be strictly time-ordered")
        if any(u <= 0 for _, u in profile):
            raise ConfigError("wind speeds must be positive")
        if self.duration <= 0 or self.dt <= 0:
            raise ConfigError("duration and dt must be positive")
        if starts[-1] >= self.duration:
            raise ConfigError("last wind segment starts after the run ends")
        if abs(self.estimator.dt - self.dt) > 1e-12:
            raise ConfigError("estimator sample time must match the plant grid")
        if self.controller_gain <= 0:
            raise ConfigError("controller gain must be positive")
        if self.initial_omega_r < self.turbine.omega_r_min:
            raise ConfigError("initial rotor speed below the lower bound")

    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    def wind_at(self, t: float) -> float:
        u = self.wind_profile[0][1]
        for t_start, value in self.wind_profile:
            if t_start <= t:
                u = value
            else:
                break
        return u


@dataclass
class SimTrace:
    """Uniform-grid record of one closed-loop run."""

    scenario: Scenario
    t: np.ndarray
    u_true: np.ndarray
    omega_r: np.ndarray
    omega_hat_r: np.ndarray   # NaN for the internal-state family
    eps: np.ndarray           # omega_r - omega_hat_r; NaN when undefined
    u_hat: np.ndarray
    t_g: np.ndarray
    clamp_count: np.ndarray   # cumulative feedback-path envelope clamps
    stopped_early: bool = False
    stop_time: float = None

    def __len__(self):
        return self.t.size


def run_scenario(scn: Scenario) -> SimTrace:
    """Co-simulate plant (RK4) and estimator (Euler) on the shared grid.

    Estimator divergence is recorded, not raised: the run stops early
    only when the estimate exceeds the divergence guard or goes
    non-finite, and the stop time is kept on the trace.
    """
    params, curve, config = scn.turbine, scn.curve, scn.estimator
    n = scn.n_steps()
    dt = scn.dt
    k_gain = scn.controller_gain
    gear = params.gear_ratio

    # Wind per step, resolved once.
    times = np.arange(n + 1) * dt
    u_arr = np.empty(n + 1)
    seg = 0
    profile = scn.wind_profile
    for k in range(n + 1):
        while seg + 1 < len(profile) and profile[seg + 1][0] <= times[k]:
            seg += 1
        u_arr[k] = profile[seg][1]

    omega = np.empty(n + 1)
    omega_hat = np.full(n + 1, np.nan)
    eps = np.full(n + 1, np.nan)
    u_hat = np.empty(n + 1)
    t_g = np.empty(n + 1)
    clamps = np.zeros(n + 1)

    state = init_estimator(config, scn.initial_omega_r, scn.initial_u_guess)
    w = scn.initial_omega_r
    has_observer = config.family is not Family.IANDI
    stopped = False
    stop_time = None
    last = n

    for k in range(n + 1):
        u = u_arr[k]
        tg = k_gain * (gear * w) ** 2
        omega[k] = w
        t_g[k] = tg
        if has_observer:
            omega_hat[k] = state.omega_hat_r
            eps[k] = w - state.omega_hat_r
        state, uh = step_estimator(params, curve, state, w, tg, config)
        u_hat[k] = uh
        clamps[k] = state.clamp_count
        if not math.isfinite(uh) or abs(uh) > DIVERGENCE_GUARD:
            stopped = True
            stop_time = times[k]
            last = k
            break
        if k < n:
            w = rk4_plant_step(params, curve, w, tg, u, dt)

    sl = slice(0, last + 1)
    return SimTrace(
        scenario=scn,
        t=times[sl],
        u_true=u_arr[sl],
        omega_r=omega[sl],
        omega_hat_r=omega_hat[sl],
        eps=eps[sl],
        u_hat=u_hat[sl],
        t_g=t_g[sl],
        clamp_count=clamps[sl],
        stopped_early=stopped,
        stop_time=stop_time,
    )


def _segment_slices(trace: SimTrace):
    starts = [t for t, _ in trace.scenario.wind_profile]
    bounds = starts[1:] + [trace.scenario.duration]
    t = trace.t
    for i, (t0, t1) in enumerate(zip(starts, bounds)):
        if i == len(starts) - 1:
            idx = np.nonzero((t >= t0 - 1e-12) & (t <= t1 + 1e-12))[0]
        else:
            idx = np.nonzero((t >= t0 - 1e-12) & (t < t1 - 1e-12))[0]
        if idx.size:
            yield idx


def classify_trace(trace: SimTrace) -> str:
    """One of 'converged', 'oscillatory', 'diverged'.

    Precedence: divergence first (guard trip, or strictly growing
    trailing peak-to-peak windows at the end of the run), then the
    per-segment settling test, else oscillatory.
    """
    if trace.stopped_early:
        return "diverged"

    segments = list(_segment_slices(trace))
    if not segments:
        return "oscillatory"

    # Trailing window growth on the final segment.
    tail_idx = segments[-1]
    windows = np.array_split(tail_idx, _SEGMENT_WINDOWS)
    p2p = [float(np.ptp(trace.u_hat[w])) for w in windows if w.size > 1]
    if len(p2p) >= DIVERGE_WINDOWS:
        tail = p2p[-DIVERGE_WINDOWS:]
        if all(a < b for a, b in zip(tail, tail[1:])) and tail[-1] > SETTLE_TOL:
            return "diverged"

    settled = True
    for idx in segments:
        tail = idx[int(math.ceil(idx.size * (1.0 - SETTLE_FRACTION))):]
        if tail.size == 0:
            settled = False
            break
        dev = np.max(np.abs(trace.u_hat[tail] - trace.u_true[tail]))
        if dev >= SETTLE_TOL:
            settled = False
            break
    return "converged" if settled else "oscillatory"


def case_study_circle() -> CircleSpec:
    """Forbidden disk from the fixed case-study sector slopes."""
    return circle_from_gains(CASE_STUDY_K1, CASE_STUDY_K2)


def default_sector_bounds(params: TurbineParams, curve: CpCurve,
                          k_opt: float = None) -> stability.SectorBounds:
    """Sector bounds over the default below-rated operating envelope.

    Wind 4..11 m/s; rotor speed range from the torque law's steady-state
    map at the envelope edges; 200x200 grid.
    """
    if k_opt is None:
        k_opt = optimal_torque_gain(params, curve)
    w_lo = steady_state_rotor_speed(params, curve, k_opt, 4.0)
    w_hi = steady_state_rotor_speed(params, curve, k_opt, 11.0)
    return stability.compute_sector_bounds(
        params, curve, (w_lo, w_hi), (4.0, 11.0), grid_n=200)


def make_step_wind_scenario(gamma: float, beta: float, delay_T: float,
                            family: Family = Family.PI,
                            params: TurbineParams = None,
                            curve: CpCurve = None,
                            wind_profile=None,
                            duration: float = _STEP_DURATION,
                            dt: float = _DEFAULT_DT,
                            u_guess: float = _DEFAULT_U_GUESS) -> Scenario:
    """Stepwise-wind scenario with fixture defaults (5/7/9 m/s levels)."""
    params = params or default_turbine_params()
    curve = curve or default_cp_curve()
    profile = tuple(wind_profile or _STEP_WIND)
    k_opt = optimal_torque_gain(params, curve)
    omega0 = steady_state_rotor_speed(params, curve, k_opt, profile[0][1])
    return Scenario(
        wind_profile=profile,
        duration=duration,
        dt=dt,
        turbine=params,
        curve=curve,
        controller_gain=k_opt,
        estimator=EstimatorConfig(family=family, gamma=gamma, beta=beta,
                                  delay_T=delay_T, dt=dt),
        initial_omega_r=omega0,
        initial_u_guess=u_guess,
    )


@dataclass(frozen=True)
class CaseResult:
    name: str
    config: EstimatorConfig
    certified: bool
    min_distance: float
    argmin_omega: float
    sim_label: str
    concordant: bool
    clamp_count: int
    stopped_early: bool

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "family": self.config.family.value,
            "gamma": self.config.gamma,
            "beta": self.config.beta,
            "delay": self.config.delay_T,
            "certified": self.certified,
            "min_distance": self.min_distance,
            "argmin_omega": self.argmin_omega,
            "sim_label": self.sim_label,
            "concordant": self.concordant,
            "clamp_count": self.clamp_count,
            "stopped_early": self.stopped_early,
        }


def _evaluate_case(name: str, scn: Scenario, circle: CircleSpec,
                   keep_traces: dict = None) -> CaseResult:
    trace = run_scenario(scn)
    label = classify_trace(trace)
    verdict = stability.certify(scn.estimator.gamma, scn.estimator.beta,
                                scn.estimator.delay_T, circle)
    result = CaseResult(
        name=name,
        config=scn.estimator,
        certified=verdict.certified,
        min_distance=verdict.min_distance,
        argmin_omega=verdict.argmin_omega,
        sim_label=label,
        concordant=not (verdict.certified and label != "converged"),
        clamp_count=int(trace.clamp_count[-1]),
        stopped_early=trace.stopped_early,
    )
    if keep_traces is not None:
        keep_traces[name] = trace
    return result


def run_case_studies(out_dir=None) -> dict:
    """Run the six gain/delay case studies plus the PI-vs-proportional
    comparison; return a structured report, optionally emitting files."""
    circle = case_study_circle()
    traces: dict = {}

    cases = [
        _evaluate_case(name, make_step_wind_scenario(g, b, t), circle, traces)
        for name, g, b, t in CASE_STUDIES
    ]
    comparison = [
        _evaluate_case("pi_gamma80", make_step_wind_scenario(80.0, 4.0, 0.3),
                       circle, traces),
        _evaluate_case("iandi_gamma80",
                       make_step_wind_scenario(80.0, 0.0, 0.3,
                                               family=Family.IANDI),
                       circle, traces),
    ]

    beta_margin = stability.max_stable_beta(40.0, 0.3, circle)
    delay_margin = stability.max_stable_delay(40.0, 10.0, circle)
    case6 = next(c for c in cases if c.name == "case6")
    # Internal consistency: the margin search must agree with the fixed
    # delay verdict of case 6 (delay 2 s refused).
    margin_inconsistent = (delay_margin >= case6.config.delay_T
                           and not case6.certified)

    report = {
        "classifier": {
            "settle_tolerance_m_per_s": SETTLE_TOL,
            "settle_fraction": SETTLE_FRACTION,
            "divergence_windows": DIVERGE_WINDOWS,
            "divergence_guard_m_per_s": DIVERGENCE_GUARD,
        },
        "circle": {
            "k1": CASE_STUDY_K1,
            "k2": CASE_STUDY_K2,
            "C": circle.center,
            "R": circle.radius,
            "alpha": circle.alpha,
        },
        "cases": [c.as_dict() for c in cases],
        "gain_comparison": [c.as_dict() for c in comparison],
        "beta_margin": {"gamma": 40.0, "delay": 0.3, "value": beta_margin},
        "delay_margin": {"gamma": 40.0, "beta": 10.0, "value": delay_margin,
                         "inconsistent_with_case6": margin_inconsistent},
    }

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
        for name, trace in traces.items():
            emit_outputs(trace, os.path.join(out_dir, name), circle=circle)
    return report


# ---------------------------------------------------------------------------
# Serialization

_TRACE_COLUMNS = ["t", "u_true", "omega_r", "omega_hat_r", "eps",
                  "u_hat", "t_g", "clamp_count"]


def write_trace_csv(trace: SimTrace, path) -> None:
    """Full-precision trace CSV; re-reading reproduces the arrays bit-exactly."""
    if len(trace) == 0:
        raise ConfigError("refusing to write an empty trace")
    cols = [getattr(trace, c) for c in _TRACE_COLUMNS]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_TRACE_COLUMNS)
        for row in zip(*cols):
            writer.writerow([repr(float(v)) for v in row])


def read_trace_csv(path) -> dict:
    """Read a trace CSV back into named float arrays."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != _TRACE_COLUMNS:
            raise ConfigError(f"{path}: unexpected trace header {header}")
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.array(rows, dtype=float)
    if data.size == 0:
        raise ConfigError(f"{path}: empty trace")
    return {name: data[:, i] for i, name in enumerate(_TRACE_COLUMNS)}


def scenario_from_json(spec: dict) -> Scenario:
    """Build a scenario from the documented JSON schema."""
    try:
        profile = [(float(t), float(u)) for t, u in spec["wind_profile"]]
        duration = float(spec["duration"])
        dt = float(spec.get("dt", _DEFAULT_DT))
        est = spec["estimator"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed scenario: {exc}") from exc

    turbine = spec.get("turbine", "default")
    if turbine == "default":
        params = default_turbine_params()
    elif isinstance(turbine, dict):
        params = TurbineParams(**turbine)
    else:
        params = load_params_file(turbine)

    curve_spec = spec.get("cp_curve", "default")
    curve = default_cp_curve() if curve_spec == "default" else read_curve_csv(curve_spec)

    gain = spec.get("controller_gain", "optimal")
    k_opt = optimal_torque_gain(params, curve) if gain == "optimal" else float(gain)

    config = EstimatorConfig(
        family=Family(est.get("family", "pi")),
        gamma=float(est["gamma"]),
        beta=float(est.get("beta", 0.0)),
        delay_T=float(est.get("delay", 0.0)),
        dt=dt,
    )

    initial = spec.get("initial", {})
    omega0 = initial.get("omega_r", "steady")
    if omega0 == "steady":
        omega0 = steady_state_rotor_speed(params, curve, k_opt, profile[0][1])
    u_guess = float(initial.get("u_guess", _DEFAULT_U_GUESS))

    return Scenario(
        wind_profile=tuple(profile),
        duration=duration,
        dt=dt,
        turbine=params,
        curve=curve,
        controller_gain=k_opt,
        estimator=config,
        initial_omega_r=float(omega0),
        initial_u_guess=u_guess,
    )


def emit_outputs(obj, out_dir, circle: CircleSpec = None) -> list:
    """Write the artifacts for a trace or a case-study report.

    Traces produce ``trace.csv``, ``timeseries.svg`` and, with the
    estimator's gains, ``nyquist.csv`` / ``verdict.json`` /
    ``nyquist.svg``.  Reports produce ``report.json``.  Returns the
    written paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if isinstance(obj, SimTrace):
        if len(obj) == 0:
            raise ConfigError("refusing to emit an empty trace")
        scn = obj.scenario
        path = os.path.join(out_dir, "trace.csv")
        write_trace_csv(obj, path)
        written.append(path)

        path = os.path.join(out_dir, "timeseries.svg")
        series = [("U", obj.u_true), ("U_hat", obj.u_hat)]
        svgplot.line_chart(path, obj.t, series,
                           title="Wind speed estimate", xlabel="t [s]",
                           ylabel="wind speed [m/s]")
        written.append(path)

        path = os.path.join(out_dir, "rotor_speed.svg")
        series = [("omega_r", obj.omega_r)]
        if not np.all(np.isnan(obj.omega_hat_r)):
            series.append(("omega_hat_r", obj.omega_hat_r))
        svgplot.line_chart(path, obj.t, series,
                           title="Rotor speed", xlabel="t [s]",
                           ylabel="rotor speed [rad/s]")
        written.append(path)

        if circle is None:
            circle = circle_from_sector(
                default_sector_bounds(scn.turbine, scn.curve,
                                      scn.controller_gain))
        cfg = scn.estimator
        fr = stability.frequency_response(cfg.gamma, cfg.beta, cfg.delay_T,
                                          stability.default_omega_grid())
        verdict = stability.certify(cfg.gamma, cfg.beta, cfg.delay_T, circle)
        path = os.path.join(out_dir, "nyquist.csv")
        stability.export_nyquist_csv(fr, circle, path)
        written.append(path)
        path = os.path.join(out_dir, "verdict.json")
        stability.export_verdict_json(verdict, circle, path)
        written.append(path)
        path = os.path.join(out_dir, "nyquist.svg")
        svgplot.nyquist_chart(path, fr.g_values.real, fr.g_values.imag,
                              circle.center, circle.radius)
        written.append(path)
    elif isinstance(obj, dict):
        path = os.path.join(out_dir, "report.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=2)
            fh.write("\n")
        written.append(path)
    else:
        raise TypeError(f"cannot emit outputs for {type(obj)!r}")
    return written
