"""Rotor-effective wind speed estimation with convergence certification.

Building blocks:

* :mod:`rews.cp_model` -- tabulated power coefficient and shape queries
* :mod:`rews.turbine` -- drivetrain constants, nonlinearity, plant, torque law
* :mod:`rews.estimators` -- internal-state, proportional, and PI estimators
* :mod:`rews.stability` -- sector bounds, forbidden circle, distance criterion
* :mod:`rews.harness` -- closed-loop scenarios, case studies, file emission
"""

from .cp_model import CpCurve, default_cp_curve, load_cp_curve, read_curve_csv
from .estimators import EstimatorConfig, EstimatorState, Family, init_estimator
from .harness import (Scenario, SimTrace, classify_trace, make_step_wind_scenario,
                      run_case_studies, run_scenario)
from .stability import (CircleSpec, SectorBounds, certify, circle_from_gains,
                        circle_from_sector, compute_sector_bounds,
                        distance_criterion, frequency_response,
                        max_stable_beta, max_stable_delay)
from .turbine import (PlantState, TurbineParams, default_turbine_params, phi,
                      phi_prime_u, step_plant, torque_controller)

__version__ = "0.1.0"
