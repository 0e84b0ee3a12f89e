"""Complementary two-controller tracking control.

A nominal controller handles tracking performance, a robust controller
handles disturbance attenuation, and a stable operator driven by the
observer residual fuses them so the loop keeps the nominal behaviour in
quiet conditions and the robust behaviour under disturbance, with no
trade-off between the two designs.  The package covers the state-space
fusion constructions, LQ-tracking and central H-infinity synthesis,
power-seminorm performance analysis, deterministic simulation, baseline
comparisons, and data-driven tuning of the fusion gain factor.
"""

__version__ = "0.1.0"

from .lti import (AssumptionReport, ControllerRealization, FrequencyGrid,
                  PlantModel, StabilizabilityReport, StateSpaceModel,
                  check_stabilizable_detectable, check_standard_assumptions,
                  exact_discretize, frequency_response, interconnect_feedback,
                  invariant_zeros, is_stable, spectral_abscissa)
from .signals import SignalChannel, SignalSpec, Sinusoid
from .riccati import (CareProblem, HinfDesign, LqtDesign, hinf_central,
                      hinf_gamma_min, lqt_minimal_cost, lqt_synthesize,
                      pick_observer_gain, solve_care)
from .youla import (CompositeController, CoprimeFactors, QRealization,
                    assemble_composite, build_q_general, build_q_shared,
                    build_q_static, left_coprime_factors,
                    verify_transfer_equality)
from .analysis import (ClosedLoopSystem, LemmaDecomposition,
                       assemble_closed_loop, decompose_lemma1, hinf_norm,
                       power_norm_response, power_norm_signal,
                       theorem1_decomposition, theorem2_bound,
                       worst_dependency)
from .sim import (CostReport, LoopController, SimulationTrace,
                  anticausal_feedforward, finite_horizon_cost, simulate,
                  trace_to_csv)
from .baselines import (DobcDesign, HinfTrackingDesign,
                        dobc_compensation_gain, dobc_synthesize,
                        hinf_tracking_synthesize, lqt_controller)
from .tuning import EsState, TuneTrace, alpha_stability_sweep, es_step, tune_alpha
from .benchmark import (PerformanceReport, build_mocc,
                        double_integrator_plant, emit_report, run_benchmark)
from .config import ScenarioConfig, load_config
