"""Residual generation, evaluation and benchmarking for fault detection on
discrete-time LTI stochastic systems."""
from .lti import (InversionError, KalmanSolution, RationalTransferFunction, SolverError, StateSpaceModel,
                  UnsupportedShapeError, ValidationError, eval_freq, solve_dare, spectral_radius, ss_to_tf)
from .signals import FaultSpec, NoiseRealization, SimulationRecord, gen_fault, gen_noise, simulate
from .residuals import (DigitalFilter, FilterSpec, ResidualSeries, apply_filter, design_butterworth,
                        residual_kf_statespace, residual_oe, residual_pe)
from .spectra import (PerfIndexReport, Spectrum, analytic_disturbance_spectrum, estimate_spectrum,
                      optimal_frequency, perf_index_freq, perf_index_time, band_limited_indices)
from .stattests import (DetectionOutcome, EvalSeries, Threshold, chi2_threshold, decide, estimate_moments,
                        eval_jkf, eval_t2, indicators, t2_threshold)
from .harness import (ExperimentConfig, MethodSpec, MonteCarloReport, emit_report, run_monte_carlo,
                      run_single)

__version__ = "0.1.0"
