"""escapesim: exact simulation and numerical analysis of boundary escape and
extinction in density-dependent Markov population processes."""

__version__ = "0.1.0"

from .model import (JumpSpec, ModelError, Monomial, PolynomialRate,
                    PopulationModel, StructureDecomposition, barebones,
                    drift, jacobian, linear_birth_death, load_model,
                    save_model, stochastic_logistic, structure_at,
                    two_type_symmetric, validate_model)
from .spectral import (SpectralData, SpectralError, StabilityReport,
                       matrix_exp, perron, spectral_data, stability_check)
from .simulate import (RngStream, SimulationError, StopSpec, StoppingTimes,
                       TrajectoryRecord, first_crossing, martingale_path,
                       simulate, simulate_truncated, state_at)
from .branching import (BranchingSpec, ExtinctionRecord, WEstimate,
                        birth_death_spec, convergence_diagnostics, estimate_W,
                        from_model, simulate_z, survival_probability)
from .flow import (EnvelopeFit, FlowTrajectory, IntegrationError, Timescales,
                   escape_point, integrate, lemma_envelopes, timescales,
                   voc_residual)
from .coupling import (CoupledRun, LRSample, TVEstimate, couple_run,
                       divergence_curve, logistic_lr, symmetric_gap_experiment,
                       tv_lower_from_lr)
from .stats import (FitError, GammaFit, GumbelFit, KSResult, fit_gamma,
                    fit_gumbel, gumbel_cdf, ks_statistic)
from .lab import (EscapeDelayResult, ExtinctionResult, ReplicaSummary,
                  ThreePhaseResult, escape_delay_experiment,
                  extinction_experiment, path_closeness_experiment,
                  three_phase_run)
