"""Simulation, likelihood evaluation and Bayesian fitting of discrete-time
individual-level models of infectious disease spread."""
from .errors import IlmError
from .model import (
    ContactNetworkSet,
    CovariateFormula,
    EpidemicEvents,
    ModelSpec,
    Population,
    build_design_matrix,
    linear_predictor,
    validate_spec,
)
from .simulator import SimulationControls, infection_probability, simulate_epidemic
from .likelihood import LikelihoodProblem, log_likelihood, reference_log_likelihood
from .inference import (
    Gamma,
    HalfNormal,
    MCMCControls,
    Uniform,
    dic,
    log_prior,
    run_mcmc,
    summarize_chain,
)
from .metrics import basic_reproduction_number, epidemic_curves, posterior_predict, spatial_snapshots
from .scenarios import load_scenario

__version__ = "0.1.0"
