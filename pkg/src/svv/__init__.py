"""Sandwiched Volterra volatility: simulation, Markovian kernel approximation and hedging."""

__version__ = "0.1.0"

from ._accel import backend
from .approx import BernsteinBasis, OUBasis, as_kernel, bernstein_fit, bernstein_operator, ou_discretize
from .errors import AssumptionError, ConfigError, NumericalError, SVVError
from .harness import RunReport, convergence_study, run, run_preset, validate_model
from .hedging import (
    HedgeEstimate,
    Payoff,
    RegressionModel,
    call,
    constant_claim,
    digital,
    hedge_objective,
    identity_claim,
    lsmc_fit,
    lsmc_hedge,
    nmc_conditional,
    nmc_hedge_path,
)
from .kernels import VolterraKernel, kernel_l2_distance, make_fractional_kernel, make_power_kernel
from .market import MarketSpec, JointPath, resume_joint, simulate_joint, simulate_paths
from .noise import TimeGrid, factor_model, sample_increments, uniform_grid, volterra_convolution
from .volatility import SandwichSpec, Profile, paper_sandwich, simulate_vol

__all__ = [
    "__version__", "backend",
    "BernsteinBasis", "OUBasis", "as_kernel", "bernstein_fit", "bernstein_operator", "ou_discretize",
    "AssumptionError", "ConfigError", "NumericalError", "SVVError",
    "RunReport", "convergence_study", "run", "run_preset", "validate_model",
    "HedgeEstimate", "Payoff", "RegressionModel", "call", "constant_claim", "digital", "hedge_objective",
    "identity_claim", "lsmc_fit", "lsmc_hedge", "nmc_conditional", "nmc_hedge_path",
    "VolterraKernel", "kernel_l2_distance", "make_fractional_kernel", "make_power_kernel",
    "MarketSpec", "JointPath", "resume_joint", "simulate_joint", "simulate_paths",
    "TimeGrid", "factor_model", "sample_increments", "uniform_grid", "volterra_convolution",
    "SandwichSpec", "Profile", "paper_sandwich", "simulate_vol",
]
