"""Zero-noise limits of one-dimensional ODEs with non-Lipschitz drift.

The package computes the small-noise limit law of ``dX = a(X) dt + eps dW``
analytically (scale functions, exit times, limit weights) and checks it
against an Euler--Maruyama Monte Carlo engine.
"""

__version__ = "0.1.0"

from zeronoise.dsl import (
    Drift,
    DriftSyntaxError,
    EvaluationSingularity,
    SignClassification,
    builtin_drift,
    builtin_example1,
    builtin_example2,
    classify_near_zero,
    drift_from_text,
    parse_drift,
)
from zeronoise.calculus import (
    Antiderivative,
    QuadratureResult,
    antiderivative_A,
    antiderivative_B,
    integrate,
    invert_monotone,
    osgood_integral,
)
from zeronoise.deterministic import ExtremalSolution, extremal_solution, residual
from zeronoise.analysis import (
    LimitLaw,
    ScaleFunction,
    approx_identity,
    exit_probability,
    expected_exit_time,
    green_function,
    limit_law,
    limit_weight,
    limit_weight_regvar,
    mu_function,
    scale_function,
    weight_p_eps,
)
from zeronoise.montecarlo import (
    EnsembleStats,
    SimConfig,
    coupled_comparison,
    em_path,
    empirical_cdf,
    hitting_time,
    perturbation_convergence_check,
    simulate_ensemble,
)

