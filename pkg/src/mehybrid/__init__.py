"""Failure-probability estimation with multi-element polynomial-chaos surrogates.

The package combines three ingredients: orthonormal Legendre expansions on
axis-aligned elements of the random domain, adaptive bisection of those
elements (variance-decay or energy-transfer driven), and hybrid Monte Carlo
estimators that spend exact-model evaluations only where the surrogate is
least trustworthy.
"""
from .errors import (
    DomainError,
    IntegrationError,
    ModelEvaluationError,
    RootSolveError,
    UnsupportedModelError,
)
from .estimator import (
    Estimate,
    HybridConfig,
    HybridTrace,
    direct_hybrid,
    iterative_hybrid,
    mc_estimate,
    mc_stddev,
    me_gha,
    me_lha,
    relative_error,
)
from .polybasis import (
    MultiIndex,
    QuadratureRule,
    TripleProductTensor,
    gauss_legendre,
    legendre,
    multi_index_set,
    orthonormal_legendre,
    tensor_basis_eval,
    triple_products,
)
from .randomspace import (
    Decomposition,
    Element,
    SampleSet,
    element_probability,
    locate,
    sample_uniform,
    split_element,
    to_global,
    to_local,
)
from .refine import (
    GalerkinState,
    PolynomialOde,
    RefinementConfig,
    adapt_dynamic,
    adapt_static,
    dynamic_indicator,
    galerkin_rhs,
    limit_state_surrogate,
    rk4_step,
    static_indicator,
    static_should_split,
)
from .surrogate import (
    GpcExpansion,
    LimitStateModel,
    MultiElementSurrogate,
    build_collocation,
    eval_expansion,
    eval_me_surrogate,
    gamma_bound,
    local_variance,
    lp_error,
)

__version__ = "0.1.0"
