"""Symmetric alpha-stable laws and the infinite-width limits of deep networks with stable weights."""

__version__ = "0.1.0"

from .errors import (ConfigurationError, DegenerateDataError, DeepStableError, EmptyInputError,
                     MomentDivergenceError, NumericalError, ParameterDomainError, ParseError,
                     ShapeError, UnsupportedRangeError)
from .streams import UniformStream
from .stable import (StableParams, estimate_scale, frac_abs_moment, sample_stable, stable_cdf,
                     stable_cf, stable_logpdf, stable_pdf)
from .spectral import (DiscreteSpectralMeasure, marginal_scale, multivariate_cf, projected_scale,
                       sample_multivariate, symmetrize)
from .netsim import (ActivationSpec, Envelope, NetworkConfig, forward_conditional, forward_network,
                     get_activation, validate_envelope)
from .recursion import (RecursionResult, gamma_recursion, gaussian_variance_recursion,
                        sigma_recursion)
from .stats import (FitReport, ecf_distance, empirical_cf, fit_gaussian, fit_stable_mle,
                    ks_distance, ks_two_sample, pit_histogram)

__all__ = [name for name in dir() if not name.startswith("_")]
