"""Numerical checks of the logarithmic derivative of projection DPPs."""

__version__ = "0.1.0"

from .kernels import (BesselKernel, CustomKernel, DegenerateIntensityError, HermiteKernel,
                      IntegrableKernel, KernelDomainError, SineKernel, Window, check_assumption2,
                      eval_kernel, first_intensity, intensity_log_derivative, parse_kernel)
from .palm import PalmKernel, palm_kernel, palm_reduce
from .montecarlo import Estimate
from .sampler import (CampbellSample, Configuration, count_in, discretize, empirical_intensity,
                      sample_campbell, sample_dpp, sample_palm, spectral_sampler)
from .functionals import (CutoffSpec, GSpaceParams, TestFunction, additive, expected_additive,
                          g_distance, multiplicative, normalized_additive, normalized_multiplicative,
                          regularized_coulomb, regularized_coulomb_pair, tilde_multiplicative,
                          variance_norm)
from .logderiv import (STANDARD_PSI, LogDerivEstimate, RadonNikodymFactor, RegularizationSchedule,
                       dlnC_derivative, hermite_log_derivative, ibp_battery, ibp_test, log_derivative,
                       normalized_coulomb, radon_nikodym_factor, rn_difference_quotient_check)
from .dynamics import DiffusionConfig, DiffusionState, drift, run_diffusion, step
