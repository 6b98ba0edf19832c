"""Rate functionals, capacity certificates and a bit-packed simulator for the
zero-temperature Hopfield model."""
from .capacity import (Certificate, CriticalPoint, DeltaWindow, Verdict, certify_theorem3,
                       critical_pair, delta_c_asym, delta_window, pstar_exponent,
                       theorem2_exponent, verify_paper_regions)
from .functional import (Branch, FunctionalValue, ModelParams, a_star, big_d, c_star, f0, f0_d,
                         f1_d)
from .saddle import (SaddleResult, derivative_table, inner_min, maximize_u, phi, phi0,
                     rate_exponent, solve_v)
from .specfun import EvalPolicy, gauss_tail, log_gauss_tail, mills_a, mills_a_prime, sup_x_a_neg

__version__ = "0.1.0"
