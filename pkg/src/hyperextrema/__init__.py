from .__version__ import __version__
from .coefficients import CoefficientMode
from .hyperreal import (GeneratorRegistry, Hyperreal, MagnitudeClass, ExponentOutOfBoundsError, RegistryMismatchError,
                        DivisionByZeroError, NotNearstandardError, make, add, sub, mul, div, magnitude_class,
                        standard_part, approx_eq, maior, menor, gg, ll, sqrt_abs)
from .tables import InteractionTable, interaction_table, REFERENCE_TABLES
from .expr import Expr, differentiate, nth_derivative
from .parser import parse, ExprSyntaxError, UnknownIdentifierError, ArityError
from .transcendental import EvaluationError
from .evaluation import (Point, PerturbedFn, OverrideError, evaluate, nth_derivative_at, partial_derivative_at,
                         gradient_at, st_function_value, st_derivative)
from .mucalc import (ProbeConfig, ProbeReport, Witness, SampleConstructionError, InapplicableChainRuleError,
                     s_continuity_probe, mu_increment_check, mvt_check, taylor_check, chain_rule_check,
                     derivative_s_continuity_probe, difference_quotient_probe)
from .extremum import (VerdictKind, Verdict, Candidate, CandidateSet, necessary_check, classify_1d, gradient_test,
                       find_candidates, st_oracle_classify, hessian_oracle_classify, sufficient_condition_probe,
                       classify_candidates)
from .check import Check, CheckDependency, CheckResult
from .suite import CheckSuite, SuiteResult, CheckNotFoundError, CircularDependencyError, DependencyNotFoundError
from .reproduction import build_reproduction_suite
from .config import Config, ConfigError
