"""koopfreq: frequency response of nonlinear plants under rotational forcing.

A plant dx/dt = F(x, u) driven by u(t) = u0 * exp(1j*omega*t) settles (when
stable) onto an orbit whose harmonic content defines order-n and 1/n-order
responses. This package estimates them three independent ways (harmonic
averaging, Abel-regularized Laplace residues, delay-embedded DMD), checks
the routes against each other and against closed-form references, and emits
Bode tables and figures. See the README for the CLI and file formats.
"""

from .bode import BodeRow, BodeTable, GridSpec, emit_csv, emit_svg, read_csv, sweep
from .dmd import DmdResult, EigenvalueNotFound, RankDeficient, hankel_dmd, mode_to_response
from .expr import (BadExponent, DivisionByZero, Expr, ParseError,
                   UnboundParameter, UnknownIdentifier, eval_grad, evaluate, parse)
from .lti import LtiPlant, SingularAtOmega, lti_response, random_stable_plant, skew_eigencheck
from .plantfile import PlantFileError, load_plant, parse_plant_text
from .reference import (DegenerateParameters, QuadraticCascade, closed_form_response,
                        eigenfunctions, kmd_reconstruct, lifted_system)
from .response import (CrossCheckReport, FreqResponse, MismatchedQuery, NotSteady,
                       OrderTag, PoleOrderSuspect, ScheduleTooCoarse,
                       TruncationDominated, WindowTooShort, abel_residue,
                       cross_check, estimate, harmonic_average)
from .sim import (NonFiniteState, PeriodicityReport, TooShort, Trajectory,
                  detect_periodicity, detect_steady_state, integrate)
from .system import PlantSpec, SkewSystem, apply_generator, augmented_field

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # expressions
    "Expr", "parse", "evaluate", "eval_grad",
    "ParseError", "UnknownIdentifier", "BadExponent", "DivisionByZero",
    "UnboundParameter",
    # systems
    "PlantSpec", "SkewSystem", "augmented_field", "apply_generator",
    # simulation
    "Trajectory", "PeriodicityReport", "integrate", "detect_periodicity",
    "detect_steady_state", "NonFiniteState", "TooShort",
    # responses
    "OrderTag", "FreqResponse", "CrossCheckReport", "harmonic_average",
    "abel_residue", "cross_check", "estimate", "NotSteady", "WindowTooShort",
    "ScheduleTooCoarse", "TruncationDominated", "PoleOrderSuspect",
    "MismatchedQuery",
    # closed forms
    "LtiPlant", "lti_response", "skew_eigencheck", "random_stable_plant",
    "SingularAtOmega", "QuadraticCascade", "DegenerateParameters",
    "closed_form_response", "eigenfunctions", "lifted_system", "kmd_reconstruct",
    # dmd
    "DmdResult", "hankel_dmd", "mode_to_response", "RankDeficient",
    "EigenvalueNotFound",
    # emitters
    "GridSpec", "BodeRow", "BodeTable", "sweep", "emit_csv", "read_csv",
    "emit_svg",
    # plant files
    "PlantFileError", "load_plant", "parse_plant_text",
]
