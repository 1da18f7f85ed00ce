"""Assume/guarantee contract verification for discrete-time LTI systems.

Typical use::

    from lticontracts import fixtures, verify_perturbed
    system, contract = fixtures.leader_follower()
    report = verify_perturbed(system, contract, eps=1e-12)
    report.verdict   # "Verified"
"""

from .errors import EngineError, InputError, PreconditionError, ProjectionLimitError
from .lp import LinearProgram, LpOutcome, solve
from .model import (Box, Ellipsoid, LtiContract, PerturbedLtiSystem, PolytopeH, PolytopeV, Product, Singleton,
                    UnperturbedLtiSystem, nominal, refines_stepwise, to_unperturbed, validate)
from .numerics import Tolerances, observability_index, operator_norm, spectral_radius
from .polyhedra import PolyhedronH, PolyhedronV, extendability_check, inclusion_h, inclusion_v
from .robustify import build_tau_eps, robustified_contract, verify_perturbed
from .simulate import monitor, simulate
from .verify import VerificationReport, theta, verify, verify_with_iota

__version__ = "0.1.0"
