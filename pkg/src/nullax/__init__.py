"""Construction and numerical certification of null Lagrangians for Cosserat media."""

from .expr import FieldSpec, ScalarField, eval_jet, field_jet, parse
from .kinematics import gibbs_inverse, gibbs_rotation, stretch, wryness_closed_form
from .linearized import LinearTensors, check_null_conditions, el_residual_linear, generate_admissible
from .nulllag3d import (
    PotentialSet3D,
    StatePoint3D,
    assemble_lagrangian,
    assemble_P,
    build_coefficients,
    polyconvex_args3d,
    total_divergence_P,
)
from .shell import (
    PotentialSetShell,
    StatePointShell,
    assemble_lagrangian_shell,
    assemble_P_shell,
    build_coefficients_shell,
    polyconvex_args_shell,
)
from .tensor import axl, cof, det3, gibbs_cross, skew, wedge
from .variational import BumpField, el_residual, invariance_test, nullity_verdict, quadrature_functional

__version__ = "0.1.0"
