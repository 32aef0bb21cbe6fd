"""First Robin p-Laplacian eigenvalue, bracketed by explicit certificates.

The package computes the lowest eigenvalue Lambda(alpha) of the p-Laplacian
with an attractive Robin boundary coupling by direct Rayleigh-quotient
minimization over piecewise-linear fields, and verifies the large-alpha
behaviour Lambda(alpha) ~ (1-p) alpha^{p/(p-1)} by squeezing the computed
values between an exponential-trial upper bound and a lower bound certified
by a mollified extension of the boundary normal field.
"""

from .bounds import (
    BoundsCertificate,
    lower_bound_value,
    sandwich_check,
    trace_inequality_residual,
    trial_quotient,
    upper_bound_value,
    young_split,
)
from .eigensolver import (
    SolveResult,
    SolverOptions,
    continuation_sweep,
    interval_general_p_oracle,
    interval_p2_oracle,
    radial_disk_oracle,
    solve_lambda,
)
from .functionals import (
    FunctionalBreakdown,
    ScalarField,
    boundary_mass,
    dirichlet_energy,
    divergence_identity_residual,
    rayleigh_gradient,
    rayleigh_quotient,
    volume_mass,
)
from .geometry.charts import Chart, PartitionOfUnity, build_charts
from .geometry.domains import DomainSpec
from .geometry.extension import (
    NormalExtension,
    chart_blend_certified,
    extend_normal_charts,
    extend_normal_closed_form,
    mollify,
    square_normal_extension,
)
from .geometry.mesh import Mesh, build_mesh
from .harness.sweep import RunConfig, SweepRecord, alpha_sweep, corner_demo, emit, fit_ratio

__version__ = "0.1.0"
