"""Meshes, boundary charts, and normal field extensions for the domain zoo."""

from .domains import DomainError, DomainSpec
from .mesh import Mesh, MeshError, build_mesh
from .charts import Chart, ChartError, CoverageError, PartitionOfUnity, build_charts
from .extension import (
    CertificateError,
    NormalExtension,
    chart_blend_certified,
    extend_normal_charts,
    extend_normal_closed_form,
    mollify,
    square_normal_extension,
)
