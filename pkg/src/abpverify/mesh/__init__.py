"""Discrete domains, surfaces and curves with geometric operators."""

from .core import CurveMesh, DomainMesh, MeshError, SurfaceMesh, TriangleMesh, embed
from .io import MeshParseError, load_mesh, save_mesh
from .ops import (
    CurvatureData,
    QuadraticFit,
    boundary_integrate,
    cotan_laplacian,
    dual_area,
    curvature,
    face_to_vertex,
    gradient,
    hessian_recover,
    integrate,
    quadratic_fit,
    vertex_gradient,
)
from .shapes import SHAPES, builtin_shape

__all__ = [
    "CurvatureData", "CurveMesh", "DomainMesh", "MeshError", "MeshParseError",
    "QuadraticFit", "SHAPES", "SurfaceMesh", "TriangleMesh", "boundary_integrate",
    "builtin_shape", "cotan_laplacian", "curvature", "dual_area", "embed", "face_to_vertex",
    "gradient", "hessian_recover", "integrate", "load_mesh", "quadratic_fit",
    "save_mesh", "vertex_gradient",
]
