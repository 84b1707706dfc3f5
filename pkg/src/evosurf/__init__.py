"""Surface finite elements for Navier-Stokes flow on evolving closed surfaces."""
from .mesh import (
    CurvedMesh,
    ReferenceTriangulation,
    displace,
    load_mesh,
    load_mesh_sequence,
    make_icosphere,
    mesh_size,
)
from .quadrature import quadrature_rule
from .geometry import element_geometry, frame_at, integrate
from .fem import DiscreteField, ScalarSpace, build_space, interpolate, l2_norm, solve_direct

__version__ = "0.1.0"
