"""Discrete geometries: polar finite-volume disk and 1D interval.

Both meshes are cell-centered. The disk uses radial nodes r_i = (i - 1/2) h_r
(no node sits on the coordinate singularity r = 0) and angular nodes
theta_j = (j - 1/2) h_theta; bulk quadrature weights are the exact cell areas
r_i h_r h_theta, so constants integrate to pi R^2 exactly. The boundary circle
carries n_theta nodes with weights R h_theta. The interval (0, L) has n cells
of width h and a two-point boundary with unit weights.

The trace onto the boundary is linear extrapolation through the two outermost
cell centers of each normal ray, which is exact for fields affine in the
normal coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ShapeError
from .nonlinearity import NonlinearitySpec


@dataclass
class Mesh:
    geometry: str               # "disk" or "interval"
    bulk_points: np.ndarray     # (n_bulk, 2) cartesian positions
    bulk_weights: np.ndarray    # (n_bulk,) quadrature weights
    surface_points: np.ndarray  # (n_surf, 2)
    surface_weights: np.ndarray
    boundary_map: np.ndarray    # (n_surf, 2) bulk indices: outermost, next inner
    spacings: dict
    shape: tuple                # (n_r, n_theta) or (n,)
    extent: float               # R or L
    cache: dict = field(default_factory=dict, repr=False)   # assembled-operator memo

    @property
    def n_bulk(self) -> int:
        return self.bulk_weights.size

    @property
    def n_surface(self) -> int:
        return self.surface_weights.size

    def bulk_index(self, i: int, j: int = 0) -> int:
        """Flatten (radial, angular) to the bulk vector index (disk mode)."""
        if self.geometry == "disk":
            return i * self.shape[1] + j
        return i

    def check_bulk(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n_bulk,):
            raise ShapeError(f"bulk field has shape {values.shape}, expected ({self.n_bulk},)")
        return values

    def check_surface(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n_surface,):
            raise ShapeError(
                f"surface field has shape {values.shape}, expected ({self.n_surface},)")
        return values

    def content_hash(self) -> str:
        import hashlib
        digest = hashlib.sha256()
        for arr in (self.bulk_points, self.bulk_weights,
                    self.surface_points, self.surface_weights):
            digest.update(np.ascontiguousarray(arr).tobytes())
        digest.update(self.geometry.encode())
        return digest.hexdigest()[:16]


def build_disk(radius: float = 1.0, n_r: int = 64, n_theta: int = 128) -> Mesh:
    if radius <= 0:
        raise ConfigurationError("disk radius must be positive")
    if n_r < 4 or n_theta < 4:
        raise ConfigurationError("disk mesh needs n_r >= 4 and n_theta >= 4")
    h_r = radius / n_r
    h_t = 2.0 * np.pi / n_theta
    r = (np.arange(n_r) + 0.5) * h_r
    theta = (np.arange(n_theta) + 0.5) * h_t
    rr, tt = np.meshgrid(r, theta, indexing="ij")
    points = np.column_stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()])
    weights = (rr * h_r * h_t).ravel()
    surf_points = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
    surf_weights = np.full(n_theta, radius * h_t)
    outer = (n_r - 1) * n_theta + np.arange(n_theta)
    inner = (n_r - 2) * n_theta + np.arange(n_theta)
    bmap = np.column_stack([outer, inner])
    return Mesh("disk", points, weights, surf_points, surf_weights, bmap,
                {"h_r": h_r, "h_theta": h_t}, (n_r, n_theta), radius)


def build_interval(length: float = 1.0, n: int = 64) -> Mesh:
    if length <= 0:
        raise ConfigurationError("interval length must be positive")
    if n < 4:
        raise ConfigurationError("interval mesh needs n >= 4")
    h = length / n
    x = (np.arange(n) + 0.5) * h
    points = np.column_stack([x, np.zeros(n)])
    weights = np.full(n, h)
    surf_points = np.array([[0.0, 0.0], [length, 0.0]])
    surf_weights = np.ones(2)
    bmap = np.array([[0, 1], [n - 1, n - 2]])
    return Mesh("interval", points, weights, surf_points, surf_weights, bmap,
                {"h": h}, (n,), length)


def build_mesh(geometry: str, **params) -> Mesh:
    if geometry == "disk":
        return build_disk(params.get("radius", 1.0),
                          params.get("n_r", 64), params.get("n_theta", 128))
    if geometry == "interval":
        return build_interval(params.get("length", 1.0), params.get("n", 64))
    raise ConfigurationError(f"unknown geometry {geometry!r}")


def integrate(mesh: Mesh, values, region: str = "bulk") -> float:
    if region == "bulk":
        return float(np.dot(mesh.bulk_weights, mesh.check_bulk(values)))
    if region == "surface":
        return float(np.dot(mesh.surface_weights, mesh.check_surface(values)))
    raise ConfigurationError(f"unknown region {region!r}")


def boundary_trace(mesh: Mesh, bulk_values) -> np.ndarray:
    """Extrapolate a bulk field to the boundary, second order along each ray.

    The boundary sits half a cell beyond the outermost center, so the linear
    extrapolation weights are 3/2 on the outermost cell and -1/2 on the next.
    """
    u = mesh.check_bulk(bulk_values)
    return 1.5 * u[mesh.boundary_map[:, 0]] - 0.5 * u[mesh.boundary_map[:, 1]]


def trace_weights(mesh: Mesh) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Index/coefficient form of the trace: (outer idx, inner idx, (c_out, c_in))."""
    return mesh.boundary_map[:, 0], mesh.boundary_map[:, 1], np.array([1.5, -0.5])


def normal_derivative(mesh: Mesh, bulk_values, surface_values, spec: NonlinearitySpec,
                      K: float, method: str = "robin_identity") -> np.ndarray:
    """Outward normal derivative of the bulk field on the boundary.

    robin_identity evaluates K^-1 (h(phi) - u|_G), the flux the boundary
    condition assigns; one_sided differentiates the trace extrapolant, a first
    order estimate independent of the boundary condition.
    """
    if K <= 0:
        raise ConfigurationError("K must be positive")
    u = mesh.check_bulk(bulk_values)
    if method == "robin_identity":
        phi = mesh.check_surface(surface_values)
        return (spec.eval("h", phi) - boundary_trace(mesh, u)) / K
    if method == "one_sided":
        step = mesh.spacings["h_r"] if mesh.geometry == "disk" else mesh.spacings["h"]
        return (u[mesh.boundary_map[:, 0]] - u[mesh.boundary_map[:, 1]]) / step
    raise ConfigurationError(f"unknown normal-derivative method {method!r}")
