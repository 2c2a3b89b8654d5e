"""Structured simplicial meshes on intervals and axis-aligned rectangles.

Nodes carry the exact boundary distance d(x) (computed from the domain
geometry, not from the mesh), elements carry precomputed P1 shape-function
gradients, volumes, barycenters and local stiffness blocks.  All downstream
quadrature is one-point barycentric, so singular weights d^e with e < 0 are
only ever evaluated at barycenters where d is strictly positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels


class InvalidDomainError(ValueError):
    pass


class EmptyInteriorError(ValueError):
    pass


@dataclass(frozen=True)
class Domain:
    """Axis-aligned domain: an interval (0, lengths[0]) or a rectangle
    (0, lengths[0]) x (0, lengths[1])."""

    kind: str  # "interval" or "rectangle"
    lengths: tuple

    def __post_init__(self):
        if self.kind not in ("interval", "rectangle"):
            raise InvalidDomainError(f"unknown domain kind {self.kind!r}")
        want = 1 if self.kind == "interval" else 2
        if len(self.lengths) != want:
            raise InvalidDomainError(
                f"{self.kind} needs {want} length(s), got {len(self.lengths)}"
            )
        if any(L <= 0 for L in self.lengths):
            raise InvalidDomainError("domain lengths must be positive")

    @property
    def dim(self):
        return len(self.lengths)

    def distance(self, points):
        """Exact distance to the boundary at arbitrary points, shape (n, dim)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = np.minimum(pts[:, 0], self.lengths[0] - pts[:, 0])
        for ax in range(1, self.dim):
            d = np.minimum(d, np.minimum(pts[:, ax], self.lengths[ax] - pts[:, ax]))
        return d


@dataclass
class Mesh:
    domain: Domain
    nodes: np.ndarray          # (n_nodes, dim)
    elements: np.ndarray       # (n_elems, npe) int64
    boundary_mask: np.ndarray  # (n_nodes,) bool
    dist: np.ndarray           # (n_nodes,) exact boundary distance
    volumes: np.ndarray = field(repr=False, default=None)
    gradop: np.ndarray = field(repr=False, default=None)      # (n_elems, npe, dim)
    barycenters: np.ndarray = field(repr=False, default=None)
    dist_bar: np.ndarray = field(repr=False, default=None)    # d at barycenters
    local_stiffness: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        npe = self.elements.shape[1]
        self.barycenters = self.nodes[self.elements].mean(axis=1)
        self.dist_bar = self.domain.distance(self.barycenters)
        if self.dim == 1:
            x = self.nodes[self.elements[:, :, None], 0]  # (ne, 2, 1)
            h = (x[:, 1, 0] - x[:, 0, 0])
            self.volumes = h
            self.gradop = np.empty((len(h), 2, 1))
            self.gradop[:, 0, 0] = -1.0 / h
            self.gradop[:, 1, 0] = 1.0 / h
        else:
            p0 = self.nodes[self.elements[:, 0]]
            p1 = self.nodes[self.elements[:, 1]]
            p2 = self.nodes[self.elements[:, 2]]
            det = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (
                p2[:, 0] - p0[:, 0]
            ) * (p1[:, 1] - p0[:, 1])
            self.volumes = 0.5 * np.abs(det)
            self.gradop = np.empty((len(det), 3, 2))
            # grad phi_i = rotated opposite edge / (2 area), signed by det
            self.gradop[:, 0, 0] = (p1[:, 1] - p2[:, 1]) / det
            self.gradop[:, 0, 1] = (p2[:, 0] - p1[:, 0]) / det
            self.gradop[:, 1, 0] = (p2[:, 1] - p0[:, 1]) / det
            self.gradop[:, 1, 1] = (p0[:, 0] - p2[:, 0]) / det
            self.gradop[:, 2, 0] = (p0[:, 1] - p1[:, 1]) / det
            self.gradop[:, 2, 1] = (p1[:, 0] - p0[:, 0]) / det
        self.local_stiffness = np.einsum(
            "eid,ejd,e->eij", self.gradop, self.gradop, self.volumes
        )
        self.interior_idx = np.flatnonzero(~self.boundary_mask)

    @property
    def dim(self):
        return self.nodes.shape[1]

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elems(self):
        return len(self.elements)

    def interpolate_at_barycenters(self, values):
        """Value of the P1 interpolant at element barycenters."""
        return np.asarray(values)[self.elements].mean(axis=1)

    def integrate(self, per_elem_values):
        """One-point barycentric quadrature of a per-element integrand."""
        return float(np.dot(np.asarray(per_elem_values), self.volumes))

    def node_max(self, per_elem_values):
        """Nodewise max of a per-element quantity over incident elements."""
        return _kernels.node_max_over_elements(
            np.ascontiguousarray(self.elements), np.ascontiguousarray(per_elem_values),
            self.n_nodes,
        )

    def h_min(self):
        """Smallest element size: segment length, or the leg of the
        structured right triangles."""
        v = float(np.min(self.volumes))
        return v if self.dim == 1 else float(np.sqrt(2.0 * v))


@dataclass
class ScalarField:
    """Nodal coefficients of a P1 field on a mesh."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.n_nodes,):
            raise ValueError("field length does not match node count")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")

    def interior(self):
        return self.values[self.mesh.interior_idx]

    def sup(self):
        return float(np.max(np.abs(self.values)))


@dataclass
class GradientField:
    """Per-element constant gradients of a P1 field."""

    mesh: Mesh
    vectors: np.ndarray  # (n_elems, dim)

    def magnitudes(self):
        return np.sqrt(np.einsum("ed,ed->e", self.vectors, self.vectors))

    def sup(self):
        return float(np.max(self.magnitudes())) if len(self.vectors) else 0.0

    def node_magnitudes(self):
        """Conservative nodewise gradient magnitude: max over incident elements."""
        return self.mesh.node_max(self.magnitudes())


def build_mesh(domain: Domain, resolution: int) -> Mesh:
    """Uniform mesh with `resolution` nodes per axis.

    Intervals become segments; rectangles are split into two triangles per
    grid cell along the lower-left to upper-right diagonal, except where
    that diagonal would create an all-boundary triangle.
    """
    if resolution < 3:
        raise InvalidDomainError("resolution must be at least 3 nodes per axis")
    if domain.dim == 1:
        (L,) = domain.lengths
        x = np.linspace(0.0, L, resolution)
        nodes = x[:, None]
        elements = np.column_stack(
            [np.arange(resolution - 1), np.arange(1, resolution)]
        ).astype(np.int64)
        boundary = np.zeros(resolution, dtype=bool)
        boundary[[0, -1]] = True
    else:
        a, b = domain.lengths
        n = resolution
        xs = np.linspace(0.0, a, n)
        ys = np.linspace(0.0, b, n)
        X, Y = np.meshgrid(xs, ys, indexing="xy")
        nodes = np.column_stack([X.ravel(), Y.ravel()])  # index = iy*n + ix
        ix = np.arange(n * n) % n
        iy = np.arange(n * n) // n
        boundary = (ix == 0) | (ix == n - 1) | (iy == 0) | (iy == n - 1)
        cells = []
        for cy in range(n - 1):
            base = cy * n
            for cx in range(n - 1):
                v00 = base + cx
                v10 = v00 + 1
                v01 = v00 + n
                v11 = v01 + 1
                # the default v00-v11 split must not strand a triangle with
                # all vertices on the boundary (no dof, and singular weights
                # cannot be paired with an interior value there); flip the
                # diagonal in the two offending corner cells
                if (boundary[v00] and boundary[v11]
                        and (boundary[v10] or boundary[v01])):
                    cells.append((v00, v10, v01))
                    cells.append((v10, v11, v01))
                else:
                    cells.append((v00, v10, v11))
                    cells.append((v00, v11, v01))
        elements = np.asarray(cells, dtype=np.int64)
    dist = domain.distance(nodes)
    dist[boundary] = 0.0  # exact zeros, no rounding residue
    return Mesh(domain=domain, nodes=nodes, elements=elements,
                boundary_mask=boundary, dist=dist)


def field_from_callable(mesh: Mesh, fn) -> ScalarField:
    return ScalarField(mesh, np.asarray(fn(mesh.nodes), dtype=float))


def gradient(u: ScalarField) -> GradientField:
    vecs = _kernels.element_gradients(
        np.ascontiguousarray(u.values),
        np.ascontiguousarray(u.mesh.elements),
        np.ascontiguousarray(u.mesh.gradop),
    )
    return GradientField(u.mesh, vecs)


def c1_norm(u: ScalarField) -> float:
    """Discrete C1 norm: max of the nodal sup norm and the element gradient
    sup norm."""
    return max(u.sup(), gradient(u).sup())


def bound_ratios(u: ScalarField) -> tuple:
    """(min, max) of u/d over interior nodes.

    The distance never vanishes on the interior node set, so the ratios are
    plain quotients; no limiting is involved.
    """
    idx = u.mesh.interior_idx
    if len(idx) == 0:
        raise EmptyInteriorError("mesh has no interior nodes")
    r = u.values[idx] / u.mesh.dist[idx]
    return float(np.min(r)), float(np.max(r))


def dump_field_csv(u: ScalarField, path):
    """Write nodes as CSV rows `x[,y],d,value`, lexicographically sorted by
    coordinates.  Floats use repr so the file round-trips exactly."""
    m = u.mesh
    order = _lex_order(m)
    with open(path, "w") as fh:
        cols = ["x", "y"][: m.dim] + ["d", "value"]
        fh.write(",".join(cols) + "\n")
        for i in order:
            coords = [repr(float(c)) for c in m.nodes[i]]
            fh.write(",".join(coords + [repr(float(m.dist[i])),
                                        repr(float(u.values[i]))]) + "\n")


def _lex_order(mesh: Mesh):
    """Node order sorted lexicographically by coordinates (x, then y)."""
    keys = tuple(mesh.nodes[:, ax] for ax in reversed(range(mesh.dim)))
    return np.lexsort(keys)
