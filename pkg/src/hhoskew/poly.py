"""Polynomial bases and quadrature on polygonal cells and edges.

Cell bases are monomials in the cell's inertial frame (principal axes of
the second-moment matrix, each scaled by its standard deviation), then
orthonormalized by a Cholesky factorization of the mass matrix.  Plain
h_T-scaled monomials become catastrophically ill-conditioned on stretched
cells; the inertial frame keeps the Gram matrices uniformly conditioned at
any aspect ratio, so every later solve is against a near-identity.

Cell quadrature fans the cell into centroid triangles and places a
collapsed Gauss-Legendre x Gauss-Jacobi product rule on each one: positive
weights and exactness for any requested total degree.
"""

from functools import lru_cache

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.special import roots_jacobi

from .mesh.core import as_cell_view, polygon_second_moments


def check_spd(K):
    """Validate a symmetric positive definite 2x2 tensor."""
    K = np.asarray(K, dtype=float)
    if K.shape != (2, 2):
        raise ValueError("diffusion tensor must be 2x2")
    if abs(K[0, 1] - K[1, 0]) > 1e-12 * (1.0 + abs(K).max()):
        raise ValueError("diffusion tensor must be symmetric")
    # 2x2 SPD iff trace and determinant are positive
    if K[0, 0] + K[1, 1] <= 0.0 or K[0, 0] * K[1, 1] - K[0, 1] * K[1, 0] <= 0.0:
        raise ValueError("diffusion tensor has a non-positive eigenvalue")
    return K


class QuadRule:
    """Quadrature points (physical coordinates) and weights."""

    def __init__(self, points, weights, exactness):
        self.points = points
        self.weights = weights
        self.exactness = exactness

    def integrate(self, f):
        return float(self.weights @ f(self.points))

    def __len__(self):
        return len(self.weights)


@lru_cache(maxsize=None)
def _gauss_legendre(n):
    return np.polynomial.legendre.leggauss(n)


@lru_cache(maxsize=None)
def _reference_triangle_rule(exactness):
    """Product rule on the unit triangle (0,0)-(1,0)-(0,1).

    Collapses the square: x from Gauss-Jacobi(1,0) nodes (the weight
    absorbs the 1-x Jacobian), y = (1-x) t with t from Gauss-Legendre.
    """
    n = exactness // 2 + 1
    xj, wj = roots_jacobi(n, 1.0, 0.0)
    xl, wl = _gauss_legendre(n)
    a = 0.5 * (xj + 1.0)
    t = 0.5 * (xl + 1.0)
    x = np.repeat(a, n)
    y = (1.0 - x) * np.tile(t, n)
    w = np.outer(wj / 4.0, wl / 2.0).ravel()
    return np.column_stack([x, y]), w


def cell_quadrature(mesh_or_view, cell=None, exactness=2):
    """Quadrature on a (star-shaped) cell, exact for total degree <= exactness.

    Fan triangulation from the centroid, one product rule per triangle.
    """
    view = as_cell_view(mesh_or_view, cell)
    if exactness < 0:
        raise ValueError("exactness must be >= 0")
    ref_pts, ref_w = _reference_triangle_rule(exactness)
    c = view.centroid
    e1 = view.points - c                      # (m, 2) fan-triangle legs
    e2 = np.roll(view.points, -1, axis=0) - c
    jac = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]  # 2 x areas, > 0 (CCW)
    out_pts = (c + ref_pts[None, :, 0, None] * e1[:, None, :]
               + ref_pts[None, :, 1, None] * e2[:, None, :]).reshape(-1, 2)
    out_w = (jac[:, None] * ref_w[None, :]).ravel()
    return QuadRule(out_pts, out_w, exactness)


def edge_quadrature(mesh_or_edge, edge=None, exactness=2):
    """Gauss-Legendre rule on an edge, exact for 1D degree <= exactness."""
    ev = _as_edge(mesh_or_edge, edge)
    n = exactness // 2 + 1
    x, w = _gauss_legendre(n)
    half = 0.5 * ev.length
    pts = ev.midpoint + np.outer(half * x, ev.tangent)
    return QuadRule(pts, w * half, exactness)


class _StandaloneEdge:
    __slots__ = ("midpoint", "tangent", "length")

    def __init__(self, midpoint, tangent, length):
        self.midpoint = midpoint
        self.tangent = tangent
        self.length = length


def _as_edge(mesh_or_edge, edge):
    if edge is None:
        return mesh_or_edge  # EdgeView or _StandaloneEdge
    mesh = mesh_or_edge
    a, b = mesh.edge_vertices[edge]
    length = float(mesh.edge_length[edge])
    tangent = (mesh.vertices[b] - mesh.vertices[a]) / length
    return _StandaloneEdge(mesh.edge_midpoint[edge], tangent, length)


def _cell_exponents(degree):
    return [(d - b, b) for d in range(degree + 1) for b in range(d + 1)]


def cell_space_dim(degree):
    return (degree + 1) * (degree + 2) // 2


class CellBasis:
    """Orthonormal polynomial basis of total degree <= ``degree`` on a cell.

    The first function is the constant 1/sqrt(|T|), and the orthonormalized
    basis of a lower degree is exactly a prefix of a higher-degree basis
    built on the same cell (nested monomials, nested Cholesky), which the
    local operators rely on for projections between degrees.
    """

    def __init__(self, view, degree, rule=None):
        if degree < 0:
            raise ValueError("degree must be >= 0")
        self.view = view
        self.degree = degree
        self.dim = cell_space_dim(degree)
        self.center = view.centroid
        if rule is None:
            rule = cell_quadrature(view, exactness=max(2, 2 * degree))
        self.frame = inertial_frame(view)
        self._frame_inv = np.linalg.inv(self.frame)
        self.exponents = np.array(_cell_exponents(degree))
        raw = self._raw_eval(rule.points)
        gram = raw.T @ (rule.weights[:, None] * raw)
        gram = 0.5 * (gram + gram.T)
        lower = cholesky(gram, lower=True, check_finite=False)
        # coefficients of the orthonormal functions in the monomial basis
        self.ortho = solve_triangular(lower, np.eye(self.dim), lower=True,
                                      check_finite=False)

    def _local_coords(self, points):
        return (points - self.center) @ self._frame_inv.T

    def _powers(self, t):
        out = np.empty((len(t), self.degree + 1))
        out[:, 0] = 1.0
        for p in range(1, self.degree + 1):
            out[:, p] = out[:, p - 1] * t
        return out

    def _raw_eval(self, points):
        xi = self._local_coords(points)
        px = self._powers(xi[:, 0])
        py = self._powers(xi[:, 1])
        return px[:, self.exponents[:, 0]] * py[:, self.exponents[:, 1]]

    def _raw_grad(self, points):
        xi = self._local_coords(points)
        px = self._powers(xi[:, 0])
        py = self._powers(xi[:, 1])
        a = self.exponents[:, 0]
        b = self.exponents[:, 1]
        dx = np.zeros((len(points), self.dim))
        dy = np.zeros((len(points), self.dim))
        nz = a > 0
        dx[:, nz] = a[nz] * px[:, a[nz] - 1] * py[:, b[nz]]
        nz = b > 0
        dy[:, nz] = b[nz] * px[:, a[nz]] * py[:, b[nz] - 1]
        grad_xi = np.stack([dx, dy], axis=-1)
        # chain rule: grad_x = frame^{-T} grad_xi
        return grad_xi @ self._frame_inv

    def eval(self, points):
        """Values, shape (npoints, dim)."""
        return self._raw_eval(points) @ self.ortho.T

    def grad(self, points):
        """Gradients, shape (npoints, dim, 2)."""
        raw = self._raw_grad(points)
        return np.einsum("qjd,ij->qid", raw, self.ortho)


@lru_cache(maxsize=None)
def _edge_ortho_reference(degree):
    """Orthonormalization of the scaled monomials on a unit-length edge.

    The monomial Gram on an edge is |F| times a degree-only matrix, so one
    Cholesky per degree serves every edge (scaled by 1/sqrt(|F|)).
    """
    idx = np.arange(degree + 1)
    gram = np.where((idx[:, None] + idx[None, :]) % 2 == 0,
                    1.0 / (idx[:, None] + idx[None, :] + 1.0), 0.0)
    lower = cholesky(gram, lower=True, check_finite=False)
    out = solve_triangular(lower, np.eye(degree + 1), lower=True,
                           check_finite=False)
    out.setflags(write=False)
    return out


class EdgeBasis:
    """Orthonormal 1D polynomial basis of degree <= ``degree`` on an edge.

    Scaled monomials (s / (|F|/2))^j in the signed arclength from the
    midpoint, orthonormalized through the analytic monomial Gram matrix.
    """

    def __init__(self, edge, degree):
        if degree < 0:
            raise ValueError("degree must be >= 0")
        self.degree = degree
        self.dim = degree + 1
        self.midpoint = edge.midpoint
        self.tangent = edge.tangent
        self.length = edge.length
        self.ortho = _edge_ortho_reference(degree) / np.sqrt(self.length)

    def parameter(self, points):
        return (points - self.midpoint) @ self.tangent / (0.5 * self.length)

    def eval(self, points):
        t = self.parameter(points)
        raw = np.empty((len(t), self.dim))
        raw[:, 0] = 1.0
        for p in range(1, self.dim):
            raw[:, p] = raw[:, p - 1] * t
        return raw @ self.ortho.T


def inertial_frame(view):
    """Deterministic per-cell scaling frame from the exact second moments.

    Columns are the principal directions scaled by the standard deviation
    along each; near-isotropic cells keep the axis-aligned frame so the
    eigenvector ambiguity of repeated eigenvalues never leaks into the
    basis, and eigenvector signs are pinned for the same reason.
    """
    cov = polygon_second_moments(view.points, view.centroid, view.area)
    lams, rot = np.linalg.eigh(cov)
    lams = np.maximum(lams, 1e-300)
    if lams[0] >= (1.0 - 1e-9) * lams[1]:
        return np.sqrt(np.sqrt(lams[0] * lams[1])) * np.eye(2)
    for col in range(2):
        lead = np.argmax(np.abs(rot[:, col]))
        if rot[lead, col] < 0.0:
            rot[:, col] = -rot[:, col]
    return rot @ np.diag(np.sqrt(lams))


class Poly2D:
    """Polynomial on a cell: basis plus coefficient vector."""

    def __init__(self, basis, coeffs):
        self.basis = basis
        self.coeffs = np.asarray(coeffs, dtype=float)

    def value(self, points):
        return self.basis.eval(points) @ self.coeffs

    def grad(self, points):
        return np.einsum("qid,i->qd", self.basis.grad(points), self.coeffs)

    __call__ = value


class Poly1D:
    """Polynomial on an edge: basis plus coefficient vector."""

    def __init__(self, basis, coeffs):
        self.basis = basis
        self.coeffs = np.asarray(coeffs, dtype=float)

    def value(self, points):
        return self.basis.eval(points) @ self.coeffs

    __call__ = value


def l2_project_cell(f, degree, mesh_or_view, cell=None, basis=None, rule=None):
    """L2-orthogonal projection of ``f`` onto degree-``degree`` cell polynomials.

    ``f`` is a callable on (n, 2) point arrays.  Returns a :class:`Poly2D`
    whose ``coeffs`` are the coefficients in the orthonormal cell basis.
    """
    view = as_cell_view(mesh_or_view, cell)
    if rule is None:
        rule = cell_quadrature(view, exactness=2 * degree + 3)
    if basis is None:
        basis = CellBasis(view, degree, rule=rule)
    vals = basis.eval(rule.points)
    coeffs = vals.T @ (rule.weights * f(rule.points))
    return Poly2D(basis, coeffs[: basis.dim])


def l2_project_edge(f, degree, mesh_or_edge, edge=None, basis=None, rule=None):
    """L2-orthogonal projection of ``f`` onto degree-``degree`` edge polynomials."""
    ev = _as_edge(mesh_or_edge, edge)
    if rule is None:
        rule = edge_quadrature(ev, exactness=2 * degree + 2)
    if basis is None:
        basis = EdgeBasis(ev, degree)
    vals = basis.eval(rule.points)
    coeffs = vals.T @ (rule.weights * f(rule.points))
    return Poly1D(basis, coeffs)


def weighted_stiffness(mesh_or_view, cell, K, basis_a, basis_b=None, rule=None):
    """Matrix of (K grad phi_j, grad psi_i)_T for two cell bases.

    Exact for the polynomial integrands when the rule's exactness covers
    degree(a) + degree(b) - 2.
    """
    view = as_cell_view(mesh_or_view, cell)
    K = check_spd(K)
    if basis_b is None:
        basis_b = basis_a
    if rule is None:
        rule = cell_quadrature(view, exactness=max(0, basis_a.degree + basis_b.degree - 2))
    ga = basis_a.grad(rule.points)
    gb = ga if basis_b is basis_a else basis_b.grad(rule.points)
    kgb = gb @ K.T
    return np.einsum("qid,qjd,q->ij", ga, kgb, rule.weights)


def edge_normal_flux_matrix(mesh_or_view, cell, edge, K, cell_basis, edge_basis,
                            rule=None):
    """Matrix of (mu_i, K grad phi_j . n_TF)_F on one edge of a cell.

    ``edge`` is the global edge id when a mesh is passed, or the local edge
    position when a :class:`CellView` is passed.
    """
    view = as_cell_view(mesh_or_view, cell)
    K = check_spd(K)
    ev = _cell_edge(view, edge)
    if rule is None:
        rule = edge_quadrature(ev, exactness=2 * max(cell_basis.degree,
                                                     edge_basis.degree) + 2)
    mu = edge_basis.eval(rule.points)
    flux = cell_basis.grad(rule.points) @ (K @ ev.normal)
    return mu.T @ (rule.weights[:, None] * flux)


def _cell_edge(view, edge):
    """Edge of a view by global id (mesh cells) or local position (standalone)."""
    for ev in view.edges:
        if ev.index == edge and ev.index >= 0:
            return ev
    if 0 <= edge < len(view.edges) and view.edges[edge].index < 0:
        return view.edges[edge]
    raise ValueError(f"edge {edge} is not incident to cell {view.index}")
