"""Per-element hybrid operators: potential reconstruction, difference
operators, stabilization, local bilinear form, interpolation, seminorm.

Local unknowns on a cell T are a degree-k polynomial on T plus a degree-k
polynomial on each edge, laid out flat as [cell coeffs | edge coeffs in the
cell's edge order].  All matrices act on that layout and are expressed in
the orthonormal bases built per cell, so inner products of coefficients are
L2 inner products of the functions.

The stabilization penalizes the edge differences with weights
K_TF / d_TF, K_TF = K n_TF . n_TF and d_TF = |T| / |F|; on stretched cells
this weighting (rather than 1/h_F) is what keeps the bilinear form
uniformly equivalent to the local energy seminorm.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import SolverError
from .mesh.core import as_cell_view
from .poly import (
    CellBasis,
    EdgeBasis,
    Poly2D,
    cell_quadrature,
    cell_space_dim,
    check_spd,
    edge_quadrature,
)


@dataclass
class LocalDofVector:
    """Hybrid unknowns of one cell: cell coefficients + per-edge coefficients."""

    cell: np.ndarray
    edges: list

    @property
    def flat(self):
        return np.concatenate([self.cell] + list(self.edges))

    @classmethod
    def from_flat(cls, flat, n_cell, n_edges, k):
        flat = np.asarray(flat, dtype=float)
        cell = flat[:n_cell]
        edges = [flat[n_cell + i * (k + 1): n_cell + (i + 1) * (k + 1)]
                 for i in range(n_edges)]
        return cls(cell=cell, edges=edges)


class ElementContext:
    """Geometry, bases, quadratures and coupling matrices of one cell.

    Everything downstream (reconstruction, stabilization, loads, error
    norms) is assembled from the small dense matrices cached here.
    """

    def __init__(self, mesh_or_view, cell=None, K=None, k=0,
                 cell_exactness=None, edge_exactness=None):
        view = as_cell_view(mesh_or_view, cell)
        K = check_spd(np.eye(2) if K is None else K)
        self.view = view
        self.K = K
        self.k = k
        self.n_cell = cell_space_dim(k)
        self.n_rec = cell_space_dim(k + 1)
        self.n_edges = len(view.edges)
        self.n_loc = self.n_cell + self.n_edges * (k + 1)
        self.rule = cell_quadrature(
            view, exactness=2 * k + 3 if cell_exactness is None else cell_exactness)
        self.basis = CellBasis(view, k + 1, rule=self.rule)
        self.cell_vals = self.basis.eval(self.rule.points)
        self.cell_grads = self.basis.grad(self.rule.points)
        grads = self.cell_grads
        kgrads = grads @ K.T
        stiff = np.einsum("qid,qjd,q->ij", grads, kgrads, self.rule.weights)
        self.stiff = 0.5 * (stiff + stiff.T)

        eexa = 2 * k + 2 if edge_exactness is None else edge_exactness
        self.edge_rules = [edge_quadrature(ev, exactness=eexa)
                           for ev in view.edges]
        self.edge_bases = [EdgeBasis(ev, k) for ev in view.edges]
        # one basis evaluation over all edge points, then split per edge
        all_pts = np.vstack([r.points for r in self.edge_rules])
        all_vals = self.basis.eval(all_pts)
        all_grads = self.basis.grad(all_pts)
        nq = len(self.edge_rules[0])
        self.trace = []       # (k+1, n_rec): edge-basis coefficients of traces
        self.flux = []        # (k+1, n_rec): (mu_i, K grad b_j . n)_F
        self.flux_cell = []   # (n_rec, n_cell): (b_j, K grad b_i . n)_F
        self.k_tf = []
        self.d_tf = []
        for f, ev in enumerate(view.edges):
            erule = self.edge_rules[f]
            block = slice(f * nq, (f + 1) * nq)
            mu = self.edge_bases[f].eval(erule.points)
            cvals = all_vals[block]
            cflux = all_grads[block] @ (K @ ev.normal)
            wmu = erule.weights[:, None] * mu
            self.trace.append(wmu.T @ cvals)
            self.flux.append(wmu.T @ cflux)
            self.flux_cell.append(cflux.T @ (erule.weights[:, None]
                                             * cvals[:, : self.n_cell]))
            self.k_tf.append(float(ev.normal @ K @ ev.normal))
            self.d_tf.append(ev.d_tf)

    # -- local operators ---------------------------------------------------

    def reconstruction(self):
        """Potential reconstruction matrix P: U_T -> P^{k+1}(T), and
        G = P^t (K-stiffness) P.

        P v solves (K grad p, grad w)_T = (K grad v_T, grad w)_T
        + sum_F (v_F - v_T, K grad w . n_TF)_F for all w of degree k+1,
        with the mean of p matching the mean of v_T.
        """
        n1, nk, kk = self.n_rec, self.n_cell, self.k
        rhs = np.zeros((n1, self.n_loc))
        rhs[:, :nk] = self.stiff[:, :nk]
        off = nk
        for f in range(self.n_edges):
            rhs[:, :nk] -= self.flux_cell[f]
            rhs[:, off: off + kk + 1] = self.flux[f].T
            off += kk + 1
        P = np.zeros((n1, self.n_loc))
        P[0, 0] = 1.0  # mean condition in the orthonormal (constant-first) basis
        try:
            P[1:] = np.linalg.solve(self.stiff[1:, 1:], rhs[1:])
        except np.linalg.LinAlgError as exc:
            raise SolverError(
                f"singular reconstruction system on cell {self.view.index}"
            ) from exc
        G = P.T @ self.stiff @ P
        return P, 0.5 * (G + G.T)

    def difference_ops(self, P):
        """Difference operators from hybrid unknowns to cell/edge polynomials.

        delta_T v = pi_T^k(P v - v_T); delta_TF v = pi_F^k(P v - v_F).
        The cell projection is a truncation thanks to the nested bases; the
        edge projections use the exact trace matrices.
        """
        nk, kk = self.n_cell, self.k
        d_cell = P[:nk].copy()
        d_cell[:, :nk] -= np.eye(nk)
        d_edges = []
        off = nk
        for f in range(self.n_edges):
            d = self.trace[f] @ P
            d[:, off: off + kk + 1] -= np.eye(kk + 1)
            d_edges.append(d)
            off += kk + 1
        return d_cell, d_edges

    def jump_matrices(self, d_cell, d_edges):
        """Per-edge matrices of delta_TF - delta_T (in edge-basis coords)."""
        nk = self.n_cell
        return [d_edges[f] - self.trace[f][:, :nk] @ d_cell
                for f in range(self.n_edges)]

    def stabilization(self, d_cell, d_edges):
        """S v.w = sum_F (K_TF / d_TF) (delta_TF v - delta_T v, ...)_F."""
        S = np.zeros((self.n_loc, self.n_loc))
        for f, jump in enumerate(self.jump_matrices(d_cell, d_edges)):
            S += (self.k_tf[f] / self.d_tf[f]) * (jump.T @ jump)
        return 0.5 * (S + S.T)

    def operator_set(self):
        P, G = self.reconstruction()
        d_cell, d_edges = self.difference_ops(P)
        jumps = self.jump_matrices(d_cell, d_edges)
        S = np.zeros((self.n_loc, self.n_loc))
        weights = []
        for f, jump in enumerate(jumps):
            w = self.k_tf[f] / self.d_tf[f]
            weights.append(w)
            S += w * (jump.T @ jump)
        S = 0.5 * (S + S.T)
        return LocalOperatorSet(
            k=self.k, n_cell=self.n_cell, n_rec=self.n_rec,
            P=P, G=G, S=S, A=G + S,
            delta_cell=d_cell, delta_edges=tuple(d_edges),
            jumps=tuple(jumps), stab_weights=tuple(weights), ctx=self,
        )

    # -- interpolation and loads --------------------------------------------

    def interpolate(self, v):
        """Componentwise L2 projections of ``v`` (local interpolator)."""
        cell = self.cell_vals[:, : self.n_cell].T @ (self.rule.weights
                                                     * v(self.rule.points))
        edges = []
        for f in range(self.n_edges):
            erule = self.edge_rules[f]
            mu = self.edge_bases[f].eval(erule.points)
            edges.append(mu.T @ (erule.weights * v(erule.points)))
        return LocalDofVector(cell=cell, edges=edges)

    def load(self, values):
        """Cell moments (f, b_i)_T of source values at the quadrature points."""
        return self.cell_vals[:, : self.n_cell].T @ (self.rule.weights * values)

    def seminorm_matrix(self, K=None):
        """Gram matrix of the local energy seminorm on the flat layout.

        |v|^2 = ||K^1/2 grad v_T||_T^2 + sum_F (K_TF/d_TF) ||v_F - v_T||_F^2.
        Pass ``K`` to weight with a different tensor than the context's
        (the diffusion-independent discrete H1 norm uses the identity).
        """
        nk, kk = self.n_cell, self.k
        N = np.zeros((self.n_loc, self.n_loc))
        if K is None:
            N[:nk, :nk] = self.stiff[:nk, :nk]
            k_tf = self.k_tf
        else:
            K = check_spd(K)
            grads = self.cell_grads[:, :nk, :]
            st = np.einsum("qid,qjd,q->ij", grads, grads @ K.T, self.rule.weights)
            N[:nk, :nk] = 0.5 * (st + st.T)
            k_tf = [float(ev.normal @ K @ ev.normal) for ev in self.view.edges]
        off = nk
        for f in range(self.n_edges):
            jump = np.zeros((kk + 1, self.n_loc))
            jump[:, :nk] = -self.trace[f][:, :nk]
            jump[:, off: off + kk + 1] = np.eye(kk + 1)
            N += (k_tf[f] / self.d_tf[f]) * (jump.T @ jump)
            off += kk + 1
        return 0.5 * (N + N.T)


@dataclass
class LocalOperatorSet:
    """All local matrices of one cell on the flat hybrid layout."""

    k: int
    n_cell: int
    n_rec: int
    P: np.ndarray
    G: np.ndarray
    S: np.ndarray
    A: np.ndarray
    delta_cell: np.ndarray
    delta_edges: tuple
    jumps: tuple
    stab_weights: tuple
    ctx: ElementContext

    @property
    def n_loc(self):
        return self.A.shape[0]

    def reconstruct(self, dofs):
        """Reconstructed degree-(k+1) polynomial of a flat DOF vector."""
        return Poly2D(self.ctx.basis, self.P @ np.asarray(dofs, dtype=float))

    def stabilization_energy(self, dofs):
        """s_T(v, v) evaluated through the edge jumps.

        Summing the squared jump norms avoids the cancellation a
        quadratic form against the assembled S cannot: the result is
        exactly zero-up-to-roundoff on interpolates of degree-(k+1)
        polynomials.
        """
        flat = dofs.flat if isinstance(dofs, LocalDofVector) else np.asarray(dofs)
        return float(sum(w * np.sum((jump @ flat) ** 2)
                         for w, jump in zip(self.stab_weights, self.jumps)))


# -- module-level operations (one cell at a time) ----------------------------


def elliptic_projector(v, degree, K, mesh_or_view, cell=None, grad_v=None):
    """Oblique elliptic projection of ``v`` onto degree-``degree`` polynomials.

    The projection p matches the K-weighted gradient inner products of
    ``v`` against all test polynomials and has the same mean over the cell.
    ``v`` may be a :class:`Poly2D` (its own gradient is used) or a callable
    paired with ``grad_v`` returning (n, 2) gradients.
    """
    view = as_cell_view(mesh_or_view, cell)
    K = check_spd(K)
    if isinstance(v, Poly2D) and grad_v is None:
        grad_v = v.grad
    if grad_v is None:
        raise ValueError("elliptic_projector needs gradients of v")
    rule = cell_quadrature(view, exactness=2 * degree + 3)
    basis = CellBasis(view, degree, rule=rule)
    grads = basis.grad(rule.points)
    kgv = grad_v(rule.points) @ K.T
    rhs = np.einsum("qid,qd,q->i", grads, kgv, rule.weights)
    stiff = np.einsum("qid,qjd,q->ij", grads, grads @ K.T, rule.weights)
    coeffs = np.zeros(basis.dim)
    vals = v.value(rule.points) if isinstance(v, Poly2D) else v(rule.points)
    coeffs[0] = np.sum(rule.weights * vals) / np.sqrt(view.area)
    if basis.dim > 1:
        coeffs[1:] = np.linalg.solve(stiff[1:, 1:], rhs[1:])
    return Poly2D(basis, coeffs)


def build_reconstruction(mesh_or_view, cell=None, K=None, k=0):
    """Potential reconstruction matrix P and consistency matrix G of a cell."""
    return ElementContext(mesh_or_view, cell, K=K, k=k).reconstruction()


def build_difference_ops(mesh_or_view, cell=None, K=None, k=0, P=None):
    """Difference-operator matrices (cell and per-edge) of a cell."""
    ctx = ElementContext(mesh_or_view, cell, K=K, k=k)
    if P is None:
        P, _ = ctx.reconstruction()
    return ctx.difference_ops(P)


def build_stabilization(mesh_or_view, cell=None, K=None, k=0, diff_ops=None):
    """Stabilization matrix S of a cell."""
    ctx = ElementContext(mesh_or_view, cell, K=K, k=k)
    if diff_ops is None:
        P, _ = ctx.reconstruction()
        diff_ops = ctx.difference_ops(P)
    return ctx.stabilization(*diff_ops)


def build_local_bilinear(mesh_or_view, cell=None, K=None, k=0):
    """Full :class:`LocalOperatorSet` (P, G, S, A and difference matrices)."""
    return ElementContext(mesh_or_view, cell, K=K, k=k).operator_set()


def interpolate_local(v, mesh_or_view, cell=None, k=0):
    """Local interpolator: cell and edge L2 projections of ``v``."""
    return ElementContext(mesh_or_view, cell, K=None, k=k).interpolate(v)


def local_seminorm(dofs, K, mesh_or_view, cell=None, k=0):
    """Local energy seminorm of a hybrid DOF vector (flat or structured)."""
    ctx = ElementContext(mesh_or_view, cell, K=K, k=k)
    flat = dofs.flat if isinstance(dofs, LocalDofVector) else np.asarray(dofs)
    N = ctx.seminorm_matrix()
    return float(np.sqrt(max(flat @ N @ flat, 0.0)))


def condense_local(A, load, n_cell):
    """Schur complement of the cell block of a local matrix.

    Returns (cho, S_ff, rhs_f) with cho the Cholesky factor of the cell
    block, kept for back-substitution of the cell unknowns.
    """
    A_tt = A[:n_cell, :n_cell]
    A_tf = A[:n_cell, n_cell:]
    A_ff = A[n_cell:, n_cell:]
    try:
        cho = cho_factor(A_tt, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SolverError("non-SPD cell block during condensation") from exc
    Z = cho_solve(cho, np.column_stack([A_tf, load]), check_finite=False)
    S_ff = A_ff - A_tf.T @ Z[:, :-1]
    rhs_f = -A_tf.T @ Z[:, -1]
    return cho, 0.5 * (S_ff + S_ff.T), rhs_f
