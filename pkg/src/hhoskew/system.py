"""Global system: DOF management, assembly with static condensation,
Dirichlet boundary handling, sparse solve, condition-number estimation.

Globally coupled unknowns are the (k+1) polynomial coefficients per
interior edge; cell unknowns are eliminated cell by cell through a Schur
complement and recovered afterwards from the stored factorizations.
Dirichlet data is enforced strongly: boundary-edge coefficients are set to
the L2 projection of the boundary field and moved to the right-hand side.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import cho_solve

from .errors import SolverError
from .hho import ElementContext, condense_local
from .poly import EdgeBasis, cell_space_dim, edge_quadrature, _as_edge


class DofMap:
    """Numbering of the globally coupled (interior edge) unknowns."""

    def __init__(self, mesh, k):
        self.mesh = mesh
        self.k = k
        self.edge_dofs = k + 1
        self.n_cell = cell_space_dim(k)
        interior = ~mesh.boundary_edge
        self.edge_offset = np.full(mesh.n_edges, -1, dtype=np.int64)
        self.edge_offset[interior] = np.arange(int(interior.sum())) * self.edge_dofs
        self.n_interior_edges = int(interior.sum())
        self.n_global = self.n_interior_edges * self.edge_dofs

    def cell_edge_offsets(self, cell):
        """Global offsets of a cell's edges (-1 marks boundary edges)."""
        return self.edge_offset[self.mesh.cell_edges[cell]]

    # full (uncondensed) layout: all cell blocks first, then all edge blocks
    def full_size(self):
        return self.mesh.n_cells * self.n_cell + self.mesh.n_edges * self.edge_dofs

    def full_cell_slice(self, cell):
        return slice(cell * self.n_cell, (cell + 1) * self.n_cell)

    def full_edge_slice(self, edge):
        base = self.mesh.n_cells * self.n_cell
        return slice(base + edge * self.edge_dofs,
                     base + (edge + 1) * self.edge_dofs)

    def local_dof_indices(self, cell):
        """Indices of a cell's hybrid unknowns inside the full layout."""
        idx = list(range(*self.full_cell_slice(cell).indices(self.full_size())))
        for e in self.mesh.cell_edges[cell]:
            idx.extend(range(*self.full_edge_slice(int(e)).indices(self.full_size())))
        return np.array(idx, dtype=np.int64)


class CondensedSystem:
    """Sparse SPD system on the interior edge unknowns plus recovery data."""

    def __init__(self, matrix, rhs, dofmap=None, recovery=None,
                 boundary_values=None, mesh=None, k=None):
        self.matrix = matrix.tocsc()
        self.rhs = rhs
        self.dofmap = dofmap
        self.recovery = recovery
        self.boundary_values = boundary_values
        self.mesh = mesh
        self.k = k
        self._factor = None

    @property
    def n(self):
        return self.matrix.shape[0]

    def factorize(self):
        """Sparse factorization, verifying positive definiteness.

        With symmetric mode and no numerical pivoting the U diagonal carries
        the inertia of the matrix, so a negative entry flags an indefinite
        input instead of returning silent garbage.
        """
        if self._factor is None:
            if self.n == 0:
                self._factor = _EmptyFactor()
                return self._factor
            try:
                lu = spla.splu(
                    self.matrix,
                    permc_spec="MMD_AT_PLUS_A",
                    diag_pivot_thresh=0.0,
                    options={"SymmetricMode": True},
                )
            except RuntimeError as exc:
                raise SolverError(f"sparse factorization failed: {exc}") from exc
            du = lu.U.diagonal()
            if np.any(du <= 0.0):
                raise SolverError(
                    "condensed matrix is not positive definite "
                    f"(min pivot {du.min():.3e})"
                )
            self._factor = lu
        return self._factor

    def dump_coo(self, path):
        """Debug dump in `row col value` coordinate text format."""
        coo = self.matrix.tocoo()
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# {self.n} rows, {coo.nnz} entries\n")
            for r, c, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{r} {c} {v!r}\n")


class _EmptyFactor:
    def solve(self, b):
        return np.zeros_like(b)


def project_boundary_values(mesh, g, k):
    """(n_edges, k+1) array of edge projections of g on boundary edges."""
    vals = np.zeros((mesh.n_edges, k + 1))
    for e in np.nonzero(mesh.boundary_edge)[0]:
        ev = _as_edge(mesh, int(e))
        rule = edge_quadrature(ev, exactness=2 * k + 2)
        basis = EdgeBasis(ev, k)
        vals[e] = basis.eval(rule.points).T @ (rule.weights * g(rule.points))
    return vals


def assemble(mesh, field, f, g, k, ops_out=None):
    """Assemble the statically condensed system.

    Parameters
    ----------
    field : DiffusionField (per-cell SPD tensors).
    f : callable ``f(cell, points) -> values`` (source moments per cell).
    g : callable ``g(points) -> values`` (Dirichlet boundary data).
    k : edge/cell polynomial degree.
    ops_out : optional list collecting each cell's LocalOperatorSet
        (meant for small meshes and tests; large runs recompute instead).
    """
    dofmap = DofMap(mesh, k)
    gvals = project_boundary_values(mesh, g, k)
    nk = dofmap.n_cell
    ed = dofmap.edge_dofs
    rows, cols, data = [], [], []
    rhs = np.zeros(dofmap.n_global)
    recovery = []
    for ci in range(mesh.n_cells):
        K = field.tensor(mesh, ci)
        ctx = ElementContext(mesh, ci, K=K, k=k)
        ops = ctx.operator_set()
        if ops_out is not None:
            ops_out.append(ops)
        load = ctx.load(f(ci, ctx.rule.points))
        cho, s_ff, r_f = condense_local(ops.A, load, nk)
        edges = [int(e) for e in mesh.cell_edges[ci]]
        recovery.append((cho, ops.A[:nk, nk:], load, edges))
        # per-DOF global ids of the cell's edge unknowns, -1 on boundary
        gids = np.repeat(dofmap.edge_offset[edges], ed)
        gids[gids >= 0] += np.tile(np.arange(ed), len(edges))[gids >= 0]
        interior = gids >= 0
        if np.any(~interior):
            gbnd = np.concatenate([gvals[e] for e in edges])
            r_f = r_f - s_ff[:, ~interior] @ gbnd[~interior]
        gi = gids[interior]
        rhs[gi] += r_f[interior]
        block = s_ff[np.ix_(interior, interior)]
        rows.append(np.repeat(gi, len(gi)))
        cols.append(np.tile(gi, len(gi)))
        data.append(block.ravel())
    matrix = sp.coo_matrix(
        (np.concatenate(data) if data else np.zeros(0),
         (np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64),
          np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64))),
        shape=(dofmap.n_global, dofmap.n_global)).tocsc()
    return CondensedSystem(matrix, rhs, dofmap=dofmap, recovery=recovery,
                           boundary_values=gvals, mesh=mesh, k=k)


def solve(system, solver="direct", cg_tol=1e-12):
    """Solve the condensed system for the interior edge unknowns.

    The direct path factorizes once and verifies the relative residual
    (<= 1e-10 required).  ``solver="cg"`` runs conjugate gradients with a
    diagonal preconditioner instead, capped at 50 x dimension iterations.
    """
    if system.n == 0:
        return np.zeros(0)
    b = system.rhs
    if solver == "direct":
        x = system.factorize().solve(b)
    elif solver == "cg":
        diag = system.matrix.diagonal()
        if np.any(diag <= 0.0):
            raise SolverError("matrix diagonal is not positive; CG aborted")
        M = sp.diags(1.0 / diag)
        x, info = spla.cg(system.matrix, b, rtol=cg_tol, atol=0.0,
                          maxiter=50 * system.n, M=M)
        if info != 0:
            raise SolverError(f"CG did not converge (info={info})")
    else:
        raise ValueError(f"unknown solver {solver!r}")
    bnorm = np.linalg.norm(b)
    if bnorm > 0.0:
        res = np.linalg.norm(system.matrix @ x - b) / bnorm
        if res > 1e-10:
            raise SolverError(f"solver residual {res:.3e} exceeds 1e-10")
    return x


def recover_cells(system, edge_solution):
    """Back-substitute the cell unknowns; returns the full DOF vector."""
    dofmap = system.dofmap
    mesh = system.mesh
    ed = dofmap.edge_dofs
    full = np.zeros(dofmap.full_size())
    for e in range(mesh.n_edges):
        off = dofmap.edge_offset[e]
        if off >= 0:
            full[dofmap.full_edge_slice(e)] = edge_solution[off: off + ed]
        else:
            full[dofmap.full_edge_slice(e)] = system.boundary_values[e]
    for ci, (cho, a_tf, load, edges) in enumerate(system.recovery):
        u_f = np.concatenate([full[dofmap.full_edge_slice(e)] for e in edges])
        full[dofmap.full_cell_slice(ci)] = cho_solve(cho, load - a_tf @ u_f,
                                                     check_finite=False)
    return full


def one_norm(matrix):
    """Exact 1-norm (max absolute column sum) of a sparse matrix."""
    return float(abs(matrix).sum(axis=0).max())


def _estimate_inverse_one_norm(solve_fn, n, itmax=5):
    """Iterative lower-bound estimate of ||A^-1||_1 for symmetric A.

    The classic gradient ascent on ||A^-1 x||_1 over the unit 1-norm ball:
    alternate solves with the sign vector and restart at the largest
    component, finishing with the odd/even probe vector safeguard.  Uses at
    most 2*itmax + 1 solves.
    """
    if n == 0:
        return 0.0
    if n == 1:
        return float(abs(solve_fn(np.ones(1))[0]))
    x = np.full(n, 1.0 / n)
    est = 0.0
    last_j = -1
    for _ in range(itmax):
        z = solve_fn(x)
        est_new = float(np.abs(z).sum())
        xi = np.where(z >= 0.0, 1.0, -1.0)
        w = solve_fn(xi)
        j = int(np.argmax(np.abs(w)))
        if est_new <= est or np.abs(w).max() <= w @ x or j == last_j:
            est = max(est, est_new)
            break
        est = est_new
        last_j = j
        x = np.zeros(n)
        x[j] = 1.0
    i = np.arange(n)
    probe = (-1.0) ** i * (1.0 + i / (n - 1.0))
    est_probe = 2.0 * float(np.abs(solve_fn(probe)).sum()) / (3.0 * n)
    return max(est, est_probe)


def condition_number_1norm(system):
    """1-norm condition estimate of the condensed matrix.

    ||A||_1 is exact; ||A^-1||_1 comes from the iterative estimator driven
    by the existing factorization.  Exact on diagonal matrices.
    """
    if system.n == 0:
        return float("nan")
    factor = system.factorize()
    inv_norm = _estimate_inverse_one_norm(factor.solve, system.n)
    return one_norm(system.matrix) * inv_norm


# -- reference uncondensed path (oracle for tests) ---------------------------


def assemble_full(mesh, field, f, g, k):
    """Assemble the same scheme without condensation.

    Unknowns are all cell blocks followed by the interior edge blocks;
    boundary edges are eliminated strongly.  Returns (matrix, rhs, dofmap,
    boundary values).  This is the independent oracle the condensed path is
    checked against.
    """
    dofmap = DofMap(mesh, k)
    gvals = project_boundary_values(mesh, g, k)
    nk = dofmap.n_cell
    ed = dofmap.edge_dofs
    n_cells = mesh.n_cells
    n_unknown = n_cells * nk + dofmap.n_global
    rows, cols, data = [], [], []
    rhs = np.zeros(n_unknown)
    for ci in range(n_cells):
        K = field.tensor(mesh, ci)
        ctx = ElementContext(mesh, ci, K=K, k=k)
        ops = ctx.operator_set()
        load = ctx.load(f(ci, ctx.rule.points))
        edges = [int(e) for e in mesh.cell_edges[ci]]
        gidx = list(range(ci * nk, (ci + 1) * nk))
        known = np.zeros(ops.n_loc)
        keep = list(range(nk))
        for a, e in enumerate(edges):
            off = dofmap.edge_offset[e]
            lo = nk + a * ed
            if off < 0:
                known[lo: lo + ed] = gvals[e]
            else:
                gidx.extend(range(n_cells * nk + off, n_cells * nk + off + ed))
                keep.extend(range(lo, lo + ed))
        keep = np.array(keep)
        block = ops.A[np.ix_(keep, keep)]
        local_rhs = np.concatenate([load, np.zeros(ops.n_loc - nk)])[keep]
        local_rhs -= ops.A[np.ix_(keep, np.arange(ops.n_loc))] @ known
        gidx = np.array(gidx)
        rows.extend(np.repeat(gidx, len(gidx)))
        cols.extend(np.tile(gidx, len(gidx)))
        data.extend(block.ravel())
        rhs[gidx] += local_rhs
    matrix = sp.coo_matrix((data, (rows, cols)),
                           shape=(n_unknown, n_unknown)).tocsc()
    return matrix, rhs, dofmap, gvals


def solve_full(mesh, field, f, g, k):
    """Solve the uncondensed system; returns the full DOF vector."""
    matrix, rhs, dofmap, gvals = assemble_full(mesh, field, f, g, k)
    if matrix.shape[0]:
        x = spla.spsolve(matrix, rhs)
    else:
        x = np.zeros(0)
    nk = dofmap.n_cell
    ed = dofmap.edge_dofs
    full = np.zeros(dofmap.full_size())
    full[: mesh.n_cells * nk] = x[: mesh.n_cells * nk]
    for e in range(mesh.n_edges):
        off = dofmap.edge_offset[e]
        if off >= 0:
            full[dofmap.full_edge_slice(e)] = x[mesh.n_cells * nk + off:
                                                mesh.n_cells * nk + off + ed]
        else:
            full[dofmap.full_edge_slice(e)] = gvals[e]
    return full
