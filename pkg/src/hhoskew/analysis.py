"""Error measurement, skewness diagnostics and convergence-rate fitting.

Errors follow the benchmark conventions: a relative energy error measured
in the assembled bilinear form, a diffusion-independent discrete H1 error
(identity tensor, d_TF face weights), and a relative cell L2 error.  All
three compare the discrete solution against the interpolate of the exact
solution, not against the exact solution directly.
"""

import warnings
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .errors import HHOError
from .hho import ElementContext, elliptic_projector
from .mesh.core import as_cell_view, cell_flatness
from .mesh.skew import edge_jacobian, estimate_skew_map, map_cell
from .poly import CellBasis, Poly2D, cell_quadrature, check_spd, edge_quadrature
from .system import DofMap

DENOMINATOR_FLOOR = 1e-14


@dataclass
class ErrorReport:
    """One refinement level of a convergence study."""

    h: float
    n_edge_dofs: int
    energy_error: float
    h1_error: float
    l2_error: float
    condition_number: float
    flatness: float
    degree: int
    absolute: bool = False

    def as_row(self):
        return (self.h, self.n_edge_dofs, self.energy_error, self.h1_error,
                self.l2_error, self.condition_number, self.flatness)


@dataclass
class SkewnessDiagnostics:
    """Per-cell transported-tensor spectra and predicted error factors."""

    flatness: np.ndarray
    khat_max: np.ndarray
    khat_min: np.ndarray
    ratio: np.ndarray
    factor: np.ndarray
    fl_h: float = dataclass_field(init=False)
    max_factor: float = dataclass_field(init=False)

    def __post_init__(self):
        self.fl_h = float(self.flatness.max())
        self.max_factor = float(self.factor.max())


def global_interpolate(u, mesh, k, exactness=None):
    """Cell and edge L2 projections of ``u`` assembled into a full vector.

    The default quadrature resolves smooth (non-polynomial) data to near
    machine precision even on coarse cells, so interpolation error never
    contaminates the measured discretization errors.
    """
    if exactness is None:
        exactness = max(2 * k + 3, 12)
    dofmap = DofMap(mesh, k)
    full = np.zeros(dofmap.full_size())
    for ci in range(mesh.n_cells):
        ctx = ElementContext(mesh, ci, K=None, k=k,
                             cell_exactness=exactness, edge_exactness=exactness)
        loc = ctx.interpolate(u)
        full[dofmap.full_cell_slice(ci)] = loc.cell
        for e, coeffs in zip(mesh.cell_edges[ci], loc.edges):
            full[dofmap.full_edge_slice(int(e))] = coeffs
    return full


def _relative(num_sq, den_sq, what):
    num = float(np.sqrt(max(num_sq, 0.0)))
    den = float(np.sqrt(max(den_sq, 0.0)))
    if den <= DENOMINATOR_FLOOR:
        warnings.warn(f"{what}: reference norm is ~0, reporting absolute error")
        return num, True
    return num / den, False


def energy_error(uh, ihu, mesh, field, k, return_flag=False):
    """Relative energy error ||ihu - uh||_a / ||ihu||_a."""
    num_sq = 0.0
    den_sq = 0.0
    dofmap = DofMap(mesh, k)
    for ci in range(mesh.n_cells):
        ctx = ElementContext(mesh, ci, K=field.tensor(mesh, ci), k=k)
        A = ctx.operator_set().A
        idx = dofmap.local_dof_indices(ci)
        d = ihu[idx] - uh[idx]
        r = ihu[idx]
        num_sq += d @ A @ d
        den_sq += r @ A @ r
    value, flag = _relative(num_sq, den_sq, "energy_error")
    return (value, flag) if return_flag else value


def h1_error(uh, ihu, mesh, k, return_flag=False):
    """Relative diffusion-independent discrete H1 error."""
    num_sq = 0.0
    den_sq = 0.0
    dofmap = DofMap(mesh, k)
    eye = np.eye(2)
    for ci in range(mesh.n_cells):
        ctx = ElementContext(mesh, ci, K=eye, k=k)
        N = ctx.seminorm_matrix()
        idx = dofmap.local_dof_indices(ci)
        d = ihu[idx] - uh[idx]
        r = ihu[idx]
        num_sq += d @ N @ d
        den_sq += r @ N @ r
    value, flag = _relative(num_sq, den_sq, "h1_error")
    return (value, flag) if return_flag else value


def l2_error(uh, u, mesh, k, return_flag=False):
    """Relative L2 error of the cell unknowns against the exact solution."""
    dofmap = DofMap(mesh, k)
    num_sq = 0.0
    den_sq = 0.0
    for ci in range(mesh.n_cells):
        view = mesh.cell(ci)
        rule = cell_quadrature(view, exactness=2 * k + 6)
        basis = CellBasis(view, k, rule=rule)
        coeffs = uh[dofmap.full_cell_slice(ci)]
        diff = basis.eval(rule.points) @ coeffs - u(rule.points)
        num_sq += rule.weights @ diff**2
        den_sq += rule.weights @ u(rule.points) ** 2
    value, flag = _relative(num_sq, den_sq, "l2_error")
    return (value, flag) if return_flag else value


def transported_tensor(K, phi):
    """Tensor seen by the unskewed cell: Khat = phi K phi^t.

    Returns (Khat, eigenvalues descending, anisotropy ratio).
    """
    K = check_spd(K)
    phi = np.asarray(phi, dtype=float)
    if abs(np.linalg.det(phi)) <= 0.0:
        raise ValueError("skew map must be invertible")
    khat = phi @ K @ phi.T
    khat = 0.5 * (khat + khat.T)
    lams = np.linalg.eigvalsh(khat)
    if lams[0] <= 0.0:
        raise ValueError("transported tensor lost positive definiteness")
    return khat, np.array([lams[1], lams[0]]), float(lams[1] / lams[0])


def interplay_factor(lam, a, b):
    """Closed-form skewness/anisotropy factor for diagonal data.

    For K = diag(lam, 1) and a skew map diag(a, b) the per-cell constant is
    max(a sqrt(lam), b) * max(a sqrt(lam) / b, b / (a sqrt(lam))).
    """
    s = a * np.sqrt(lam)
    return max(s, b) * max(s / b, b / s)


def predicted_bound_factor(mesh, field, skew_maps=None):
    """Per-cell error-estimate factors (Khat_max * ratio)^(1/2) and their max.

    ``skew_maps`` defaults to the estimated per-cell maps.  Returns
    (per-cell array, global max).
    """
    factors = np.empty(mesh.n_cells)
    for ci in range(mesh.n_cells):
        phi = (skew_maps[ci].matrix if skew_maps is not None
               else estimate_skew_map(mesh, ci).matrix)
        _, lams, ratio = transported_tensor(field.tensor(mesh, ci), phi)
        factors[ci] = np.sqrt(lams[0] * ratio)
    return factors, float(factors.max())


def skewness_diagnostics(mesh, field, skew_maps=None):
    """Flatness, transported spectra and predicted factors for every cell."""
    n = mesh.n_cells
    fl = np.empty(n)
    kmax = np.empty(n)
    kmin = np.empty(n)
    ratio = np.empty(n)
    factor = np.empty(n)
    for ci in range(n):
        view = mesh.cell(ci)
        fl[ci] = cell_flatness(view)
        phi = (skew_maps[ci].matrix if skew_maps is not None
               else estimate_skew_map(view).matrix)
        _, lams, rho = transported_tensor(field.tensor(mesh, ci), phi)
        kmax[ci], kmin[ci] = lams
        ratio[ci] = rho
        factor[ci] = np.sqrt(lams[0] * rho)
    return SkewnessDiagnostics(flatness=fl, khat_max=kmax, khat_min=kmin,
                               ratio=ratio, factor=factor)


def convergence_rates(xs, ys):
    """Pairwise log-log slopes log(y_i/y_{i+1}) / log(x_i/x_{i+1}).

    ``xs`` must be strictly monotone; zero values in ``ys`` make the slope
    undefined and raise.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValueError("need at least two matching (x, y) pairs")
    dx = np.diff(xs)
    if not (np.all(dx < 0.0) or np.all(dx > 0.0)):
        raise HHOError("rate fitting needs strictly monotone abscissae")
    if np.any(ys <= 0.0):
        raise HHOError("rate undefined: non-positive error value")
    return np.log(ys[:-1] / ys[1:]) / np.log(xs[:-1] / xs[1:])


def report_rates(reports):
    """Pairwise rates vs h for each error column of a report sequence."""
    hs = [r.h for r in reports]
    out = {}
    for name, attr in (("EnergyError", "energy_error"),
                       ("H1error", "h1_error"),
                       ("L2error", "l2_error")):
        ys = [getattr(r, attr) for r in reports]
        try:
            out[name] = convergence_rates(hs, ys)
        except HHOError:
            out[name] = np.full(max(len(hs) - 1, 0), np.nan)
    return out


def compute_error_report(mesh, field, k, solution, uh_full,
                         condition_number=float("nan")):
    """All error columns of one refinement level in a single cell pass.

    Interpolates the exact solution locally, so no second global vector is
    needed; memory stays O(1) in the number of cells.
    """
    dofmap = DofMap(mesh, k)
    acc = np.zeros(6)  # energy num/den, h1 num/den, l2 num/den (squared)
    fl_h = 0.0
    eye = np.eye(2)
    absolute = False
    for ci in range(mesh.n_cells):
        view = mesh.cell(ci)
        fl_h = max(fl_h, cell_flatness(view))
        ctx = ElementContext(view, K=field.tensor(mesh, ci), k=k,
                             cell_exactness=2 * k + 6,
                             edge_exactness=2 * k + 6)
        A = ctx.operator_set().A
        N = ctx.seminorm_matrix(K=eye)
        idx = dofmap.local_dof_indices(ci)
        ihu = ctx.interpolate(solution).flat
        d = ihu - uh_full[idx]
        acc[0] += d @ A @ d
        acc[1] += ihu @ A @ ihu
        acc[2] += d @ N @ d
        acc[3] += ihu @ N @ ihu
        uvals = solution(ctx.rule.points)
        diff = ctx.cell_vals[:, : ctx.n_cell] @ uh_full[
            dofmap.full_cell_slice(ci)] - uvals
        acc[4] += ctx.rule.weights @ diff**2
        acc[5] += ctx.rule.weights @ uvals**2
    energy, fa = _relative(acc[0], acc[1], "energy_error")
    h1, fb = _relative(acc[2], acc[3], "h1_error")
    l2, fc = _relative(acc[4], acc[5], "l2_error")
    absolute = fa or fb or fc
    return ErrorReport(
        h=mesh.h,
        n_edge_dofs=dofmap.n_global,
        energy_error=energy,
        h1_error=h1,
        l2_error=l2,
        condition_number=condition_number,
        flatness=fl_h,
        degree=k,
        absolute=absolute,
    )


# -- numerical verification of the transport identities -----------------------


def _random_poly(basis, rng):
    return Poly2D(basis, rng.standard_normal(basis.dim))


def _rel_residual(lhs, rhs):
    scale = max(abs(lhs), abs(rhs), 1e-30)
    return abs(lhs - rhs) / scale


def verify_transport(mesh_or_view, cell=None, phi=None, K=None, k=1, rng=None):
    """Numerically evaluate the transport identities on one cell.

    Returns a dict of maximum relative residuals for: the normal-transport
    identity, the L2 inner-product transports (cell and edge), the weighted
    gradient inner-product transport, the elliptic-projector transport and
    the potential-reconstruction transport.  Thresholds are left to the
    caller.
    """
    view = as_cell_view(mesh_or_view, cell)
    if phi is None:
        phi = estimate_skew_map(view).matrix
    phi = np.asarray(phi, dtype=float)
    K = check_spd(np.eye(2) if K is None else K)
    rng = np.random.default_rng(0) if rng is None else rng
    jac = abs(np.linalg.det(phi))
    phi_inv = np.linalg.inv(phi)
    image = map_cell(view, phi)
    khat, _, _ = transported_tensor(K, phi)
    res = {}

    # normal transport: phi^t nhat = (J / J_F) n on every edge
    worst = 0.0
    for ev, iv in zip(view.edges, image.edges):
        jf = edge_jacobian(phi, ev)
        lhs = phi.T @ iv.normal
        rhs = (jac / jf) * ev.normal
        worst = max(worst, np.abs(lhs - rhs).max() / max(np.abs(rhs).max(), 1e-30))
    res["phi_normal"] = worst

    rule = cell_quadrature(view, exactness=2 * (k + 1) + 2)
    irule = cell_quadrature(image, exactness=2 * (k + 1) + 2)
    basis = CellBasis(view, k + 1, rule=rule)
    w = _random_poly(basis, rng)
    z = _random_poly(basis, rng)

    def pull(poly):
        # transported function evaluated on the image cell
        return lambda pts: poly.value(pts @ phi_inv.T)

    def pull_grad(poly):
        return lambda pts: poly.grad(pts @ phi_inv.T) @ phi_inv

    # cell L2 inner product: (w, z)_T = J^-1 (what, zhat)_That
    lhs = rule.weights @ (w.value(rule.points) * z.value(rule.points))
    rhs = (irule.weights @ (pull(w)(irule.points) * pull(z)(irule.points))) / jac
    res["trans_norm"] = _rel_residual(lhs, rhs)

    # edge L2 inner product with the length jacobian
    worst = 0.0
    for ev, iv in zip(view.edges, image.edges):
        er = edge_quadrature(ev, exactness=2 * (k + 1) + 2)
        ir = edge_quadrature(iv, exactness=2 * (k + 1) + 2)
        jf = edge_jacobian(phi, ev)
        lhs = er.weights @ (w.value(er.points) * z.value(er.points))
        rhs = (ir.weights @ (pull(w)(ir.points) * pull(z)(ir.points))) / jf
        worst = max(worst, _rel_residual(lhs, rhs))
    res["trans_norm_F"] = worst

    # weighted gradient inner product with the transported tensor
    gw = w.grad(rule.points)
    gz = z.grad(rule.points)
    lhs = rule.weights @ np.einsum("qd,qd->q", gw @ K.T, gz)
    gwi = pull_grad(w)(irule.points)
    gzi = pull_grad(z)(irule.points)
    rhs = (irule.weights @ np.einsum("qd,qd->q", gwi @ khat.T, gzi)) / jac
    res["trans_grad_innerprod"] = _rel_residual(lhs, rhs)

    # elliptic projector transport: (pi_K v)hat = pihat_Khat vhat
    proj = elliptic_projector(w, k, K, view)
    iproj = elliptic_projector(pull(w), k, khat, image, grad_v=pull_grad(w))
    probe = image.centroid + 0.3 * (image.points - image.centroid)
    lhs_vals = proj.value(probe @ phi_inv.T)
    rhs_vals = iproj.value(probe)
    scale = max(np.abs(lhs_vals).max(), np.abs(rhs_vals).max(), 1e-30)
    res["dproj_transport"] = float(np.abs(lhs_vals - rhs_vals).max() / scale)

    # potential reconstruction transport on transported hybrid unknowns
    ctx = ElementContext(view, K=K, k=k)
    ictx = ElementContext(image, K=khat, k=k)
    P, _ = ctx.reconstruction()
    Pi, _ = ictx.reconstruction()
    dofs = ctx.interpolate(lambda pts: w.value(pts))
    idofs = ictx.interpolate(pull(w))
    rec = Poly2D(ctx.basis, P @ dofs.flat)
    irec = Poly2D(ictx.basis, Pi @ idofs.flat)
    lhs_vals = rec.value(probe @ phi_inv.T)
    rhs_vals = irec.value(probe)
    scale = max(np.abs(lhs_vals).max(), np.abs(rhs_vals).max(), 1e-30)
    res["dpT_transport"] = float(np.abs(lhs_vals - rhs_vals).max() / scale)
    return res
