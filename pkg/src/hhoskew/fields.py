"""Diffusion tensors and manufactured solutions for the benchmark cases."""

import math

import numpy as np

from .poly import check_spd


class DiffusionField:
    """Piecewise-constant SPD diffusion tensor, one 2x2 matrix per cell.

    The tensor is sampled at cell centroids, so discontinuity interfaces
    must be aligned with mesh lines (the layered field below sits on
    y = 0.5, which every even-sized generated family respects).
    """

    def __init__(self, fn, name="custom"):
        self._fn = fn
        self.name = name

    def tensor(self, mesh, cell):
        return check_spd(self._fn(mesh.cell_centroid[cell]))

    def at(self, point):
        return check_spd(self._fn(np.asarray(point, dtype=float)))

    @classmethod
    def constant(cls, K, name=None):
        K = check_spd(K)
        return cls(lambda p: K, name=name or "constant")

    @classmethod
    def identity(cls):
        return cls.constant(np.eye(2), name="id")

    @classmethod
    def diagonal(cls, lam, mu=1.0):
        return cls.constant(np.diag([float(lam), float(mu)]),
                            name=f"diag({lam:g},{mu:g})")

    @classmethod
    def layered(cls, lam, interface=0.5):
        """diag(lam, 1) below the interface line, identity above."""
        low = np.diag([float(lam), 1.0])
        high = np.eye(2)

        def fn(p):
            return low if p[1] < interface else high

        return cls(fn, name=f"layered({lam:g})")


class Solution:
    """A manufactured exact solution with value, gradient and Hessian.

    ``hessian`` returns rows (u_xx, u_xy, u_yy).  The source for a constant
    tensor K on a cell is -K : D^2 u, assembled in :meth:`source`.
    """

    def value(self, points):
        raise NotImplementedError

    def grad(self, points):
        raise NotImplementedError

    def hessian(self, points):
        raise NotImplementedError

    def source(self, K, points):
        K = np.asarray(K, dtype=float)
        h = self.hessian(points)
        return -(K[0, 0] * h[:, 0] + 2.0 * K[0, 1] * h[:, 1] + K[1, 1] * h[:, 2])

    def __call__(self, points):
        return self.value(points)


class CosineSolution(Solution):
    """u(x, y) = cos(pi x) cos(pi y), the default benchmark solution."""

    name = "cosine"

    def value(self, points):
        return np.cos(math.pi * points[:, 0]) * np.cos(math.pi * points[:, 1])

    def grad(self, points):
        cx = np.cos(math.pi * points[:, 0])
        sx = np.sin(math.pi * points[:, 0])
        cy = np.cos(math.pi * points[:, 1])
        sy = np.sin(math.pi * points[:, 1])
        return np.column_stack([-math.pi * sx * cy, -math.pi * cx * sy])

    def hessian(self, points):
        pi2 = math.pi**2
        cx = np.cos(math.pi * points[:, 0])
        sx = np.sin(math.pi * points[:, 0])
        cy = np.cos(math.pi * points[:, 1])
        sy = np.sin(math.pi * points[:, 1])
        return np.column_stack([-pi2 * cx * cy, pi2 * sx * sy, -pi2 * cx * cy])


class PolynomialSolution(Solution):
    """Global polynomial solution sum c_ab x^a y^b (exactness checks)."""

    def __init__(self, terms):
        self.terms = [(int(a), int(b), float(c)) for (a, b), c in terms.items()]
        self.degree = max((a + b for a, b, _ in self.terms), default=0)
        self.name = f"poly(deg={self.degree})"

    @classmethod
    def of_degree(cls, degree):
        """A fixed full-degree polynomial with non-trivial mixed terms."""
        terms = {}
        coef = 1.0
        for d in range(degree + 1):
            for b in range(d + 1):
                terms[(d - b, b)] = coef / (1.0 + d + 0.5 * b)
                coef = -coef
        return cls(terms)

    def value(self, points):
        x, y = points[:, 0], points[:, 1]
        out = np.zeros(len(points))
        for a, b, c in self.terms:
            out += c * x**a * y**b
        return out

    def grad(self, points):
        x, y = points[:, 0], points[:, 1]
        gx = np.zeros(len(points))
        gy = np.zeros(len(points))
        for a, b, c in self.terms:
            if a > 0:
                gx += c * a * x ** (a - 1) * y**b
            if b > 0:
                gy += c * b * x**a * y ** (b - 1)
        return np.column_stack([gx, gy])

    def hessian(self, points):
        x, y = points[:, 0], points[:, 1]
        hxx = np.zeros(len(points))
        hxy = np.zeros(len(points))
        hyy = np.zeros(len(points))
        for a, b, c in self.terms:
            if a > 1:
                hxx += c * a * (a - 1) * x ** (a - 2) * y**b
            if a > 0 and b > 0:
                hxy += c * a * b * x ** (a - 1) * y ** (b - 1)
            if b > 1:
                hyy += c * b * (b - 1) * x**a * y ** (b - 2)
        return np.column_stack([hxx, hxy, hyy])


def source_from_solution(solution, field, mesh):
    """Per-cell source callable f(cell, points) = -div(K_T grad u)."""

    def f(cell, points):
        return solution.source(field.tensor(mesh, cell), points)

    return f
