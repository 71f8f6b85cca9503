import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import hhoskew as hs

IDENTITY = hs.DiffusionField.identity()


def small_solved_case(k=1, n=4):
    mesh = hs.generate_cartesian(n)
    sol = hs.CosineSolution()
    f = hs.source_from_solution(sol, IDENTITY, mesh)
    system = hs.assemble(mesh, IDENTITY, f, sol, k)
    uh = hs.recover_cells(system, hs.solve(system))
    return mesh, sol, uh


class TestGlobalInterpolate:
    def test_zero(self):
        mesh = hs.generate_cartesian(2)
        ih = hs.global_interpolate(lambda p: np.zeros(len(p)), mesh, 1)
        assert np.abs(ih).max() == 0.0

    def test_reproduces_polynomials(self, rng):
        mesh = hs.generate_hexagonal(2, 2.0)
        k = 2
        sol = hs.PolynomialSolution.of_degree(k)
        ih = hs.global_interpolate(sol, mesh, k)
        dm = hs.DofMap(mesh, k)
        for ci in (0, mesh.n_cells - 1):
            view = mesh.cell(ci)
            rule = hs.cell_quadrature(view, exactness=2 * k + 4)
            basis = hs.CellBasis(view, k, rule=rule)
            vals = basis.eval(rule.points) @ ih[dm.full_cell_slice(ci)]
            assert np.abs(vals - sol(rule.points)).max() <= 1e-11

    def test_cosine_cell_means_two_by_two(self):
        # means of cos(pi x) cos(pi y) over the four quadrant cells: +-4/pi^2
        mesh = hs.generate_cartesian(2)
        ih = hs.global_interpolate(hs.CosineSolution(), mesh, 0)
        dm = hs.DofMap(mesh, 0)
        expected_mean = 4.0 / np.pi**2
        sqrt_area = 0.5
        for ci in range(4):
            c = mesh.cell_centroid[ci]
            sign = np.sign(np.cos(np.pi * c[0]) * np.cos(np.pi * c[1]))
            got = ih[dm.full_cell_slice(ci)][0]
            assert got == pytest.approx(sign * expected_mean * sqrt_area,
                                        rel=1e-12)


class TestErrorNorms:
    def test_zero_error_for_equal_vectors(self):
        mesh, sol, uh = small_solved_case()
        ih = hs.global_interpolate(sol, mesh, 1)
        assert hs.energy_error(ih, ih, mesh, IDENTITY, 1) == 0.0
        assert hs.h1_error(ih, ih, mesh, 1) == 0.0

    def test_scaling_invariance(self):
        mesh, sol, uh = small_solved_case()
        ih = hs.global_interpolate(sol, mesh, 1)
        e1 = hs.energy_error(uh, ih, mesh, IDENTITY, 1)
        e2 = hs.energy_error(2.0 * uh, 2.0 * ih, mesh, IDENTITY, 1)
        assert e2 == pytest.approx(e1, rel=1e-12)
        assert hs.h1_error(2.0 * uh, 2.0 * ih, mesh, 1) == pytest.approx(
            hs.h1_error(uh, ih, mesh, 1), rel=1e-12)

    def test_zero_denominator_flagged(self):
        mesh = hs.generate_cartesian(2)
        zero = np.zeros(hs.DofMap(mesh, 0).full_size())
        ones = zero.copy()
        ones[:] = 0.0
        with pytest.warns(UserWarning):
            val, flag = hs.energy_error(zero + 1e-3, zero, mesh, IDENTITY, 0,
                                        return_flag=True)
        assert flag

    def test_constant_offset_invisible_to_seminorms(self):
        mesh, sol, uh = small_solved_case()
        ih = hs.global_interpolate(sol, mesh, 1)
        const = hs.global_interpolate(lambda p: np.ones(len(p)), mesh, 1)
        e1 = hs.energy_error(uh, ih, mesh, IDENTITY, 1)
        e2 = hs.energy_error(uh + const, ih + const, mesh, IDENTITY, 1)
        assert e2 == pytest.approx(e1, rel=1e-9)

    def test_h1_matches_term_by_term_oracle(self):
        mesh, sol, uh = small_solved_case()
        ih = hs.global_interpolate(sol, mesh, 1)
        num_sq = 0.0
        den_sq = 0.0
        dm = hs.DofMap(mesh, 1)
        for ci in range(mesh.n_cells):
            idx = dm.local_dof_indices(ci)
            d = ih[idx] - uh[idx]
            num_sq += hs.local_seminorm(d, np.eye(2), mesh, ci, k=1) ** 2
            den_sq += hs.local_seminorm(ih[idx], np.eye(2), mesh, ci, k=1) ** 2
        expected = np.sqrt(num_sq / den_sq)
        assert hs.h1_error(uh, ih, mesh, 1) == pytest.approx(expected, rel=1e-12)

    def test_l2_error_against_refined_quadrature_oracle(self):
        mesh, sol, uh = small_solved_case(k=1, n=4)
        got = hs.l2_error(uh, sol, mesh, 1)
        num_sq = 0.0
        den_sq = 0.0
        dm = hs.DofMap(mesh, 1)
        for ci in range(mesh.n_cells):
            view = mesh.cell(ci)
            rule = hs.cell_quadrature(view, exactness=20)
            basis = hs.CellBasis(view, 1, rule=rule)
            diff = basis.eval(rule.points) @ uh[dm.full_cell_slice(ci)] \
                - sol(rule.points)
            num_sq += rule.weights @ diff**2
            den_sq += rule.weights @ sol(rule.points) ** 2
        assert got == pytest.approx(np.sqrt(num_sq / den_sq), rel=1e-10)

    def test_projection_l2_error_nonnegative(self):
        mesh = hs.generate_cartesian(2)
        sol = hs.PolynomialSolution.of_degree(1)
        ih = hs.global_interpolate(sol, mesh, 1)
        assert hs.l2_error(ih, sol, mesh, 1) <= 1e-12


class TestTransportedTensor:
    def test_diagonal_case(self):
        # K = diag(lam, 1), phi = diag(a, b) gives diag(a^2 lam, b^2)
        lam, a, b = 7.0, 2.0, 0.5
        khat, lams, ratio = hs.transported_tensor(np.diag([lam, 1.0]),
                                                  np.diag([a, b]))
        assert np.allclose(khat, np.diag([a**2 * lam, b**2]))
        assert lams[0] == pytest.approx(max(a**2 * lam, b**2))
        assert ratio == pytest.approx(a**2 * lam / b**2)

    def test_identity_map(self, rng):
        from conftest import random_spd

        K = random_spd(rng)
        khat, _, _ = hs.transported_tensor(K, np.eye(2))
        assert np.allclose(khat, K)

    def test_eigenvalues_match_characteristic_polynomial(self, rng):
        from conftest import random_spd

        for _ in range(10):
            K = random_spd(rng)
            phi = rng.standard_normal((2, 2))
            while abs(np.linalg.det(phi)) < 0.1:
                phi = rng.standard_normal((2, 2))
            khat, lams, ratio = hs.transported_tensor(K, phi)
            tr = khat[0, 0] + khat[1, 1]
            det = khat[0, 0] * khat[1, 1] - khat[0, 1] * khat[1, 0]
            disc = np.sqrt(tr**2 / 4.0 - det)
            assert lams[0] == pytest.approx(tr / 2.0 + disc, rel=1e-13)
            assert lams[1] == pytest.approx(tr / 2.0 - disc, rel=1e-13)
            assert ratio >= 1.0

    def test_rejects_singular_map(self):
        with pytest.raises(ValueError):
            hs.transported_tensor(np.eye(2), np.zeros((2, 2)))


class TestPredictedFactors:
    def test_isotropic_unskewed_unit(self):
        assert hs.interplay_factor(1.0, 1.0, 1.0) == pytest.approx(1.0)

    def test_strong_diffusion_aligned_with_stretch(self):
        # diag(1e6, 1) with the mesh stretched along the strong axis:
        # the factor drops as 1e6 / fl while fl <= 1e3
        for fl in (10.0, 100.0, 1000.0):
            assert hs.interplay_factor(1e6, 1.0, fl) == pytest.approx(1e6 / fl)

    def test_isotropic_diffusion_on_stretched_mesh(self):
        for fl in (10.0, 70.0):
            assert hs.interplay_factor(1.0, fl, 1.0) == pytest.approx(fl**2)

    def test_per_cell_factor_dominates_khat(self):
        mesh = hs.generate_hexagonal(2, 8.0)
        field = hs.DiffusionField.diagonal(5.0, 1.0)
        factors, fmax = hs.predicted_bound_factor(mesh, field)
        for ci in range(mesh.n_cells):
            sm = hs.estimate_skew_map(mesh, ci)
            _, lams, _ = hs.transported_tensor(field.tensor(mesh, ci), sm.matrix)
            assert factors[ci] >= np.sqrt(lams[0]) - 1e-12

    def test_cartesian_identity_factors_one(self):
        factors, fmax = hs.predicted_bound_factor(hs.generate_cartesian(3),
                                                  IDENTITY)
        assert np.allclose(factors, 1.0, atol=1e-10)


class TestConvergenceRates:
    def test_halving(self):
        assert hs.convergence_rates([1.0, 0.5], [1.0, 0.5])[0] == pytest.approx(1.0)

    @given(st.floats(0.5, 4.0), st.floats(0.1, 10.0))
    @settings(max_examples=30, deadline=None)
    def test_exact_on_power_laws(self, p, c):
        hvals = np.array([0.4, 0.2, 0.1, 0.05])
        evals = c * hvals**p
        rates = hs.convergence_rates(hvals, evals)
        assert np.allclose(rates, p, rtol=1e-12)

    def test_non_monotone_rejected(self):
        with pytest.raises(hs.HHOError):
            hs.convergence_rates([1.0, 2.0, 1.5], [1.0, 1.0, 1.0])

    def test_zero_error_rejected(self):
        with pytest.raises(hs.HHOError):
            hs.convergence_rates([1.0, 0.5], [1.0, 0.0])

    def test_reproduces_reference_flatness_rates(self):
        # frozen reference triples (fl, E/h^{k+1}, pairwise rate) from a
        # skewed-hexagonal sweep; the rate formula reproduces the tabulated
        # rates within the rounding of 2-significant-digit entries
        tables = {
            0: [(10, 8.0e-1, None), (22, 6.7e-1, -0.2), (46, 7.6e-1, 0.2),
                (70, 1.0e0, 0.7)],
            1: [(10, 3.4e-1, None), (22, 2.1e-1, -0.6), (46, 2.3e-1, 0.1),
                (70, 3.3e-1, 0.8)],
            2: [(10, 1.4e-1, None), (22, 6.4e-2, -1.0), (46, 4.9e-2, -0.4),
                (70, 7.3e-2, 0.9)],
            3: [(10, 4.4e-2, None), (22, 1.8e-2, -1.2), (46, 1.0e-2, -0.7),
                (70, 1.4e-2, 0.7)],
        }
        for k, rows in tables.items():
            fl = [r[0] for r in rows]
            ratio = [r[1] for r in rows]
            rates = hs.convergence_rates(fl, ratio)
            for got, (_, _, printed) in zip(rates, rows[1:]):
                assert abs(got - printed) <= 0.15


class TestVerifyTransport:
    def test_identity_map_machine_precision(self, rng):
        mesh = hs.generate_cartesian(2)
        res = hs.verify_transport(mesh, 0, phi=np.eye(2),
                                  K=np.diag([3.0, 1.0]), k=1, rng=rng)
        assert max(res.values()) <= 1e-13

    def test_strong_diagonal_skew(self, rng):
        mesh = hs.generate_cartesian(2)
        res = hs.verify_transport(mesh, 1, phi=np.diag([8.0, 1 / 8.0]),
                                  K=np.array([[2.0, 0.7], [0.7, 1.0]]),
                                  k=2, rng=rng)
        assert max(res.values()) <= 1e-9

    def test_rotation_keeps_inner_products(self, rng):
        th = 0.93
        rot = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
        mesh = hs.generate_cartesian(2)
        res = hs.verify_transport(mesh, 2, phi=rot, K=np.diag([1e3, 1.0]),
                                  k=1, rng=rng)
        assert res["trans_norm"] <= 1e-12
        assert res["trans_norm_F"] <= 1e-12


class TestComputeErrorReport:
    def test_matches_standalone_errors(self):
        # the fused pass and the standalone ops interpolate with different
        # quadrature exactness; agreement is to interpolation accuracy
        mesh, sol, uh = small_solved_case(k=1, n=4)
        rep = hs.compute_error_report(mesh, IDENTITY, 1, sol, uh)
        ih = hs.global_interpolate(sol, mesh, 1)
        assert rep.energy_error == pytest.approx(
            hs.energy_error(uh, ih, mesh, IDENTITY, 1), rel=1e-5)
        assert rep.h1_error == pytest.approx(
            hs.h1_error(uh, ih, mesh, 1), rel=1e-5)
        assert rep.l2_error == pytest.approx(
            hs.l2_error(uh, sol, mesh, 1), rel=1e-6)
        assert rep.n_edge_dofs == 2 * mesh.n_interior_edges
        assert rep.flatness == pytest.approx(2 * np.sqrt(2), rel=1e-12)


class TestSkewnessDiagnostics:
    def test_summary_fields(self):
        mesh = hs.generate_hexagonal(3, 4.0)
        field = hs.DiffusionField.diagonal(1e6, 1.0)
        diag = hs.skewness_diagnostics(mesh, field)
        assert diag.fl_h == pytest.approx(hs.flatness(mesh)[0])
        assert diag.max_factor == diag.factor.max()
        assert np.all(diag.ratio >= 1.0)
        assert np.all(diag.khat_max >= diag.khat_min)
