"""Weight-2 cusp forms: coefficients, evaluation, Petersson products,
orthonormalization, and the canonical density."""

import math

import numpy as np
import pytest

from keyid.cuspforms import (
    QExpansion,
    canonical_density,
    canonical_density_many,
    canonical_mass,
    data_dir,
    eta_product_basis,
    eta_product_coefficients,
    evaluate,
    evaluate_lifted,
    fricke_eps,
    generate_level37_table,
    get_basis,
    orthonormalize,
    petersson_gram,
    read_table,
    series_eval_many,
    write_table,
)
from keyid.errors import DomainError, UnsupportedLevelError
from keyid.fuchsian import GroupSpec
from keyid.hypgeom import Point, apply

from conftest import random_gamma0


def naive_eta_product_to_order_six() -> list[int]:
    """Independent convolution oracle: q prod (1-q^n)^2 (1-q^{11n})^2
    multiplied out by hand to order q^6."""
    order = 6
    poly = [0] * (order + 1)
    poly[0] = 1
    factors = []
    for n in range(1, order + 1):
        factors += [n, n]  # (1 - q^n)^2
    factors += [0]  # placeholder keeps the loop structure obvious
    for n in factors[:-1]:
        new = poly[:]
        for i in range(order + 1 - n):
            new[i + n] -= poly[i]
        poly = new
    # (1 - q^{11n})^2 contributes nothing below q^7
    return [0] + poly[: order]  # multiply by q: a_n = poly[n-1]


class TestEtaCoefficients:
    def test_normalized(self):
        f = eta_product_basis(11)[0]
        assert f.coeffs[0] == 1  # a_1

    def test_low_coefficients_against_convolution_oracle(self):
        oracle = naive_eta_product_to_order_six()
        coeffs = eta_product_coefficients(11, 16)
        for n in range(1, 7):
            assert coeffs[n - 1] == oracle[n]
        assert coeffs[1] == -2  # a_2
        assert coeffs[4] == 1   # a_5

    def test_unsupported_levels(self):
        with pytest.raises(UnsupportedLevelError):
            eta_product_basis(13)
        with pytest.raises(UnsupportedLevelError):
            eta_product_coefficients(37)


class TestLevel37Table:
    def test_curve_discriminants(self):
        # conductor checks: the two isogeny classes at 37 have
        # discriminants 37 and 37^3
        from keyid.cuspforms import _CURVES_37

        discs = []
        for a1, a2, a3, a4, a6 in _CURVES_37:
            b2 = a1 * a1 + 4 * a2
            b4 = 2 * a4 + a1 * a3
            b6 = a3 * a3 + 4 * a6
            b8 = (b2 * b6 - b4 * b4) // 4
            discs.append(-b2 * b2 * b8 - 8 * b4**3 - 27 * b6 * b6 + 9 * b2 * b4 * b6)
        assert sorted(discs) == [37, 37**3]

    def test_shipped_table_matches_generator(self):
        _, rows = read_table(data_dir() / "level37_weight2.txt")
        regen = generate_level37_table(len(rows[0]))
        assert rows == regen

    def test_forms_independent(self):
        f, g = eta_product_basis(37)
        assert f.coeffs[0] == g.coeffs[0] == 1
        assert f.coeffs[1] != g.coeffs[1]

    def test_table_round_trip(self, tmp_path):
        rows = [[1, -2, 3], [0, 5, -7]]
        path = tmp_path / "t.txt"
        write_table(path, 99, rows)
        level, back = read_table(path)
        assert level == 99 and back == rows


class TestHeckeOracle:
    @pytest.mark.parametrize("level,p", [(11, 2), (11, 3), (37, 2), (37, 3)])
    def test_tp_eigenvalue(self, level, p):
        """(T_p f)(z) = p f(pz) + (1/p) sum_j f((z+j)/p) equals a_p f(z)."""
        z = complex(0.21, 1.1)
        for f in eta_product_basis(level):
            val = p * series_eval_many(f, np.array([p * z]))[0]
            val += sum(
                series_eval_many(f, np.array([(z + j) / p]))[0] for j in range(p)
            ) / p
            ref = f.coeffs[p - 1] * series_eval_many(f, np.array([z]))[0]
            assert abs(val - ref) <= 1e-10 * max(1.0, abs(ref))


class TestEvaluate:
    def test_high_point_dominated_by_first_term(self):
        f = eta_product_basis(11)[0]
        res = evaluate(f, Point(0.3, 10.0))
        assert abs(res.value) <= 2.0 * math.exp(-20.0 * math.pi)

    def test_periodicity(self):
        f = eta_product_basis(11)[0]
        a = evaluate(f, Point(0.3, 1.1)).value
        b = evaluate(f, Point(1.3, 1.1)).value
        assert abs(a - b) <= 1e-14 * abs(a)

    def test_below_floor_rejected(self):
        f = eta_product_basis(11)[0]
        with pytest.raises(DomainError):
            evaluate(f, Point(0.0, 0.1))

    def test_weight_two_covariance(self, rng):
        for level in (11, 37):
            forms = eta_product_basis(level)
            checked = 0
            while checked < 100:
                g = random_gamma0(level, rng, entry_bound=3)
                z = Point(float(rng.uniform(-0.5, 0.5)),
                          float(rng.uniform(0.4, 2.0)))
                gz = apply(g, z)
                if gz.y < 0.25:
                    continue
                checked += 1
                for f in forms:
                    lhs = series_eval_many(f, np.array([gz.z]))[0]
                    rhs = (g.c * z.z + g.d) ** 2 * series_eval_many(
                        f, np.array([z.z])
                    )[0]
                    assert abs(lhs - rhs) <= 1e-8 * abs(rhs)

    def test_truncation_bound_at_spec_height(self):
        f64 = QExpansion(11, tuple(eta_product_coefficients(11, 64)))
        from keyid.cuspforms import _series_tail

        assert _series_tail(f64, 0.8) < 1e-12

    def test_lifted_matches_cocycle_transport(self, spec11):
        f = eta_product_basis(11)[0]
        from keyid.hypgeom import GroupElement

        g = GroupElement(1, 0, 11, 1)
        z_high = Point(0.3, 1.7)
        z_low = apply(g.inverse(), z_high)
        lifted = evaluate_lifted(spec11, f, z_low)
        expect = series_eval_many(f, np.array([z_high.z]))[0]
        expect /= (g.c * z_low.z + g.d) ** 2
        assert abs(lifted.value - expect) <= 1e-12 * abs(expect)


class TestFricke:
    def test_eta_product_eigenvalue_is_minus_one(self):
        # exact from eta(-1/tau) = sqrt(-i tau) eta(tau)
        assert fricke_eps(eta_product_basis(11)[0]) == -1.0

    def test_level37_eigenvalues(self):
        eps = [fricke_eps(f) for f in eta_product_basis(37)]
        assert sorted(eps) == [-1.0, 1.0]

    def test_zero_form_convention(self):
        assert fricke_eps(QExpansion(11, (0.0,) * 8)) == 1.0


class TestPetersson:
    def test_zero_form(self, spec11):
        z = QExpansion(11, (0.0,) * 64)
        G = petersson_gram(spec11, (z,))
        assert abs(G[0, 0]) < 1e-30

    def test_scaling(self, spec11):
        f = eta_product_basis(11)[0]
        G1 = petersson_gram(spec11, (f,))
        G2 = petersson_gram(spec11, (f.scaled(2.0),))
        np.testing.assert_allclose(G2, 4.0 * G1, rtol=1e-12)

    @pytest.mark.parametrize("level", [11, 37])
    def test_dual_quadrature_strategies_agree(self, level):
        spec = GroupSpec(level)
        forms = eta_product_basis(level)
        G_a = petersson_gram(spec, forms)
        G_b = petersson_gram(spec, forms, y_cut=1.0, n_u=20, n_v=10,
                             v_ratio=1.3, add_tails=False)
        scale = np.max(np.abs(G_a))
        assert np.max(np.abs(G_a - G_b)) <= 1e-4 * scale

    @pytest.mark.parametrize("level", [11, 37])
    def test_gram_positive_definite(self, level):
        G = get_basis(level).gram
        np.linalg.cholesky(G)  # raises if not PD

    @pytest.mark.parametrize("level", [11, 37])
    def test_orthonormalized_identity(self, level):
        basis = get_basis(level)
        # recompute the Gram independently (different cut and resolution)
        G_indep = petersson_gram(basis.spec, basis.forms, y_cut=1.8,
                                 n_u=20, n_v=10)
        G_on = basis.ortho @ G_indep @ basis.ortho.T
        assert np.max(np.abs(G_on - np.eye(basis.genus))) <= 1e-6

    def test_gram_schmidt_rejects_degenerate(self):
        with pytest.raises(DomainError):
            orthonormalize(np.array([[1.0, 1.0], [1.0, 1.0]]))


class TestCanonicalDensity:
    def test_nonnegative_on_grid(self):
        basis = get_basis(11)
        xs = np.linspace(-0.5, 0.5, 50)
        ys = np.geomspace(0.08, 4.0, 50)
        zs = (xs[None, :] + 1j * ys[:, None]).ravel()
        assert np.all(canonical_density_many(basis, zs) >= 0.0)

    @pytest.mark.parametrize("level,tol", [(11, 1e-3), (37, 3e-3)])
    def test_unit_mass(self, level, tol):
        assert abs(canonical_mass(get_basis(level)) - 1.0) <= tol

    def test_group_invariance(self, rng):
        basis = get_basis(11)
        spec = GroupSpec(11)
        for _ in range(12):
            g = random_gamma0(11, rng, entry_bound=3)
            z = Point(float(rng.uniform(-0.5, 0.5)), float(rng.uniform(0.3, 1.5)))
            c1 = canonical_density(basis, z)
            c2 = canonical_density(basis, apply(g, z))
            assert abs(c1 - c2) <= 1e-8 * max(c1, 1e-12)

    def test_cusp_decay_bound(self):
        basis = get_basis(11)
        coeffs = basis.orthonormal_coeffs()[0]
        const = sum(
            abs(a) * math.exp(-4.0 * math.pi * (n - 1)) for n, a in
            enumerate(coeffs, start=1)
        ) ** 2
        for y in (2.0, 3.0, 5.0, 8.0):
            c = canonical_density(basis, Point(0.25, y))
            assert c <= const * y * y * math.exp(-4.0 * math.pi * y) * (1 + 1e-9)
