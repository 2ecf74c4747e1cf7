import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from selentropy import constants as C
from selentropy.errors import DomainError
from selentropy.numerics import digamma

# 30-digit mpmath quadrature, frozen
C2_REF = {1.0: 0.11593151565841245, 2.0: 0.86593151565841245, 5.0: 1.7692518281584124}
C3_REF = {1.0: -1.2703628454614782, 2.0: -0.02036284546147817, 5.0: 1.2429835087051885}
BETA0_REF = {1.0: 0.58827250712297105, 2.0: 0.86001182067274396, 5.0: 1.3593829287343689}
BETA1_REF = {1.0: -0.31740997205058082, 2.0: -0.55920977128463857, 5.0: -1.0459752629743438}
CSTAR_WORSE_REF = {(2.0, 1.0): 0.059298503393279958, (5.0, 1.0): -0.12665445603522817,
                   (3.0, 0.5): -0.88662353528992177}
CSTAR_BETTER_REF = {(0.5, 1.0): -1.2137298331963457, (0.2, 1.0): -1.0277768737678375,
                    (1 / 3, 0.5): -3.0403965167529247}

LOG_GRID = np.geomspace(0.1, 100.0, 50)


def scipy_c2(a):
    f = lambda z: 2 * math.log(z) * special.gammainc(a, z) * math.exp(special.xlogy(a - 1, z) - z - special.gammaln(a))  # noqa: E731
    return sum(integrate.quad(f, lo, hi, limit=400, epsabs=1e-13)[0] for lo, hi in ((0, a), (a, np.inf)))


class TestC1C2C3:
    @pytest.mark.parametrize("a,expected", [(0.2, -5.289), (1.0, -0.577), (20.0, 2.970)])
    def test_c1_table(self, a, expected):
        assert C.c1(a) == pytest.approx(expected, abs=1e-3)

    @pytest.mark.parametrize("a,expected", [(1.0, 0.115), (2.0, 0.865), (0.2, -2.682)])
    def test_c2_table(self, a, expected):
        assert C.c2(a) == pytest.approx(expected, abs=1e-3)

    @pytest.mark.parametrize("a", sorted(C2_REF))
    def test_c2_c3_reference(self, a):
        assert C.c2(a) == pytest.approx(C2_REF[a], abs=1e-10)
        assert C.c3(a) == pytest.approx(C3_REF[a], abs=1e-10)

    @pytest.mark.parametrize("a", [0.2, 0.7, 3.3, 40.0])
    def test_c2_against_scipy_quad(self, a):
        assert C.c2(a) == pytest.approx(scipy_c2(a), abs=1e-8)

    def test_c3_examples(self):
        assert C.c3(1.0) == pytest.approx(2 * digamma(1.0) - C.c2(1.0), abs=1e-12)
        assert C.c3(2.0) == pytest.approx(2 * digamma(2.0) - C2_REF[2.0], abs=1e-12)
        assert C.c3(2.0) == pytest.approx(-0.020363, abs=1e-6)

    @pytest.mark.parametrize("a", LOG_GRID)
    def test_identity(self, a):
        assert abs(C.c2(a) + C.c3(a) - 2 * digamma(a)) <= 1e-9

    @pytest.mark.parametrize("a", LOG_GRID)
    def test_chain(self, a):
        row = C.ConstantsRow.compute(a)
        assert row.c1 < row.psi2a_minus_ln2 < row.c2 < digamma(2 * a)
        assert row.c3 < row.c1
        assert 0 < row.beta0 < a
        assert -a < row.beta1 < 0

    def test_domain(self):
        for f in (C.c1, C.c2, C.c3, C.beta0, C.beta1):
            with pytest.raises(DomainError):
                f(-1.0)


class TestBeta:
    @pytest.mark.parametrize("a,expected", [(1.0, 0.588), (2.0, 0.86)])
    def test_beta0_table(self, a, expected):
        assert C.beta0(a) == pytest.approx(expected, abs=1e-3)

    @pytest.mark.parametrize("a", sorted(BETA0_REF))
    def test_reference(self, a):
        assert C.beta0(a) == pytest.approx(BETA0_REF[a], abs=1e-9)
        assert C.beta1(a) == pytest.approx(BETA1_REF[a], abs=1e-9)

    @pytest.mark.parametrize("a", [0.3, 1.0, 4.0, 25.0])
    def test_beta1_roundtrip(self, a):
        assert digamma(a + C.beta1(a)) == pytest.approx(C.c3(a), abs=1e-9)

    def test_beta1_bisection_oracle(self):
        target = C.c3(1.0)
        lo, hi = 1e-6, 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if special.digamma(mid) < target else (lo, mid)
        assert C.beta1(1.0) == pytest.approx(lo - 1.0, abs=1e-9)


class TestCStar:
    @pytest.mark.parametrize("a", [0.3, 1.0, 6.0])
    def test_worse_at_one(self, a):
        assert C.c_star_worse(1.0, a) == pytest.approx(C.c2(a), abs=1e-10)

    @pytest.mark.parametrize("a", [1.0, 6.0])
    def test_worse_limit(self, a):
        assert C.c_star_worse(1e6, a) == pytest.approx(C.c1(a), abs=1e-3)

    def test_worse_limit_is_slow_for_small_shape(self):
        # the gap to c1 decays like mu**-alpha; scipy.integrate.quad oracle
        assert C.c_star_worse(1e6, 0.3) == pytest.approx(-3.35177111811421, abs=1e-9)

    @pytest.mark.parametrize("key", sorted(CSTAR_WORSE_REF))
    def test_worse_reference(self, key):
        assert C.c_star_worse(*key) == pytest.approx(CSTAR_WORSE_REF[key], abs=1e-9)

    def test_worse_derivative(self):
        h = 1e-4
        fd = (C.c_star_worse(2 + h, 1.0) - C.c_star_worse(2 - h, 1.0)) / (2 * h)
        assert fd == pytest.approx(C.c_star_worse_derivative(2.0, 1.0), abs=1e-6)

    @pytest.mark.parametrize("a", [0.5, 2.0])
    def test_worse_decreasing(self, a):
        vals = [C.c_star_worse(mu, a) for mu in np.geomspace(1, 1e3, 25)]
        assert np.all(np.diff(vals) < 0)

    @pytest.mark.parametrize("a", [0.3, 1.0, 6.0])
    def test_better_at_one(self, a):
        assert C.c_star_better(1.0, a) == pytest.approx(C.c3(a), abs=1e-10)

    @pytest.mark.parametrize("a", [1.0, 6.0])
    def test_better_limit(self, a):
        assert C.c_star_better(1e-6, a) == pytest.approx(C.c1(a), abs=1e-3)

    @pytest.mark.parametrize("key", sorted(CSTAR_BETTER_REF))
    def test_better_reference(self, key):
        assert C.c_star_better(*key) == pytest.approx(CSTAR_BETTER_REF[key], abs=1e-9)

    @pytest.mark.parametrize("a", [0.5, 1.0, 3.0])
    def test_better_monotone(self, a):
        vals = [C.c_star_better(th, a) for th in np.linspace(0.1, 1.0, 10)]
        assert np.all(np.diff(vals) <= 0)

    def test_better_derivative(self):
        h = 1e-4
        fd = (C.c_star_better(0.5 + h, 1.0) - C.c_star_better(0.5 - h, 1.0)) / (2 * h)
        assert fd == pytest.approx(C.c_star_better_derivative(0.5, 1.0), abs=1e-6)

    def test_domain(self):
        with pytest.raises(DomainError):
            C.c_star_worse(0.5, 1.0)
        with pytest.raises(DomainError):
            C.c_star_better(1.5, 1.0)
        with pytest.raises(DomainError):
            C.c_star_better(0.0, 1.0)


def direct_k(t, mu, a):
    p, q = (1 + t * mu) ** (2 * a), (mu + t) ** (2 * a)
    return (p * math.log(1 + t / mu) + q * math.log(1 + t * mu)) / (p + q)


class TestKernels:
    @given(st.floats(0.01, 1.0), st.floats(0.05, 50.0))
    def test_k_worse_at_one(self, t, a):
        assert C.k_worse(t, 1.0, a) == pytest.approx(math.log1p(t), abs=1e-14)

    @given(st.floats(1.0, 50.0), st.floats(0.05, 10.0))
    def test_k_worse_t_one(self, mu, a):
        assert C.k_worse(1.0, mu, a) == pytest.approx(0.5 * (math.log1p(1 / mu) + math.log1p(mu)), abs=1e-13)

    @given(st.floats(0.01, 1.0), st.floats(1.0, 30.0), st.floats(0.1, 5.0))
    def test_k_worse_direct_formula(self, t, mu, a):
        assert C.k_worse(t, mu, a) == pytest.approx(direct_k(t, mu, a), rel=1e-11, abs=1e-13)

    def test_k_worse_no_overflow(self):
        val = C.k_worse(0.5, 1e4, 500.0)
        assert math.isfinite(val) and val >= math.log1p(0.5)

    def test_k_worse_grid_minimum(self):
        mus = np.geomspace(1, 1e4, 200)
        assert min(C.k_worse(0.5, mus, 2.0)) == pytest.approx(math.log(1.5), abs=1e-6)

    @pytest.mark.parametrize("a", [0.2, 1.0, 5.0, 50.0])
    def test_k_worse_infimum(self, a):
        mus = np.geomspace(1, 1e4, 200)
        for t in np.linspace(0.01, 1.0, 40):
            assert np.all(C.k_worse(t, mus, a) >= math.log1p(t) - 1e-14)

    @given(st.floats(1.0, 5.0), st.floats(0.05, 10.0))
    def test_k_better_at_one(self, v, a):
        assert C.k_better(v, 1.0, a) == pytest.approx(math.log1p(v), abs=1e-14)

    def test_k_better_grid_minimum(self):
        th = np.geomspace(1e-4, 1, 200)
        assert min(C.k_better(1.2, th, 1.0)) == pytest.approx(math.log(2.2), abs=1e-6)

    def test_k_better_unbounded(self):
        vals = [C.k_better(1.2, th, 1.0) for th in np.geomspace(1e-2, 1e-12, 6)]
        assert np.all(np.diff(vals) > 0)
        # leading behaviour ln(v / theta) / (1 + v**(2 alpha))
        assert vals[-1] == pytest.approx(math.log(1.2 / 1e-12) / (1 + 1.2 ** 2), rel=1e-2)

    @pytest.mark.parametrize("a", [0.1, 0.5, 1.0, 3.0, 24.0])
    def test_k_better_infimum(self, a):
        th = np.geomspace(1e-4, 1, 200)
        for v in np.linspace(1.0, C.lambda_threshold(a), 25):
            assert np.all(C.k_better(v, th, a) >= math.log1p(v) - 1e-14)

    def test_domain(self):
        with pytest.raises(DomainError):
            C.k_worse(1.5, 2.0, 1.0)
        with pytest.raises(DomainError):
            C.k_worse(0.5, 0.5, 1.0)
        with pytest.raises(DomainError):
            C.k_better(0.5, 0.5, 1.0)


class TestThresholds:
    def test_lambda(self):
        assert C.lambda_threshold(1.0) == 1.5
        assert C.lambda_threshold(0.1) == pytest.approx(1 + math.sqrt(3))
        assert C.lambda_threshold(24.0) == pytest.approx(1 + 1 / 48)

    def test_phi_star_worse(self):
        assert C.phi_star_worse(1.0, 1.0) == pytest.approx(-0.270, abs=1e-3)
        assert C.phi_star_worse(1.0, 2.0) == pytest.approx(0.562, abs=1e-3)
        assert C.phi_star_worse(1e-12, 3.0) == pytest.approx(digamma(6.0), abs=1e-11)

    def test_phi_star_better(self):
        assert C.phi_star_better(1.0, 2.0) == C.phi_star_worse(1.0, 2.0)
        assert C.phi_star_better(1.347628, 24.0) == pytest.approx(digamma(48.0) - math.log(2.347628), abs=1e-14)
        assert C.phi_star_better(1e300, 1.0) < -600


class TestConditionalPdf:
    @pytest.mark.parametrize("t,mu,a", [(0.5, 2.0, 1.0), (0.1, 10.0, 0.3), (0.9, 1.5, 8.0), (1.0, 1.0, 2.0)])
    def test_worse_normalisation_and_mean(self, t, mu, a):
        pdf = lambda u: C.conditional_pdf_worse(u, t, mu, a)  # noqa: E731
        assert C.conditional_moment(pdf, order=0) == pytest.approx(1.0, abs=1e-8)
        assert C.conditional_moment(pdf, order=1) == pytest.approx(digamma(2 * a) - C.k_worse(t, mu, a), abs=1e-8)

    @pytest.mark.parametrize("v,th,a", [(1.2, 0.5, 1.0), (3.0, 0.1, 0.3), (1.01, 0.9, 8.0)])
    def test_better_normalisation_and_mean(self, v, th, a):
        pdf = lambda u: C.conditional_pdf_better(u, v, th, a)  # noqa: E731
        assert C.conditional_moment(pdf, order=0) == pytest.approx(1.0, abs=1e-8)
        assert C.conditional_moment(pdf, order=1) == pytest.approx(digamma(2 * a) - C.k_better(v, th, a), abs=1e-8)

    def test_mu_one_gumbel_form(self):
        t, a = 0.4, 1.5
        u = np.linspace(-5, 3, 17)
        expected = np.exp(2 * a * u - (1 + t) * np.exp(u) + 2 * a * math.log1p(t) - special.gammaln(2 * a))
        np.testing.assert_allclose(C.conditional_pdf_worse(u, t, 1.0, a), expected, rtol=1e-12)


class TestTable:
    def test_rows_and_csv(self):
        rows = C.generate_table([0.2, 1.0, 2.0])
        assert [r.alpha for r in rows] == [0.2, 1.0, 2.0]
        buf = io.StringIO()
        C.write_table_csv(rows, buf)
        lines = buf.getvalue().splitlines()
        assert lines[0].split(",") == list(C.COLUMNS)
        back = [float(x) for x in lines[2].split(",")]
        assert back == [getattr(rows[1], c) for c in C.COLUMNS]

    def test_parallel_matches_serial(self):
        alphas = [0.2, 0.5, 1.0, 3.0, 9.0]
        assert C.generate_table(alphas, workers=4) == C.generate_table(alphas, workers=1)

    def test_format(self):
        rows = C.generate_table([1.0])
        cells = C.format_table(rows).splitlines()[1].split()
        assert cells[1:3] == ["-0.577", "0.115"] and cells[4] == "0.000"
        assert C.format_table(rows, truncate=False).splitlines()[1].split()[2] == "0.116"

    def test_crossover_ln_alpha(self):
        assert C.crossover_ln_alpha() == pytest.approx(0.6337221698, abs=1e-8)

    def test_crossover_ln_alpha_plus_1(self):
        # 30-digit mpmath root of c2(a) = ln(a+1)
        assert C.crossover_ln_alpha_plus_1() == pytest.approx(6.0748147121, abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 200.0))
def test_identity_property(a):
    assert abs(C.c2(a) + C.c3(a) - 2 * digamma(a)) <= 1e-9
