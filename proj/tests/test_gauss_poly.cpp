#include <doctest.h>

#include "abclim/gauss_history.hpp"
#include "abclim/gauss_poly.hpp"
#include "abclim/rng.hpp"

#include <Eigen/Cholesky>

#include <cmath>

using namespace abclim;

namespace {

GaussianPoly var(int i, double c = 1.0) { return GaussianPoly::variable(i, c); }

}  // namespace

TEST_CASE("isserlis small cases") {
    Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
    const int k4[] = {4};
    CHECK(isserlis(k4, one) == 3.0);
    const int k3[] = {3};
    CHECK(isserlis(k3, one) == 0.0);
    const int k6[] = {6};
    CHECK(isserlis(k6, one) == 15.0);

    for (double rho : {0.0, 0.3, -0.8}) {
        Eigen::MatrixXd c(2, 2);
        c << 1, rho, rho, 1;
        const int k22[] = {2, 2};
        CHECK(isserlis(k22, c) == doctest::Approx(1 + 2 * rho * rho));
        const int k11[] = {1, 1};
        CHECK(isserlis(k11, c) == doctest::Approx(rho));
        const int k21[] = {2, 1};
        CHECK(isserlis(k21, c) == 0.0);
    }
    const int k40[] = {40};
    CHECK_THROWS_AS(isserlis(k40, one, 32), std::length_error);
}

TEST_CASE("isserlis agrees with Monte Carlo on random covariances") {
    Rng rng(8);
    for (int trial = 0; trial < 6; ++trial) {
        const int dim = 2 + trial % 3;
        Eigen::MatrixXd A(dim, dim);
        for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = rng.normal();
        Eigen::MatrixXd cov = A * A.transpose() / dim + 0.2 * Eigen::MatrixXd::Identity(dim, dim);
        std::vector<int> k(static_cast<std::size_t>(dim));
        int tot = 0;
        for (auto& v : k) {
            v = static_cast<int>(rng.below(3));
            tot += v;
        }
        if (tot % 2) k[0] += 1;
        const double exact = isserlis(k, cov);
        Eigen::MatrixXd L = cov.llt().matrixL();
        const int M = 200000;
        double s = 0.0, s2 = 0.0;
        for (int m = 0; m < M; ++m) {
            Eigen::VectorXd z(dim);
            for (int i = 0; i < dim; ++i) z[i] = rng.normal();
            const Eigen::VectorXd x = L * z;
            double v = 1.0;
            for (int i = 0; i < dim; ++i) v *= std::pow(x[i], k[static_cast<std::size_t>(i)]);
            s += v;
            s2 += v * v;
        }
        const double mean = s / M;
        const double se = std::sqrt((s2 / M - mean * mean) / M);
        CHECK(std::abs(mean - exact) <= 4 * se + 1e-12);
    }
}

TEST_CASE("poly expectations") {
    GaussianBasis basis;
    basis.add_independent();
    CHECK(poly_expect(GaussianPoly::constant(2.5), basis) == 2.5);
    CHECK(poly_expect(var(0), basis) == 0.0);

    GaussianBasis corr;
    corr.add_independent();
    const double rho = 0.4;
    const double row[] = {rho};
    corr.add(row, 1.0);
    CHECK_FALSE(corr.is_identity());
    CHECK(poly_expect(multiply(var(0), var(1)), corr) == doctest::Approx(rho));
}

TEST_CASE("act_compose") {
    const GaussianPoly p = var(0, 2.0) + var(1, 3.0);
    CHECK(act_compose(p, Activation{}, 0).terms() == p.terms());
    Activation quad = Activation::parse("quadratic");
    const GaussianPoly sq = act_compose(p, quad, 0);
    Monomial m00{}, m01{}, m11{};
    m00[0] = 2;
    m01[0] = 1;
    m01[1] = 1;
    m11[1] = 2;
    CHECK(sq.size() == 3);
    CHECK(sq.coefficient(m00) == 4.0);
    CHECK(sq.coefficient(m01) == 12.0);
    CHECK(sq.coefficient(m11) == 9.0);
    CHECK(act_compose(p, quad, 1).terms() == (2.0 * p).terms());
    CHECK_THROWS(act_compose(p, Activation::parse("tanh"), 0));

    PolyLimits tight;
    tight.term_cap = 2;
    CHECK_THROWS_AS(act_compose(p, quad, 0, tight), std::length_error);
}

TEST_CASE("hermite route equals direct pairing") {
    Rng rng(5);
    auto random_poly = [&](int deg, int nvars) {
        GaussianPoly p;
        for (int i = 0; i < 30; ++i) {
            Monomial m{};
            int left = static_cast<int>(rng.below(static_cast<std::uint64_t>(deg + 1)));
            while (left > 0) {
                m[rng.below(static_cast<std::uint64_t>(nvars))] += 1;
                --left;
            }
            p.add_term(m, rng.normal());
        }
        return p;
    };
    for (int trial = 0; trial < 10; ++trial) {
        const auto p = random_poly(8, 4);
        const auto q = random_poly(7, 4);
        const double direct = unit_expect(multiply(p, q));
        const double herm = hermite_dot(hermite_coefficients(p), hermite_coefficients(q));
        CHECK(herm == doctest::Approx(direct).epsilon(1e-10));
        CHECK(unit_expect_product(p, q) == doctest::Approx(direct).epsilon(1e-10));
    }
}

TEST_CASE("derivative and evaluate") {
    const GaussianPoly p = multiply(var(0), multiply(var(0), var(1))) + 3.0 * var(1);
    const GaussianPoly d0 = p.derivative(0);
    const double at[] = {2.0, -1.0};
    CHECK(d0.evaluate(at) == doctest::Approx(2 * 2.0 * -1.0));
    CHECK(p.derivative(1).evaluate(at) == doctest::Approx(4.0 + 3.0));
    GaussianPoly z = p - p;
    CHECK(z.is_zero());
}

TEST_CASE("gaussian history") {
    GaussianHistory hist;
    const auto r0 = hist.extend("a", {}, 2.0);
    CHECK(r0[0] == doctest::Approx(std::sqrt(2.0 + 1e-10)));
    const double dup[] = {2.0};
    const auto r1 = hist.extend("a again", dup, 2.0);
    // perfectly correlated up to jitter
    const double corr = r1[0] / std::sqrt(r1[0] * r1[0] + r1[1] * r1[1]);
    CHECK(corr > 1 - 1e-6);
    Eigen::MatrixXd recon = hist.chol() * hist.chol().transpose();
    CHECK((recon - hist.cov() - hist.jitter() * Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-8);

    GaussianHistory bad;
    bad.extend("x", {}, 1.0);
    const double too_big[] = {2.0};
    CHECK_THROWS_AS(bad.extend("y", too_big, 1.0), std::domain_error);

    GaussianHistory::Options ex;
    ex.exact = true;
    GaussianHistory exact(ex);
    exact.extend("x", {}, 1.0);
    const double same[] = {1.0};
    const auto r = exact.extend("x dup", same, 1.0);
    CHECK(r[0] == doctest::Approx(1.0));
    CHECK(r[1] == 0.0);
    CHECK_FALSE(exact.has_pivot(1));
}
