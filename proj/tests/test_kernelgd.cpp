#include <doctest.h>

#include "abclim/kernelgd.hpp"
#include "abclim/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace abclim;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double e : v) x(i++) = e;
    return x;
}

// arc-cosine kernels of order 1 (relu) and 0 (step) for h ~ N(0, [[xx,xy],[xy,yy]])
double relu_cov(double xx, double xy, double yy) {
    const double nx = std::sqrt(xx), ny = std::sqrt(yy);
    const double th = std::acos(std::clamp(xy / (nx * ny), -1.0, 1.0));
    return nx * ny / (2 * std::numbers::pi) * (std::sin(th) + (std::numbers::pi - th) * std::cos(th));
}
double step_cov(double xx, double xy, double yy) {
    const double th = std::acos(std::clamp(xy / std::sqrt(xx * yy), -1.0, 1.0));
    return (std::numbers::pi - th) / (2 * std::numbers::pi);
}

const Activation kIdentity{ActKind::identity};
const Activation kRelu{ActKind::relu};

}  // namespace

TEST_CASE("sigma for identity is the input inner product") {
    const auto xi = vec({0.3, -1.2, 0.7});
    const auto zeta = vec({1.1, 0.4, -0.5});
    const AbcParam p = named_param("NTP", 2);
    for (int m = 0; m <= 2; ++m)
        for (int l = std::max(m, 1); l <= 2; ++l)
            CHECK(sigma_ml(m, l, xi, zeta, p, kIdentity).mean == doctest::Approx(xi.dot(zeta)).epsilon(1e-12));
}

TEST_CASE("relu sigma against arc-cosine closed forms") {
    const auto xi = vec({0.8, -0.2});
    const auto zeta = vec({0.1, 1.3});
    const AbcParam p = named_param("NTP", 2);
    CHECK(sigma_ml(0, 1, xi, xi, p, kRelu).mean == doctest::Approx(xi.squaredNorm() / 2).epsilon(1e-12));

    const double xx = xi.squaredNorm(), yy = zeta.squaredNorm(), xy = xi.dot(zeta);
    const double c1 = relu_cov(xx, xy, yy), d1 = step_cov(xx, xy, yy);
    const double c1x = xx / 2, c1y = yy / 2;
    const double c2 = relu_cov(c1x, c1, c1y), d2 = step_cov(c1x, c1, c1y);
    // quadrature on the relu kink converges slowly; 64 nodes give ~1e-3
    const double tol = 3e-3;
    CHECK(sigma_ml(1, 1, xi, zeta, p, kRelu).mean == doctest::Approx(c1).epsilon(tol));
    CHECK(sigma_ml(0, 1, xi, zeta, p, kRelu).mean == doctest::Approx(xy * d1).epsilon(tol));
    CHECK(sigma_ml(2, 2, xi, zeta, p, kRelu).mean == doctest::Approx(c2).epsilon(tol));
    CHECK(sigma_ml(1, 2, xi, zeta, p, kRelu).mean == doctest::Approx(c1 * d2).epsilon(tol));
    CHECK(sigma_ml(0, 2, xi, zeta, p, kRelu).mean == doctest::Approx(xy * d1 * d2).epsilon(tol));
}

TEST_CASE("tanh quadrature converges and Monte Carlo agrees") {
    const auto xi = vec({0.9, 0.5});
    const auto zeta = vec({-0.3, 1.0});
    const AbcParam p = named_param("NTP", 2);
    const Activation th{ActKind::tanh};
    const double q64 = sigma_ml(0, 2, xi, zeta, p, th).mean;
    const double q128 = sigma_ml(0, 2, xi, zeta, p, th, GaussQuad{128, 0, 0}).mean;
    const double q200 = sigma_ml(0, 2, xi, zeta, p, th, GaussQuad{200, 0, 0}).mean;
    // tanh has poles at +-i pi/2, so convergence is geometric but not fast
    CHECK(q64 == doctest::Approx(q200).epsilon(1e-7));
    CHECK(q128 == doctest::Approx(q200).epsilon(1e-10));
    const Estimate mc = sigma_ml(1, 1, xi, zeta, p, th, GaussQuad{64, 400000, 5});
    const double q11 = sigma_ml(1, 1, xi, zeta, p, th).mean;
    CHECK(mc.stderr > 0.0);
    CHECK(std::abs(mc.mean - q11) < 4 * mc.stderr);
}

TEST_CASE("kernel weights") {
    const KernelWeights ntp = kernel_weights(named_param("NTP", 3));
    CHECK(ntp.last_layer);
    CHECK(ntp.through_layers);
    CHECK(ntp.ell == 1);
    CHECK(ntp.vartheta[1]);
    CHECK(ntp.vartheta[2]);
    CHECK(ntp.vartheta[3]);
    CHECK_FALSE(ntp.lag_case);

    // SP at the stable c = 1: the first layer updates more slowly than the others
    const KernelWeights sp = kernel_weights(named_param("SP", 2));
    CHECK(sp.last_layer);
    CHECK(sp.through_layers);
    CHECK(sp.ell == 2);
    CHECK(sp.vartheta[2]);

    // slow middle layer: W^2 lags W^3, so m = 1 drops out of the sum
    AbcParam slow = named_param("NTP", 3);
    slow.a_at(2) = Rational(1);
    const KernelWeights sw = kernel_weights(slow);
    CHECK(sw.ell == 1);
    CHECK(sw.vartheta[1]);
    CHECK_FALSE(sw.vartheta[2]);
    CHECK(sw.vartheta[3]);
}

TEST_CASE("NTP shallow linear kernel is twice the inner product") {
    const std::vector<Eigen::VectorXd> xs{vec({1, 0}), vec({0.5, -2}), vec({-1, 1})};
    const KernelTable K = limit_kernel(named_param("NTP", 1), kIdentity, xs);
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = 0; j < xs.size(); ++j) CHECK(K(xs[i], xs[j]) == doctest::Approx(2 * xs[i].dot(xs[j])));
    CHECK_FALSE(K.lag_case);
}

TEST_CASE("NTP deep kernel sums every sigma^{mL}") {
    const std::vector<Eigen::VectorXd> xs{vec({1, 0.2}), vec({0.5, -2})};
    const AbcParam p = named_param("NTP", 3);
    const KernelTable K = limit_kernel(p, kRelu, xs);
    for (const auto& a : xs)
        for (const auto& b : xs) {
            double s = 0;
            for (int m = 0; m <= 3; ++m) s += sigma_ml(m, 3, a, b, p, kRelu).mean;
            CHECK(K(a, b) == doctest::Approx(s).epsilon(1e-12));
        }
}

TEST_CASE("NNGP facet keeps only the last-layer term") {
    AbcParam p = named_param("NTP", 1);
    p.b_at(2) = Rational(1);
    const std::vector<Eigen::VectorXd> xs{vec({1, 0.2}), vec({0.5, -2})};
    const KernelTable K = limit_kernel(p, kRelu, xs);
    CHECK(K.lag_case);
    CHECK(K(xs[0], xs[1]) == doctest::Approx(sigma_ml(1, 1, xs[0], xs[1], p, kRelu).mean).epsilon(1e-12));
}

TEST_CASE("non-kernel parametrizations are rejected") {
    const std::vector<Eigen::VectorXd> xs{vec({1.0})};
    CHECK_THROWS_AS(limit_kernel(named_param("MUP", 2), kRelu, xs), std::domain_error);
    AbcParam bad = named_param("SP", 2);
    bad.c = Rational(0);
    CHECK_THROWS_AS(limit_kernel(bad, kRelu, xs), std::domain_error);
}

TEST_CASE("kernel table is PSD and symmetric") {
    Rng rng(3);
    std::vector<Eigen::VectorXd> xs;
    for (int i = 0; i < 12; ++i) xs.push_back(Eigen::VectorXd::NullaryExpr(4, [&] { return rng.normal(); }));
    const KernelTable K = limit_kernel(named_param("NTP", 2), kRelu, xs);
    CHECK((K.values - K.values.transpose()).norm() == 0.0);
    CHECK(K.min_eigenvalue() > -1e-9);
    CHECK_THROWS_AS(K.index_of(vec({9, 9, 9, 9})), std::out_of_range);

    std::ostringstream os;
    K.write_csv(os);
    CHECK(os.str().rfind("i,j,value\n0,0,", 0) == 0);
    CHECK(K.to_json()["values"].size() == 12);
}

TEST_CASE("finite NTP tangent kernel approaches the limit") {
    const std::vector<Eigen::VectorXd> xs{vec({1, 0.2, -0.4}), vec({0.5, -1.0, 0.3})};
    const AbcParam p = named_param("NTP", 2);
    const KernelTable K = limit_kernel(p, kRelu, xs);
    // average a few widths-4096 draws; fluctuations are O(n^{-1/2}) per draw
    Eigen::Matrix2d avg = Eigen::Matrix2d::Zero();
    const int draws = 4;
    for (int s = 0; s < draws; ++s) {
        const FiniteMlp net = FiniteMlp::init(p, 4096, 3, 1, kRelu, 100 + static_cast<std::uint64_t>(s));
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) avg(i, j) += empirical_ntk(net, xs[i], xs[j]) / draws;
    }
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(avg(i, j) == doctest::Approx(K.values(i, j)).epsilon(0.05));
}

TEST_CASE("kernel gradient descent") {
    const std::vector<Eigen::VectorXd> xs{vec({1, 0}), vec({0, 1}), vec({1, 1})};
    TrainRoutine r;
    r.eta = 0.3;
    r.inputs = {xs[0], xs[1]};
    r.targets = {vec({1.0}), vec({-0.5})};

    SUBCASE("zero kernel keeps f fixed") {
        KernelTable K;
        K.inputs = xs;
        K.values = Eigen::MatrixXd::Zero(3, 3);
        Eigen::MatrixXd f0(3, 1);
        f0 << 0.2, -0.1, 0.4;
        const auto tr = kgd_run(K, r, 5, f0);
        REQUIRE(tr.f.size() == 6);
        for (const auto& f : tr.f) CHECK((f - f0).norm() == 0.0);
    }

    SUBCASE("linear model: kernel steps equal parameter SGD") {
        // f(x) = w . psi(x) with fixed features; K = Psi Psi^T
        Rng rng(8);
        Eigen::MatrixXd psi(3, 5);
        for (Eigen::Index i = 0; i < psi.size(); ++i) psi(i) = rng.normal();
        KernelTable K;
        K.inputs = xs;
        K.values = psi * psi.transpose();
        r.batch_size = 2;
        r.loss = Loss::logistic;
        r.targets = {vec({1.0}), vec({0.0})};
        Eigen::VectorXd w(5);
        for (Eigen::Index i = 0; i < 5; ++i) w(i) = 0.3 * rng.normal();
        const auto tr = kgd_run(K, r, 6, psi * w);
        for (int t = 0; t <= 6; ++t) {
            CHECK((tr.f[static_cast<std::size_t>(t)] - psi * w).norm() < 1e-12);
            Eigen::VectorXd g = Eigen::VectorXd::Zero(5);
            for (int b = 0; b < 2; ++b) {
                const double fb = psi.row(b).dot(w);
                g += loss_deriv(Loss::logistic, fb, r.targets[static_cast<std::size_t>(b)](0)) *
                     psi.row(b).transpose();
            }
            w -= r.eta * g / 2;
        }
    }

    SUBCASE("one mse step by hand") {
        KernelTable K;
        K.inputs = xs;
        K.values = Eigen::MatrixXd::Identity(3, 3);
        K.values(2, 0) = K.values(0, 2) = 0.5;
        const auto tr = kgd_run(K, r, 1);
        // mse derivative at f = 0 is -y for the 1/2 (f-y)^2 convention
        const double chi = loss_deriv(Loss::mse, 0.0, 1.0);
        CHECK(tr.f[1](0, 0) == doctest::Approx(-0.3 * chi));
        CHECK(tr.f[1](1, 0) == 0.0);
        CHECK(tr.f[1](2, 0) == doctest::Approx(-0.3 * 0.5 * chi));
        CHECK(tr.loss[0] == doctest::Approx(loss_value(Loss::mse, 0.0, 1.0)));
    }

    CHECK_THROWS(kgd_run(KernelTable{}, r, 1));
}
