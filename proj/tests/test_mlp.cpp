#include <doctest.h>

#include "abclim/mlp.hpp"
#include "abclim/stats.hpp"

#include <cmath>
#include <sstream>

using namespace abclim;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

double loss_at(const FiniteMlp& net, const Eigen::VectorXd& xi, const Eigen::VectorXd& y, Loss loss) {
    return loss_value(loss, net.output(xi), y);
}

}  // namespace

TEST_CASE("init statistics and determinism") {
    const int n = 1024;
    const auto net = FiniteMlp::init(named_param("MUP", 2), n, 3, 2, Activation::parse("tanh"), 5);
    const auto& w2 = net.w(2);
    const double sd = std::sqrt(w2.squaredNorm() / static_cast<double>(w2.size()));
    CHECK(sd == doctest::Approx(1.0 / std::sqrt(n)).epsilon(0.1));

    const auto again = FiniteMlp::init(named_param("MUP", 2), n, 3, 2, Activation::parse("tanh"), 5);
    for (int l = 1; l <= 3; ++l) CHECK(net.w(l) == again.w(l));

    AbcParam p = named_param("NTP", 1);
    const auto unit = FiniteMlp::init(p, 4, 2, 1, Activation{}, 1);
    (void)unit;
    CHECK_THROWS(FiniteMlp::init(p, 0, 2, 1, Activation{}, 1));
}

TEST_CASE("forward closed forms") {
    auto net = FiniteMlp::init(named_param("MUP", 1), 16, 1, 1, Activation{}, 3);
    const double xi = 0.7;
    const double n = 16;
    const auto& param = net.param();
    const double mult = std::pow(n, -boost::rational_cast<double>(param.a_at(2) + param.a_at(1)));
    const double expect = mult * (net.w(2).row(0).dot(net.w(1).col(0))) * xi;
    CHECK(net.output(vec({xi}))[0] == doctest::Approx(expect).epsilon(1e-12));

    net.w(1).setZero();
    net.w(2).setZero();
    CHECK(net.output(vec({xi}))[0] == 0.0);
    CHECK_THROWS(net.forward(vec({1.0, 2.0})));
}

TEST_CASE("gradients match central differences") {
    for (const char* act : {"tanh", "gelu:0.5", "quadratic", "identity"}) {
        auto net = FiniteMlp::init(named_param("MUP", 2), 8, 3, 2, Activation::parse(act), 11);
        const Eigen::VectorXd xi = vec({0.3, -0.8, 0.5});
        const Eigen::VectorXd y = vec({0.2, -0.4});
        const Gradients g = net.gradients(xi, y, Loss::mse);
        const double h = 1e-4;
        double num2 = 0.0, err2 = 0.0;
        for (int l = 1; l <= 3; ++l) {
            for (Eigen::Index i = 0; i < net.w(l).size(); ++i) {
                const double orig = net.w(l).data()[i];
                net.w(l).data()[i] = orig + h;
                const double lp = loss_at(net, xi, y, Loss::mse);
                net.w(l).data()[i] = orig - h;
                const double lm = loss_at(net, xi, y, Loss::mse);
                net.w(l).data()[i] = orig;
                const double fd = (lp - lm) / (2 * h);
                const double an = g.w[static_cast<std::size_t>(l - 1)].data()[i];
                num2 += fd * fd;
                err2 += (fd - an) * (fd - an);
            }
        }
        INFO(act);
        CHECK(std::sqrt(err2 / num2) < 1e-4);
    }
}

TEST_CASE("gradient special cases") {
    auto net = FiniteMlp::init(named_param("NTP", 1), 10, 1, 1, Activation::parse("tanh"), 2);
    const Eigen::VectorXd xi = vec({0.9});
    const Eigen::VectorXd f = net.output(xi);
    const Gradients zero = net.gradients(xi, f, Loss::mse);
    CHECK(zero.squared_norm() == 0.0);

    // d f / d v_alpha = n^{-a_2} x_alpha, seen through a unit cotangent
    const auto cache = net.forward(xi);
    const Gradients g = net.backward(cache, xi, vec({1.0}));
    const double m2 = std::pow(10.0, -0.5);
    for (int a = 0; a < 10; ++a) CHECK(g.w[1](0, a) == doctest::Approx(m2 * cache.x[0][a]).epsilon(1e-12));
}

TEST_CASE("sgd with zero rate is a no-op") {
    auto net = FiniteMlp::init(named_param("MUP", 2), 12, 2, 1, Activation::parse("tanh"), 4);
    const auto before = net;
    const std::vector<Eigen::VectorXd> xs{vec({1.0, -1.0})}, ys{vec({0.5})};
    net.sgd_step(xs, ys, 0.0, Loss::mse);
    for (int l = 1; l <= 3; ++l) CHECK(net.w(l) == before.w(l));
}

TEST_CASE("symmetry shift leaves the function trajectory fixed") {
    const AbcParam p = named_param("MUP", 2);
    const AbcParam shifted = symmetry_shift(p, Rational(1, 2));
    auto a = FiniteMlp::init(p, 64, 2, 1, Activation::parse("tanh"), 9);
    auto b = FiniteMlp::init(shifted, 64, 2, 1, Activation::parse("tanh"), 9);
    TrainRoutine r;
    r.eta = 0.5;
    r.inputs = {vec({1.0, 0.5}), vec({-0.3, 1.0})};
    r.targets = {vec({1.0}), vec({-1.0})};
    const auto ta = train(a, r, 10, output_probes(r.inputs));
    const auto tb = train(b, r, 10, output_probes(r.inputs));
    REQUIRE(ta.rows.size() == 11);
    for (std::size_t t = 0; t < ta.rows.size(); ++t)
        for (std::size_t k = 0; k < ta.rows[t].probes.size(); ++k)
            CHECK(tb.rows[t].probes[k] == doctest::Approx(ta.rows[t].probes[k]).epsilon(1e-5));
}

TEST_CASE("train bookkeeping") {
    auto net = FiniteMlp::init(named_param("MUP", 1), 8, 1, 1, Activation::parse("tanh"), 1);
    TrainRoutine r;
    r.inputs = {vec({1.0})};
    r.targets = {vec({1.0})};
    const auto tr = train(net, r, 0, output_probes(r.inputs));
    CHECK(tr.rows.size() == 1);
    CHECK(tr.rows[0].t == 0);
}

TEST_CASE("mup output at init shrinks like n^-1/2") {
    std::vector<double> ns, mags;
    for (int n : {256, 1024, 4096}) {
        double s = 0.0;
        for (int seed = 0; seed < 20; ++seed) {
            auto net = FiniteMlp::init(named_param("MUP", 2), n, 1, 1, Activation::parse("tanh"), 100 + seed);
            const double f = net.output(vec({1.0}))[0];
            s += f * f;
        }
        ns.push_back(n);
        mags.push_back(std::sqrt(s / 20));
    }
    CHECK(loglog_slope(ns, mags) == doctest::Approx(-0.5).epsilon(0.3));
}

TEST_CASE("decoupled backprop uses an independent copy") {
    MlpOptions o;
    o.decoupled_backprop = true;
    auto net = FiniteMlp::init(named_param("MUP", 2), 16, 1, 1, Activation::parse("tanh"), 3, o);
    auto plain = FiniteMlp::init(named_param("MUP", 2), 16, 1, 1, Activation::parse("tanh"), 3);
    const Eigen::VectorXd xi = vec({1.0}), y = vec({1.0});
    CHECK(net.output(xi)[0] == doctest::Approx(plain.output(xi)[0]));
    const auto g1 = net.gradients(xi, y, Loss::mse);
    const auto g2 = plain.gradients(xi, y, Loss::mse);
    // the last two layers see the same backward signal; the first does not
    CHECK((g1.w[2] - g2.w[2]).norm() < 1e-12);
    CHECK((g1.w[0] - g2.w[0]).norm() > 1e-6);
}

TEST_CASE("save and load round trip") {
    MlpOptions o;
    o.hidden_bias = true;
    auto net = FiniteMlp::init(named_param("MUP", 1), 8, 2, 3, Activation::parse("gelu:0.3"), 5, o);
    std::stringstream ss;
    net.save(ss);
    const auto back = FiniteMlp::load(ss);
    CHECK(back.param() == net.param());
    for (int l = 1; l <= 2; ++l) CHECK(back.w(l) == net.w(l));
    CHECK(back.bias() == net.bias());
    const Eigen::VectorXd xi = vec({0.1, 0.2});
    CHECK(back.output(xi) == net.output(xi));
}

TEST_CASE("coordinate size and kernels") {
    const std::vector<double> v{3.0, 4.0};
    CHECK(coordinate_size(v) == doctest::Approx(std::sqrt(12.5)));
    CHECK_THROWS(coordinate_size(std::span<const double>{}));
    auto net = FiniteMlp::init(named_param("MUP", 1), 32, 1, 1, Activation::parse("tanh"), 1);
    const Eigen::VectorXd xi = vec({0.5});
    CHECK(feature_kernel(net, xi, xi) >= 0.0);
    CHECK(empirical_ntk(net, xi, xi) > 0.0);
}
