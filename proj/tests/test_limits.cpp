#include <doctest.h>

#include "abclim/linlim.hpp"
#include "abclim/particle.hpp"
#include "abclim/wick.hpp"

#include <cmath>

using namespace abclim;

namespace {

Eigen::VectorXd scalar(double v) { return Eigen::VectorXd::Constant(1, v); }

TrainRoutine routine(std::vector<double> xs, std::vector<double> ys, double eta = 1.0) {
    TrainRoutine r;
    r.eta = eta;
    for (double x : xs) r.inputs.push_back(scalar(x));
    for (double y : ys) r.targets.push_back(scalar(y));
    return r;
}

LimitConfig config(LimitDepth depth, const char* act) {
    LimitConfig c;
    c.depth = depth;
    c.act = Activation::parse(act);
    return c;
}

double sample_mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("ensemble init") {
    const std::size_t M = 1 << 16;
    ParticleEnsemble ens(M, 7);
    const double bound = 4.0 / std::sqrt(static_cast<double>(M));
    CHECK(std::abs(sample_mean(ens.slot("U_0"))) < bound);
    const std::string names[] = {"U_0", "nV_0"};
    const auto cross = estimate(ens, names, [](std::span<const double> v) { return v[0] * v[1]; });
    CHECK(std::abs(cross.mean) < bound);
    ParticleEnsemble again(M, 7);
    CHECK(again.slot("U_0") == ens.slot("U_0"));
    CHECK_THROWS(ParticleEnsemble(0, 1));
}

TEST_CASE("estimate") {
    ParticleEnsemble ens(1 << 14, 3);
    const auto one = estimate(ens, {}, [](std::span<const double>) { return 1.0; });
    CHECK(one.mean == 1.0);
    CHECK(one.stderr == 0.0);
    const std::string u[] = {"U_0"};
    const auto sq = estimate(ens, u, [](std::span<const double> v) { return v[0] * v[0]; });
    CHECK(std::abs(sq.mean - 1.0) < 4.0 / std::sqrt(1 << 14) * std::sqrt(2.0));
    const std::string missing[] = {"nope"};
    CHECK_THROWS(estimate(ens, missing, [](std::span<const double> v) { return v[0]; }));

    ParticleEnsemble big(1 << 16, 3);
    const auto sq4 = estimate(big, u, [](std::span<const double> v) { return v[0] * v[0]; });
    CHECK(sq.stderr / sq4.stderr == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("gauss_extend covariance fidelity") {
    const std::size_t M = 1 << 17;
    ParticleEnsemble ens(M, 11);
    GaussianHistory hist;
    const auto z0 = gauss_extend(hist, ens, 0, "a", {}, 2.0);
    double v = 0.0, v4 = 0.0;
    for (double x : z0) {
        v += x * x;
        v4 += x * x * x * x;
    }
    v /= M;
    const double se = std::sqrt((v4 / M - v * v) / M);
    CHECK(std::abs(v - 2.0) < 4 * se);

    const double rho = 0.6;
    const double row[] = {rho * std::sqrt(2.0)};
    const auto z1 = gauss_extend(hist, ens, 0, "b", row, 1.0);
    double c = 0.0, c2 = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
        const double p = z0[i] * z1[i];
        c += p;
        c2 += p * p;
    }
    c /= M;
    const double sec = std::sqrt((c2 / M - c * c) / M);
    CHECK(std::abs(c - row[0]) < 4 * sec);

    // duplicate: perfectly correlated draws
    const double dup[] = {2.0, row[0]};
    const auto z2 = gauss_extend(hist, ens, 0, "a again", dup, 2.0);
    double num = 0.0, d0 = 0.0, d2 = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
        num += z0[i] * z2[i];
        d0 += z0[i] * z0[i];
        d2 += z2[i] * z2[i];
    }
    CHECK(num / std::sqrt(d0 * d2) > 1 - 1e-6);
}

TEST_CASE("shallow identity particle limit matches the closed form") {
    const auto r = routine({1.0, -0.5, 0.8, 0.3, -1.2}, {1.0, 0.3, -0.6, 0.2, 0.5}, 0.5);
    auto cfg = config(LimitDepth::shallow, "identity");
    cfg.probes = {0.7};
    const auto part = particle_run(cfg, r, 5, 1000000, 21);
    const auto lin = lin1lp_run(r, 5, {scalar(0.7)});
    REQUIRE(part.rows.size() == 6);
    // seven checks on one ensemble: 4 sigma keeps the familywise false alarm near 1e-3
    const double z = 4.0;
    CHECK(std::abs(part.rows[0].f) < z * part.rows[0].f_stderr + 1e-15);
    for (int t = 0; t <= 5; ++t) {
        const auto& row = part.rows[static_cast<std::size_t>(t)];
        CHECK(std::abs(row.probe_f[0] - lin.f[static_cast<std::size_t>(t)](0, 0)) <= z * row.probe_stderr[0] + 1e-12);
    }
}

TEST_CASE("exact shallow identity equals the closed form") {
    const auto r = routine({1.0, -0.5, 0.8}, {1.0, 0.3, -0.6}, 0.7);
    auto cfg = config(LimitDepth::shallow, "identity");
    cfg.probes = {0.7, -1.1};
    const auto ex = exact_run(cfg, r, 4);
    const auto lin = lin1lp_run(r, 4, {scalar(0.7), scalar(-1.1)});
    for (std::size_t t = 0; t <= 4; ++t) {
        CHECK(std::abs(ex.rows[t].probe_f[0] - lin.f[t](0, 0)) < 1e-12);
        CHECK(std::abs(ex.rows[t].probe_f[1] - lin.f[t](1, 0)) < 1e-12);
        CHECK(std::abs(ex.rows[t].loss - lin.loss[t]) < 1e-12);
    }
    // flipping every target flips every output
    const auto flipped = exact_run(cfg, routine({1.0, -0.5, 0.8}, {-1.0, -0.3, 0.6}, 0.7), 4);
    for (std::size_t t = 0; t <= 4; ++t) CHECK(flipped.rows[t].probe_f[0] == doctest::Approx(-ex.rows[t].probe_f[0]));
}

TEST_CASE("exact shallow quadratic one step by hand") {
    // f_1 = E[(nV + U^2) U^2 (1 + 2 nV)^2] = 4 + 15
    const auto r = routine({1.0}, {1.0});
    const auto ex = exact_run(config(LimitDepth::shallow, "quadratic"), r, 1);
    CHECK(ex.rows[0].f == 0.0);
    CHECK(ex.rows[0].chi == -1.0);
    CHECK(ex.rows[1].f == doctest::Approx(19.0).epsilon(1e-14));
    const auto part = particle_run(config(LimitDepth::shallow, "quadratic"), r, 1, 1000000, 5);
    CHECK(std::abs(part.rows[1].f - 19.0) <= 3 * part.rows[1].f_stderr);
}

TEST_CASE("exact and particle engines agree") {
    // small rate: two-layer quadratic outputs grow by orders of magnitude per step otherwise
    const auto r = routine({1.0, -1.0, 1.0, -1.0}, {1.0, -1.0, -1.0, 1.0}, 0.01);
    for (auto depth : {LimitDepth::shallow, LimitDepth::decoupled, LimitDepth::coupled}) {
        for (const char* act : {"identity", "quadratic"}) {
            auto cfg = config(depth, act);
            const auto ex = exact_run(cfg, r, 4);
            const auto pa = particle_run(cfg, r, 4, 1 << 18, 77);
            for (std::size_t t = 0; t <= 4; ++t) {
                INFO(depth_name(depth), " ", act, " t=", t, " exact=", ex.rows[t].f, " particle=", pa.rows[t].f,
                     " se=", pa.rows[t].f_stderr);
                CHECK(std::abs(ex.rows[t].f - pa.rows[t].f) <= 3 * pa.rows[t].f_stderr + 1e-9);
            }
        }
    }
}

TEST_CASE("coupled forward correction at t = 1 follows the closed form") {
    const std::size_t M = 1 << 16;
    auto cfg = config(LimitDepth::coupled, "tanh");
    cfg.eta = 0.8;
    ParticleEnsemble ens(M, 3);
    LimitDynamics<ParticleEnsemble> dyn(ens, cfg);
    const double xi0 = 1.0, xi1 = -0.7;
    const auto row0 = dyn.step(xi0, 1.0);
    const std::vector<double> h0 = dyn.last().h.val;
    dyn.observe(xi1, 0.0);
    const auto& h1 = dyn.last().h.val;
    REQUIRE(dyn.last().theta.size() == 1);
    double s = 0.0;
    for (std::size_t i = 0; i < M; ++i) s += cfg.act.deriv(h1[i]) * cfg.act.deriv(h0[i]);
    const double expect = -cfg.eta * row0.chi * xi0 * xi1 * s / M;
    CHECK(dyn.last().theta[0] == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("coupled minus decoupled for a linear net") {
    const auto r = routine({1.0, -0.5, 0.8}, {1.0, 0.5, -1.0}, 0.6);
    auto co = config(LimitDepth::coupled, "identity");
    auto de = config(LimitDepth::decoupled, "identity");
    co.probes = de.probes = {0.9};
    const auto ec = exact_run(co, r, 2);
    const auto ed = exact_run(de, r, 2);
    CHECK(ec.rows[0].probe_f[0] == ed.rows[0].probe_f[0]);
    // after one update the copy of z = dhbar_0 inside W x_1 adds a E[nV_1 z] with
    // a = -eta chi_0 xi_0 xi and E[nV_1 nV_0] = 1
    const double a = -r.eta * ec.rows[0].chi * 1.0 * 0.9;
    CHECK(ec.rows[1].probe_f[0] - ed.rows[1].probe_f[0] == doctest::Approx(a).epsilon(1e-12));

    const auto pc = particle_run(co, r, 1, 1 << 18, 9);
    const auto pd = particle_run(de, r, 1, 1 << 18, 9);
    const double diff = pc.rows[1].probe_f[0] - pd.rows[1].probe_f[0];
    CHECK(std::abs(diff - a) <= 3 * std::hypot(pc.rows[1].probe_stderr[0], pd.rows[1].probe_stderr[0]));
}

TEST_CASE("particle tangents match finite differences of the backing normals") {
    const std::size_t M = 4096;
    auto cfg = config(LimitDepth::coupled, "tanh");
    const std::uint64_t seed = 19;
    ScalarTape tape;
    ParticleEnsemble ens(M, seed);
    ens.set_tape(&tape, TapeMode::record);
    LimitDynamics<ParticleEnsemble> dyn(ens, cfg);
    const double xs[] = {1.0, -0.6, 0.8};
    const double ys[] = {1.0, -1.0, 0.5};
    for (int t = 0; t < 3; ++t) dyn.step(xs[t], ys[t]);

    auto replay = [&](std::size_t i, EpsShift shift) {
        ScalarTape copy = tape;
        copy.cursor = 0;
        ParticleEnsemble one(1, seed, i);
        one.set_tape(&copy, TapeMode::playback);
        one.set_shift(shift);
        LimitDynamics<ParticleEnsemble> d(one, cfg);
        for (int t = 0; t < 3; ++t) d.step(xs[t], ys[t]);
        return std::pair{d.U().val[0], d.nV().val[0]};
    };

    for (std::size_t i : {3u, 100u, 2000u}) {
        const auto base = replay(i, {0, 0, 0.0});
        CHECK(base.first == doctest::Approx(dyn.U().val[i]).epsilon(1e-12));
        CHECK(base.second == doctest::Approx(dyn.nV().val[i]).epsilon(1e-12));
        const double h = 1e-5;
        // U against the backward-family normals
        for (int k = 0; k < dyn.hist_bwd().size(); ++k) {
            double tangent = 0.0;
            for (int j = k; j < dyn.hist_bwd().size(); ++j)
                if (static_cast<std::size_t>(j) < dyn.U().tan.size() && !dyn.U().tan[j].empty())
                    tangent += dyn.hist_bwd().chol()(j, k) * dyn.U().tan[j][i];
            const double fd = (replay(i, {1, k, h}).first - replay(i, {1, k, -h}).first) / (2 * h);
            INFO("particle ", i, " bwd eps ", k, " tangent ", tangent, " fd ", fd);
            CHECK(std::abs(fd - tangent) <= 1e-3 * std::max(std::abs(fd), 1e-3));
        }
        // nV against the forward-family normals
        for (int k = 0; k < dyn.hist_fwd().size(); ++k) {
            double tangent = 0.0;
            for (int j = k; j < dyn.hist_fwd().size(); ++j)
                if (static_cast<std::size_t>(j) < dyn.nV().tan.size() && !dyn.nV().tan[j].empty())
                    tangent += dyn.hist_fwd().chol()(j, k) * dyn.nV().tan[j][i];
            const double fd = (replay(i, {0, k, h}).second - replay(i, {0, k, -h}).second) / (2 * h);
            INFO("particle ", i, " fwd eps ", k, " tangent ", tangent, " fd ", fd);
            CHECK(std::abs(fd - tangent) <= 1e-3 * std::max(std::abs(fd), 1e-3));
        }
    }
}

TEST_CASE("history covariance fidelity after a run") {
    const std::size_t M = 1 << 16;
    auto cfg = config(LimitDepth::coupled, "tanh");
    cfg.probes = {0.5};
    ParticleEnsemble ens(M, 4);
    LimitDynamics<ParticleEnsemble> dyn(ens, cfg);
    dyn.step(1.0, 1.0);
    dyn.step(-1.0, 0.0);
    dyn.observe(1.0, 1.0);
    const auto& hist = dyn.hist_fwd();
    const int k = hist.size();
    std::vector<std::vector<double>> z(static_cast<std::size_t>(k), std::vector<double>(M, 0.0));
    for (int a = 0; a < k; ++a)
        for (int s = 0; s <= a; ++s)
            for (std::size_t i = 0; i < M; ++i) z[a][i] += hist.chol()(a, s) * ens.eps(0, s)[i];
    for (int a = 0; a < k; ++a) {
        for (int b = 0; b <= a; ++b) {
            double m = 0.0, m2 = 0.0;
            for (std::size_t i = 0; i < M; ++i) {
                const double p = z[a][i] * z[b][i];
                m += p;
                m2 += p * p;
            }
            m /= M;
            const double se = std::sqrt(std::max(m2 / M - m * m, 0.0) / M);
            CHECK(std::abs(m - hist.cov()(a, b)) <= 4 * se + 1e-6);
        }
    }
}

TEST_CASE("determinism") {
    auto cfg = config(LimitDepth::coupled, "tanh");
    const auto r = routine({1.0, -1.0}, {1.0, 0.0});
    const auto a = particle_run(cfg, r, 2, 1 << 15, 8);
    const auto b = particle_run(cfg, r, 2, 1 << 15, 8);
    for (std::size_t t = 0; t < a.rows.size(); ++t) CHECK(a.rows[t].f == b.rows[t].f);
}

TEST_CASE("exact engine caps") {
    const auto r = routine({1.0}, {1.0});
    CHECK_THROWS_AS(exact_run(config(LimitDepth::shallow, "tanh"), r, 1), std::invalid_argument);
    CHECK_THROWS_AS(exact_run(config(LimitDepth::shallow, "identity"), r, 5), std::length_error);
    ExactOptions tight;
    tight.limits.degree_cap = 4;
    CHECK_THROWS_AS(exact_run(config(LimitDepth::shallow, "quadratic"), r, 3, tight), std::length_error);
}
