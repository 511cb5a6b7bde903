#include <doctest.h>

#include "abclim/kernelgd.hpp"
#include "abclim/maml.hpp"

#include <cmath>

using namespace abclim;

namespace {

FewShotConfig small_cfg() {
    FewShotConfig c;
    c.d = 6;
    c.n_way = 3;
    c.k_shot = 2;
    c.n_query = 2;
    c.latent_dim = 2;
    c.noise = 0.4;
    return c;
}

// Explicit 0-hidden-layer model W (d_o x d), first-order MAML one task at a time.
struct LinearMaml {
    Eigen::MatrixXd W;

    static Eigen::MatrixXd chi_of(const Eigen::MatrixXd& W, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
        Eigen::MatrixXd F = X * W.transpose();
        Eigen::MatrixXd chi(F.rows(), F.cols());
        for (Eigen::Index r = 0; r < F.rows(); ++r) {
            Eigen::VectorXd p = (F.row(r).array() - F.row(r).maxCoeff()).exp();
            p /= p.sum();
            chi.row(r) = p.transpose() - Y.row(r);
        }
        return chi;
    }
    Eigen::MatrixXd adapted(const FewShotTask& t, int steps, double eps) const {
        Eigen::MatrixXd A = W;
        for (int s = 0; s < steps; ++s) A -= eps * chi_of(A, t.train_x, t.train_y).transpose() * t.train_x;
        return A;
    }
    void meta_step(const FewShotTask& t, const MamlConfig& cfg) {
        const Eigen::MatrixXd A = adapted(t, cfg.adapt_steps, cfg.eps);
        const Eigen::MatrixXd g = chi_of(A, t.test_x, t.test_y).transpose() * t.test_x;
        const double G = g.norm();
        const double rho = G > cfg.clip ? cfg.clip / G : 1.0;
        W -= rho * cfg.eta * g;
    }
};

}  // namespace

TEST_CASE("few-shot generator") {
    FewShotConfig c = small_cfg();
    const auto a = gen_fewshot(5, c, 4);
    const auto b = gen_fewshot(5, c, 4);
    REQUIRE(a.size() == 4);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].train_x == b[i].train_x);
        CHECK(a[i].test_x == b[i].test_x);
    }
    CHECK(a[0].train_x.rows() == 6);
    CHECK(a[0].test_y.rows() == 6);
    CHECK(a[0].train_y.rowwise().sum().isOnes());

    // the stream is indexable: task 2 of the stream equals element 0 at offset 2
    CHECK(gen_fewshot(5, c, 1, 2)[0].train_x == a[2].train_x);

    c.noise = 0.0;
    c.k_shot = 1;
    c.n_query = 1;
    for (const auto& t : gen_fewshot(9, c, 3)) CHECK(t.train_x == t.test_x);
}

TEST_CASE("nearest-prototype accuracy beats chance") {
    FewShotConfig c = small_cfg();
    c.noise = 0.5;
    int hits = 0, total = 0;
    for (const auto& t : gen_fewshot(3, c, 200)) {
        for (Eigen::Index q = 0; q < t.test_x.rows(); ++q) {
            Eigen::Index best = 0;
            (t.train_x.rowwise() - t.test_x.row(q)).rowwise().squaredNorm().minCoeff(&best);
            Eigen::Index want = 0, got = 0;
            t.test_y.row(q).maxCoeff(&want);
            t.train_y.row(best).maxCoeff(&got);
            hits += want == got;
            ++total;
        }
    }
    CHECK(static_cast<double>(hits) / total > 1.0 / 3 + 0.1);
}

TEST_CASE("argmax accuracy breaks ties toward the lowest index") {
    Eigen::MatrixXd logits(2, 3), y = Eigen::MatrixXd::Zero(2, 3);
    logits << 1, 1, 0, 0, 2, 2;
    y(0, 0) = 1;
    y(1, 2) = 1;
    CHECK(argmax_accuracy(logits, y) == doctest::Approx(0.5));
}

TEST_CASE("finite MAML trivial settings") {
    const FewShotConfig c = small_cfg();
    const auto train = gen_fewshot(1, c, 40);
    const auto test = gen_fewshot(1, c, 30, 1000);
    LinHyper h;
    h.sigma_v = 0.5;
    h.alpha = 1.0;

    SUBCASE("eta = 0 leaves the model unchanged") {
        MamlConfig cfg;
        cfg.eta = 0.0;
        cfg.task_batch = 8;
        CoeffNet net = CoeffNet::finite(32, c.d, c.n_way, h, 4);
        const CoeffNet before = net;
        const MamlResult r = maml_finite(net, train, test, cfg);
        CHECK(net.uu() == before.uu());
        CHECK(net.vv() == before.vv());
        CHECK(net.bb() == before.bb());
        CHECK(r.test_accuracy == maml_evaluate(before, test, cfg).test_accuracy);
        CHECK(r.meta_grad_norm.size() == 5);
    }

    SUBCASE("eps = 0 is plain SGD on the query losses") {
        MamlConfig cfg;
        cfg.eps = 0.0;
        cfg.eta = 0.05;
        cfg.task_batch = 8;
        CoeffNet net = CoeffNet::diagonal(c.d, c.n_way, h);
        CoeffNet ref = net;
        ref.hyper().eta = cfg.eta;
        ref.hyper().gamma = 0.0;
        maml_finite(net, train, test, cfg);
        for (std::size_t s = 0; s < train.size(); s += 8) {
            Eigen::MatrixXd X(0, c.d), Y(0, c.n_way);
            for (std::size_t i = s; i < s + 8; ++i) {
                X.conservativeResize(X.rows() + train[i].test_x.rows(), Eigen::NoChange);
                X.bottomRows(train[i].test_x.rows()) = train[i].test_x;
                Y.conservativeResize(Y.rows() + train[i].test_y.rows(), Eigen::NoChange);
                Y.bottomRows(train[i].test_y.rows()) = train[i].test_y;
            }
            ref.sgd_step(X, Y, Loss::softmax);
        }
        CHECK((net.uu() - ref.uu()).norm() < 1e-12);
        CHECK((net.vv() - ref.vv()).norm() < 1e-12);
        CHECK((net.bb() - ref.bb()).norm() < 1e-12);
    }

    SUBCASE("MLP model: eta = 0 leaves weights unchanged, training moves them") {
        MamlConfig cfg;
        cfg.task_batch = 10;
        FiniteMlp net = FiniteMlp::init(named_param("MUP", 1), 16, c.d, c.n_way, Activation{ActKind::tanh}, 2);
        const FiniteMlp before = net;
        cfg.eta = 0.0;
        maml_finite(net, train, test, cfg);
        CHECK(net.w(1) == before.w(1));
        cfg.eta = 0.1;
        maml_finite(net, train, test, cfg);
        CHECK((net.w(1) - before.w(1)).norm() > 0.0);
    }
}

TEST_CASE("kernel model Q") {
    KernelModelQ q([](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.dot(b); }, 2);
    Eigen::VectorXd x(2);
    x << 1, 2;
    CHECK(q.predict(x).isZero(0.0));
    Eigen::VectorXd c(2);
    c << 0.5, -1;
    q.push(x, c);
    CHECK(q.predict(x).isApprox(5 * c));
    q.pop();
    CHECK(q.size() == 0);
}

TEST_CASE("kernel MAML with a linear kernel is 0-hidden-layer MAML") {
    const FewShotConfig c = small_cfg();
    const auto train = gen_fewshot(2, c, 60);
    const auto test = gen_fewshot(2, c, 25, 5000);
    const KernelFn linear = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.dot(b); };

    for (double eps : {0.0, 0.4}) {
        for (double clip : {std::numeric_limits<double>::infinity(), 0.3}) {
            MamlConfig cfg;
            cfg.eps = eps;
            cfg.eta = 0.2;
            cfg.clip = clip;
            cfg.adapt_steps = 2;
            cfg.test_adapt_steps = 20;
            const KernelMamlResult km = maml_kernel(linear, c.n_way, train, test, cfg);

            LinearMaml ref{Eigen::MatrixXd::Zero(c.n_way, c.d)};
            for (const auto& t : train) ref.meta_step(t, cfg);

            for (const auto& t : test)
                for (Eigen::Index r = 0; r < t.test_x.rows(); ++r) {
                    const Eigen::VectorXd xi = t.test_x.row(r).transpose();
                    CHECK((km.model.predict(xi) - ref.W * xi).cwiseAbs().maxCoeff() < 1e-8);
                }

            // meta-test: 20 adaptation steps from the meta-trained model
            double loss = 0.0;
            int hits = 0, total = 0;
            for (const auto& t : test) {
                const Eigen::MatrixXd A = ref.adapted(t, 20, eps);
                const Eigen::MatrixXd F = t.test_x * A.transpose();
                for (Eigen::Index r = 0; r < F.rows(); ++r) {
                    loss += loss_value(Loss::softmax, F.row(r).transpose(), t.test_y.row(r).transpose());
                    Eigen::Index a = 0, b = 0;
                    F.row(r).maxCoeff(&a);
                    t.test_y.row(r).maxCoeff(&b);
                    hits += a == b;
                    ++total;
                }
            }
            CHECK(km.result.test_loss == doctest::Approx(loss / total).epsilon(1e-8));
            CHECK(km.result.test_accuracy == doctest::Approx(static_cast<double>(hits) / total));
        }
    }
}

TEST_CASE("kernel MAML clip pushes entries of kernel norm g") {
    const FewShotConfig c = small_cfg();
    const auto train = gen_fewshot(4, c, 12);
    const auto test = gen_fewshot(4, c, 2, 99);
    const KernelFn rbf = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return std::exp(-0.5 * (a - b).squaredNorm());
    };
    MamlConfig cfg;
    cfg.eta = 1.0;
    cfg.clip = 0.05;
    const KernelMamlResult km = maml_kernel(rbf, c.n_way, train, test, cfg);
    const auto& Q = km.model.entries();
    const std::size_t per_task = static_cast<std::size_t>(train[0].test_x.rows());
    REQUIRE(Q.size() == per_task * train.size());
    int clipped = 0;
    for (std::size_t t = 0; t < train.size(); ++t) {
        double n2 = 0.0;
        for (std::size_t i = 0; i < per_task; ++i)
            for (std::size_t j = 0; j < per_task; ++j) {
                const auto& [xi, qi] = Q[t * per_task + i];
                const auto& [xj, qj] = Q[t * per_task + j];
                n2 += qi.dot(qj) * rbf(xi, xj);
            }
        const double G = km.result.meta_grad_norm[t];
        if (G > cfg.clip) {
            ++clipped;
            CHECK(std::sqrt(n2) == doctest::Approx(cfg.clip).epsilon(1e-10));
        } else {
            CHECK(std::sqrt(n2) == doctest::Approx(cfg.eta * G).epsilon(1e-10));
        }
    }
    CHECK(clipped > 0);
}

TEST_CASE("Monte Carlo shallow kernels") {
    Eigen::VectorXd xi(3), zeta(3);
    xi << 0.5, -1.0, 0.3;
    zeta << 1.2, 0.1, -0.4;
    const Activation id{ActKind::identity};
    const auto ntk = nngp_ntk_kernel_mc(McShallowKernel::Kind::ntk, id, 3, 200000, 1);
    const auto nngp = nngp_ntk_kernel_mc(McShallowKernel::Kind::nngp, id, 3, 200000, 2);
    const Estimate a = ntk.estimate(xi, zeta);
    const Estimate b = nngp.estimate(xi, zeta);
    CHECK(std::abs(a.mean - 2 * xi.dot(zeta)) < 4 * a.stderr);
    CHECK(std::abs(b.mean - xi.dot(zeta)) < 4 * b.stderr);
    CHECK(ntk(xi, zeta) == ntk(zeta, xi));

    // relu against the quadrature limit of the same shallow net
    const Activation relu{ActKind::relu};
    const auto mc = nngp_ntk_kernel_mc(McShallowKernel::Kind::ntk, relu, 3, 200000, 3);
    const KernelTable K = limit_kernel(named_param("NTP", 1), relu, {xi, zeta});
    const Estimate e = mc.estimate(xi, zeta);
    CHECK(std::abs(e.mean - K(xi, zeta)) < 4 * e.stderr + 3e-3 * std::abs(K(xi, zeta)));
}

TEST_CASE("feature-map kernel model matches the pairwise one") {
    const FewShotConfig c = small_cfg();
    const auto train = gen_fewshot(6, c, 15);
    const auto test = gen_fewshot(6, c, 6, 777);
    const Activation tanh{ActKind::tanh};
    for (auto kind : {McShallowKernel::Kind::nngp, McShallowKernel::Kind::ntk}) {
        const auto mc = nngp_ntk_kernel_mc(kind, tanh, c.d, 64, 8);
        const Eigen::VectorXd a = test[0].test_x.row(0).transpose(), b = test[1].train_x.row(2).transpose();
        CHECK(mc.features(a).dot(mc.features(b)) == doctest::Approx(mc(a, b)).epsilon(1e-12));
        CHECK(mc.features(a).size() == (kind == McShallowKernel::Kind::ntk ? 64 * (1 + c.d) : 64));

        MamlConfig cfg;
        cfg.eta = 0.3;
        cfg.clip = 0.2;
        cfg.adapt_steps = 2;
        cfg.test_adapt_steps = 5;
        const auto pair = maml_kernel(mc.handle(), c.n_way, train, test, cfg);
        const auto feat = maml_kernel(KernelModelQ::from_features(mc.feature_handle(), c.n_way), train, test, cfg);
        REQUIRE(feat.model.size() == pair.model.size());
        for (const auto& t : test)
            for (Eigen::Index r = 0; r < t.test_x.rows(); ++r) {
                const Eigen::VectorXd xi = t.test_x.row(r).transpose();
                CHECK((feat.model.predict(xi) - pair.model.predict(xi)).cwiseAbs().maxCoeff() < 1e-10);
            }
        CHECK(feat.result.test_loss == doctest::Approx(pair.result.test_loss).epsilon(1e-10));
        CHECK(feat.result.test_accuracy == doctest::Approx(pair.result.test_accuracy));
        for (std::size_t i = 0; i < pair.result.meta_grad_norm.size(); ++i)
            CHECK(feat.result.meta_grad_norm[i] == doctest::Approx(pair.result.meta_grad_norm[i]).epsilon(1e-10));
    }

    KernelModelQ empty = KernelModelQ::from_features(nngp_ntk_kernel_mc(McShallowKernel::Kind::nngp, tanh, 2, 8, 1).feature_handle(), 3);
    CHECK(empty.predict(Eigen::VectorXd(Eigen::VectorXd::Ones(2))).isZero());
    CHECK_THROWS_AS(empty.pop(), std::logic_error);
    CHECK_THROWS_AS(empty.push(Eigen::VectorXd::Ones(2), Eigen::VectorXd::Ones(2)), std::invalid_argument);
}
