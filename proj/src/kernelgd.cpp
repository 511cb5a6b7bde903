#include "abclim/kernelgd.hpp"

#include "abclim/parallel.hpp"
#include "abclim/rng.hpp"

#include <Eigen/Eigenvalues>
#include <gsl/gsl_integration.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace abclim {

namespace {

const Rational kOne{1};

struct HermiteRule {
    std::vector<double> x, w;  // E f(Z) ~ sum w_i f(x_i) for Z ~ N(0, 1)
};

const HermiteRule& hermite_rule(int nodes) {
    static std::mutex mu;
    static std::map<int, std::unique_ptr<HermiteRule>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[nodes];
    if (!slot) {
        if (nodes < 1) throw std::invalid_argument("quadrature needs at least one node");
        // weight exp(-x^2); rescale to the standard normal
        gsl_integration_fixed_workspace* ws =
            gsl_integration_fixed_alloc(gsl_integration_fixed_hermite, static_cast<std::size_t>(nodes), 0.0, 1.0,
                                        0.0, 0.0);
        if (!ws) throw std::runtime_error("gsl Gauss-Hermite allocation failed");
        auto rule = std::make_unique<HermiteRule>();
        const double* xs = gsl_integration_fixed_nodes(ws);
        const double* ws_ = gsl_integration_fixed_weights(ws);
        for (int i = 0; i < nodes; ++i) {
            rule->x.push_back(std::sqrt(2.0) * xs[i]);
            rule->w.push_back(ws_[i] / std::sqrt(std::numbers::pi));
        }
        gsl_integration_fixed_free(ws);
        slot = std::move(rule);
    }
    return *slot;
}

struct Cov2 {
    double xx = 0.0, xy = 0.0, yy = 0.0;
};

// E g(X, Y) for (X, Y) ~ N(0, cov).
template <class G>
Estimate bivariate(const Cov2& cov, const G& g, const GaussQuad& quad, std::uint64_t stream) {
    const double l11 = std::sqrt(std::max(cov.xx, 0.0));
    const double l21 = l11 > 0.0 ? cov.xy / l11 : 0.0;
    const double l22 = std::sqrt(std::max(cov.yy - l21 * l21, 0.0));
    Estimate e;
    if (quad.mc_samples > 0) {
        const std::size_t M = quad.mc_samples;
        double s = 0.0, s2 = 0.0;
        for (std::size_t i = 0; i < M; ++i) {
            const double z1 = counter_normal(quad.seed, 2 * stream, i);
            const double z2 = counter_normal(quad.seed, 2 * stream + 1, i);
            const double v = g(l11 * z1, l21 * z1 + l22 * z2);
            s += v;
            s2 += v * v;
        }
        const double n = static_cast<double>(M);
        e.mean = s / n;
        if (M > 1) e.stderr = std::sqrt(std::max(s2 / n - e.mean * e.mean, 0.0) / (n - 1.0));
        return e;
    }
    const HermiteRule& rule = hermite_rule(quad.nodes);
    for (std::size_t i = 0; i < rule.x.size(); ++i) {
        const double z1 = rule.x[i];
        if (l22 == 0.0) {
            e.mean += rule.w[i] * g(l11 * z1, l21 * z1);
            continue;
        }
        for (std::size_t j = 0; j < rule.x.size(); ++j)
            e.mean += rule.w[i] * rule.w[j] * g(l11 * z1, l21 * z1 + l22 * rule.x[j]);
    }
    return e;
}

// Per-layer statistics of one input pair: feature kernel C^k and
// derivative kernel D^k for k = 1..L (index 0 unused).
struct PairStats {
    std::vector<Estimate> C, D;
};

PairStats pair_stats(const Eigen::VectorXd& xi, const Eigen::VectorXd& zeta, int L, const Activation& act,
                     const GaussQuad& quad) {
    if (xi.size() != zeta.size()) throw std::invalid_argument("kernel inputs differ in dimension");
    PairStats out;
    out.C.resize(static_cast<std::size_t>(L) + 1);
    out.D.resize(static_cast<std::size_t>(L) + 1);
    Cov2 h{xi.squaredNorm(), xi.dot(zeta), zeta.squaredNorm()};
    auto phi = [&](double x, double y) { return act.value(x) * act.value(y); };
    auto dphi = [&](double x, double y) { return act.deriv(x) * act.deriv(y); };
    std::uint64_t stream = 0;
    for (int k = 1; k <= L; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        out.C[kk] = bivariate(h, phi, quad, stream++);
        out.D[kk] = bivariate(h, dphi, quad, stream++);
        const double cxx = bivariate(Cov2{h.xx, h.xx, h.xx}, phi, quad, stream++).mean;
        const double cyy = bivariate(Cov2{h.yy, h.yy, h.yy}, phi, quad, stream++).mean;
        h = Cov2{cxx, out.C[kk].mean, cyy};
    }
    return out;
}

// product of independent estimates with first-order error propagation
Estimate product(const std::vector<Estimate>& fs) {
    Estimate e{1.0, 0.0};
    double rel2 = 0.0;
    bool any_zero = false;
    for (const auto& f : fs) {
        e.mean *= f.mean;
        if (f.mean == 0.0)
            any_zero = true;
        else
            rel2 += (f.stderr / f.mean) * (f.stderr / f.mean);
    }
    if (!any_zero) e.stderr = std::abs(e.mean) * std::sqrt(rel2);
    return e;
}

Estimate assemble_sigma(int m, int l, const Eigen::VectorXd& xi, const Eigen::VectorXd& zeta, const PairStats& st) {
    std::vector<Estimate> fs;
    fs.push_back(m == 0 ? Estimate{xi.dot(zeta), 0.0} : st.C[static_cast<std::size_t>(m)]);
    for (int k = m + 1; k <= l; ++k) fs.push_back(st.D[static_cast<std::size_t>(k)]);
    return product(fs);
}

}  // namespace

std::size_t KernelTable::index_of(const Eigen::VectorXd& xi) const {
    for (std::size_t i = 0; i < inputs.size(); ++i)
        if (inputs[i].size() == xi.size() && inputs[i] == xi) return i;
    throw std::out_of_range("input is not in the kernel table");
}

double KernelTable::min_eigenvalue() const {
    if (values.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(values, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

void KernelTable::write_csv(std::ostream& os) const {
    const bool se = stderr.size() > 0;
    os << "i,j,value" << (se ? ",stderr" : "") << '\n';
    os.precision(17);
    for (Eigen::Index i = 0; i < values.rows(); ++i)
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            os << i << ',' << j << ',' << values(i, j);
            if (se) os << ',' << stderr(i, j);
            os << '\n';
        }
}

nlohmann::json KernelTable::to_json() const {
    nlohmann::json j;
    j["inputs"] = nlohmann::json::array();
    for (const auto& x : inputs) j["inputs"].push_back(std::vector<double>(x.data(), x.data() + x.size()));
    j["values"] = nlohmann::json::array();
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(values.cols()));
        for (Eigen::Index c = 0; c < values.cols(); ++c) row[static_cast<std::size_t>(c)] = values(r, c);
        j["values"].push_back(row);
    }
    j["lag_case"] = lag_case;
    return j;
}

Estimate sigma_ml(int m, int l, const Eigen::VectorXd& xi, const Eigen::VectorXd& zeta, const AbcParam& param,
                  const Activation& act, const GaussQuad& quad) {
    param.validate();
    if (m < 0 || m > l) throw std::invalid_argument("sigma_ml needs 0 <= m <= l");
    if (l > param.L) throw std::invalid_argument("sigma_ml: l exceeds the number of hidden layers");
    if (l == 0) return {xi.dot(zeta), 0.0};
    return assemble_sigma(m, l, xi, zeta, pair_stats(xi, zeta, l, act, quad));
}

KernelWeights kernel_weights(const AbcParam& param) {
    param.validate();
    const int L = param.L;
    const Rational ab = param.a_at(L + 1) + param.b_at(L + 1);
    const Rational ac = 2 * param.a_at(L + 1) + param.c;
    KernelWeights w;
    w.last_layer = ac == kOne;
    w.through_layers = ab + r_value(param) == kOne;
    w.lag_case = ab > ac;

    // update-scale exponents of W^l and of h^l (smaller exponent = larger)
    std::vector<Rational> eW(static_cast<std::size_t>(L) + 1), eh(static_cast<std::size_t>(L) + 1);
    for (int l = 1; l <= L; ++l) {
        const auto k = static_cast<std::size_t>(l);
        eW[k] = layer_r(param, l);
        eh[k] = l == 1 ? eW[k] : std::min(eW[k], eh[k - 1]);
    }
    w.ell = L;
    while (w.ell > 1 && eh[static_cast<std::size_t>(w.ell - 1)] == eh[static_cast<std::size_t>(L)]) --w.ell;
    w.vartheta.assign(static_cast<std::size_t>(L) + 1, false);
    for (int l = 1; l <= L; ++l) w.vartheta[static_cast<std::size_t>(l)] = eW[static_cast<std::size_t>(l)] == eh[static_cast<std::size_t>(l)];
    return w;
}

KernelTable limit_kernel(const AbcParam& param, const Activation& act, const std::vector<Eigen::VectorXd>& inputs,
                         const GaussQuad& quad) {
    const Classification cls = classify(param);
    if (cls.regime != Regime::KernelRegime)
        throw std::domain_error("limit_kernel needs a kernel-regime parametrization, got " + to_string(cls.regime));
    const KernelWeights w = kernel_weights(param);
    const int L = param.L;
    const auto N = static_cast<Eigen::Index>(inputs.size());

    KernelTable K;
    K.inputs = inputs;
    K.lag_case = w.lag_case;
    K.values = Eigen::MatrixXd::Zero(N, N);
    const bool mc = quad.mc_samples > 0;
    if (mc) K.stderr = Eigen::MatrixXd::Zero(N, N);

    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
    for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) pairs.emplace_back(i, j);

    parallel_chunks(pairs.size(), 1, [&](std::size_t b, std::size_t e) {
        for (std::size_t p = b; p < e; ++p) {
            const auto [i, j] = pairs[p];
            GaussQuad q = quad;
            q.seed = hash_combine(quad.seed, p);
            const auto& xi = inputs[static_cast<std::size_t>(i)];
            const auto& zeta = inputs[static_cast<std::size_t>(j)];
            const PairStats st = pair_stats(xi, zeta, L, act, q);
            double v = 0.0, var = 0.0;
            auto add = [&](const Estimate& s) {
                v += s.mean;
                var += s.stderr * s.stderr;
            };
            if (w.last_layer) add(assemble_sigma(L, L, xi, zeta, st));
            if (!w.lag_case && w.through_layers)
                for (int m = w.ell - 1; m <= L - 1; ++m)
                    if (w.vartheta[static_cast<std::size_t>(m + 1)]) add(assemble_sigma(m, L, xi, zeta, st));
            K.values(i, j) = K.values(j, i) = v;
            if (mc) K.stderr(i, j) = K.stderr(j, i) = std::sqrt(var);
        }
    });
    return K;
}

KernelTrajectory kgd_run(const KernelTable& K, const TrainRoutine& routine, int T, const Eigen::MatrixXd& f0) {
    if (T < 0) throw std::invalid_argument("T must be >= 0");
    if (routine.size() == 0 || routine.inputs.size() != routine.targets.size())
        throw std::invalid_argument("routine needs paired, nonempty data");
    const auto N = static_cast<Eigen::Index>(K.inputs.size());
    const Eigen::Index d_o = routine.targets[0].size();
    std::vector<std::size_t> idx;
    for (const auto& x : routine.inputs) idx.push_back(K.index_of(x));

    Eigen::MatrixXd f = f0.size() == 0 ? Eigen::MatrixXd::Zero(N, d_o) : f0;
    if (f.rows() != N || f.cols() != d_o) throw std::invalid_argument("f0 must be inputs x output dim");

    KernelTrajectory out;
    const auto B = static_cast<std::size_t>(std::max(1, routine.batch_size));
    for (int t = 0; t <= T; ++t) {
        double loss = 0.0;
        Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(N, d_o);
        for (std::size_t k = 0; k < B; ++k) {
            const std::size_t r = (static_cast<std::size_t>(t) * B + k) % routine.size();
            const auto row = static_cast<Eigen::Index>(idx[r]);
            const Eigen::VectorXd ft = f.row(row).transpose();
            loss += loss_value(routine.loss, ft, routine.targets[r]);
            const Eigen::VectorXd chi = loss_deriv(routine.loss, ft, routine.targets[r]);
            delta += K.values.col(row) * chi.transpose();
        }
        out.f.push_back(f);
        out.loss.push_back(loss / static_cast<double>(B));
        if (t < T) f -= routine.eta / static_cast<double>(B) * delta;
    }
    return out;
}

}  // namespace abclim
