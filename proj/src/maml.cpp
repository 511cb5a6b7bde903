#include "abclim/maml.hpp"

#include "abclim/parallel.hpp"
#include "abclim/rng.hpp"

#include <Eigen/QR>

#include <cmath>
#include <stdexcept>

namespace abclim {

std::vector<FewShotTask> gen_fewshot(std::uint64_t seed, const FewShotConfig& cfg, std::size_t count,
                                     std::size_t first_index) {
    if (cfg.d < 1 || cfg.n_way < 1 || cfg.k_shot < 1 || cfg.n_query < 1 || cfg.latent_dim < 0)
        throw std::invalid_argument("few-shot dims must be positive");
    const int k = cfg.latent_dim == 0 ? cfg.d : std::min(cfg.latent_dim, cfg.d);

    // orthonormal basis of the shared prototype subspace
    Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(cfg.d, k);
    if (cfg.latent_dim != 0) {
        Rng rb(hash_combine(seed, 0xba515));
        Eigen::MatrixXd g(cfg.d, k);
        for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = rb.normal();
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
        basis = qr.householderQ() * Eigen::MatrixXd::Identity(cfg.d, k);
    }

    std::vector<FewShotTask> tasks;
    tasks.reserve(count);
    for (std::size_t t = 0; t < count; ++t) {
        Rng rng(hash_combine(hash_combine(seed, 0x7a5c), first_index + t));
        FewShotTask task;
        task.n_way = cfg.n_way;
        task.k_shot = cfg.k_shot;
        Eigen::MatrixXd protos(cfg.n_way, cfg.d);
        for (int c = 0; c < cfg.n_way; ++c) {
            Eigen::VectorXd z(k);
            for (int i = 0; i < k; ++i) z(i) = cfg.proto_scale / std::sqrt(static_cast<double>(k)) * rng.normal();
            protos.row(c) = (basis * z).transpose();
        }
        const double noise_sd = cfg.noise / std::sqrt(static_cast<double>(cfg.d));
        auto sample = [&](int per_class, Eigen::MatrixXd& X, Eigen::MatrixXd& Y) {
            X.resize(cfg.n_way * per_class, cfg.d);
            Y = Eigen::MatrixXd::Zero(cfg.n_way * per_class, cfg.n_way);
            for (int c = 0; c < cfg.n_way; ++c)
                for (int s = 0; s < per_class; ++s) {
                    const int row = c * per_class + s;
                    for (int i = 0; i < cfg.d; ++i) X(row, i) = protos(c, i) + noise_sd * rng.normal();
                    Y(row, c) = 1.0;
                }
        };
        sample(cfg.k_shot, task.train_x, task.train_y);
        sample(cfg.n_query, task.test_x, task.test_y);
        tasks.push_back(std::move(task));
    }
    return tasks;
}

double argmax_accuracy(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& targets) {
    if (logits.rows() != targets.rows() || logits.cols() != targets.cols())
        throw std::invalid_argument("logits and targets differ in shape");
    if (logits.rows() == 0) return 0.0;
    int hits = 0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        Eigen::Index a = 0, b = 0;
        logits.row(r).maxCoeff(&a);  // Eigen keeps the first maximum
        targets.row(r).maxCoeff(&b);
        hits += a == b;
    }
    return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

namespace {

Eigen::MatrixXd loss_derivs(Loss loss, const Eigen::MatrixXd& F, const Eigen::MatrixXd& Y) {
    Eigen::MatrixXd chi(F.rows(), F.cols());
    for (Eigen::Index r = 0; r < F.rows(); ++r)
        chi.row(r) = loss_deriv(loss, F.row(r).transpose(), Y.row(r).transpose()).transpose();
    return chi;
}

double total_loss(Loss loss, const Eigen::MatrixXd& F, const Eigen::MatrixXd& Y) {
    double s = 0.0;
    for (Eigen::Index r = 0; r < F.rows(); ++r) s += loss_value(loss, F.row(r).transpose(), Y.row(r).transpose());
    return s;
}

// Uniform access to the two parametric models. grad() returns the summed
// loss gradient over the rows of X; descend() moves against it.
struct CoeffOps {
    using Grad = CoeffNet::Direction;  // stored as a descent direction
    static Eigen::MatrixXd predict(const CoeffNet& net, const Eigen::MatrixXd& X) { return net.forward(X); }
    static Grad grad(const CoeffNet& net, const Eigen::MatrixXd& X, const Eigen::MatrixXd& chi) {
        return net.direction(X, chi);
    }
    static void add(Grad& acc, const Grad& g) {
        if (acc.du.size() == 0) {
            acc = g;
            return;
        }
        acc.du += g.du;
        acc.dv += g.dv;
        acc.db += g.db;
    }
    static double norm(const CoeffNet& net, const Grad& g) { return net.clip_norm(g); }
    static void descend(CoeffNet& net, const Grad& g, double lr) {
        net.uu() += lr * g.du;
        net.vv() += lr * g.dv;
        net.bb() += lr * g.db;
    }
};

struct MlpOps {
    using Grad = Gradients;
    static Eigen::MatrixXd predict(const FiniteMlp& net, const Eigen::MatrixXd& X) {
        Eigen::MatrixXd F(X.rows(), net.output_dim());
        for (Eigen::Index r = 0; r < X.rows(); ++r) F.row(r) = net.output(X.row(r).transpose()).transpose();
        return F;
    }
    static Grad grad(const FiniteMlp& net, const Eigen::MatrixXd& X, const Eigen::MatrixXd& chi) {
        Grad acc;
        for (Eigen::Index r = 0; r < X.rows(); ++r) {
            const Eigen::VectorXd x = X.row(r).transpose();
            acc += net.backward(net.forward(x), x, chi.row(r).transpose());
        }
        return acc;
    }
    static void add(Grad& acc, const Grad& g) { acc += g; }
    static double norm(const FiniteMlp&, const Grad& g) { return std::sqrt(g.squared_norm()); }
    static void descend(FiniteMlp& net, const Grad& g, double lr) { net.apply(g, lr * net.lr_scale()); }
};

template <class Ops, class Net>
void adapt(Net& net, const FewShotTask& task, int steps, const MamlConfig& cfg) {
    if (cfg.eps == 0.0) return;
    for (int s = 0; s < steps; ++s) {
        const Eigen::MatrixXd chi = loss_derivs(cfg.loss, Ops::predict(net, task.train_x), task.train_y);
        Ops::descend(net, Ops::grad(net, task.train_x, chi), cfg.eps);
    }
}

template <class Ops, class Net>
MamlResult evaluate_impl(const Net& net, const std::vector<FewShotTask>& tasks, const MamlConfig& cfg) {
    std::vector<double> hits(tasks.size()), losses(tasks.size());
    parallel_chunks(tasks.size(), 1, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            Net a = net;
            adapt<Ops>(a, tasks[i], cfg.test_adapt_steps, cfg);
            const Eigen::MatrixXd F = Ops::predict(a, tasks[i].test_x);
            hits[i] = argmax_accuracy(F, tasks[i].test_y) * static_cast<double>(F.rows());
            losses[i] = total_loss(cfg.loss, F, tasks[i].test_y);
        }
    });
    MamlResult res;
    double h = 0.0, l = 0.0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        h += hits[i];
        l += losses[i];
        res.test_queries += static_cast<std::size_t>(tasks[i].test_x.rows());
    }
    if (res.test_queries > 0) {
        res.test_accuracy = h / static_cast<double>(res.test_queries);
        res.test_loss = l / static_cast<double>(res.test_queries);
    }
    return res;
}

template <class Ops, class Net>
MamlResult train_impl(Net& net, const std::vector<FewShotTask>& train_tasks,
                      const std::vector<FewShotTask>& test_tasks, const MamlConfig& cfg) {
    if (cfg.task_batch < 1) throw std::invalid_argument("task batch must be >= 1");
    std::vector<double> norms;
    const auto B = static_cast<std::size_t>(cfg.task_batch);
    for (std::size_t start = 0; start < train_tasks.size(); start += B) {
        const std::size_t end = std::min(start + B, train_tasks.size());
        std::vector<typename Ops::Grad> grads(end - start);
        parallel_chunks(end - start, 1, [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) {
                const FewShotTask& task = train_tasks[start + i];
                Net a = net;
                adapt<Ops>(a, task, cfg.adapt_steps, cfg);
                const Eigen::MatrixXd chi = loss_derivs(cfg.loss, Ops::predict(a, task.test_x), task.test_y);
                grads[i] = Ops::grad(a, task.test_x, chi);
            }
        });
        typename Ops::Grad total;
        for (const auto& g : grads) Ops::add(total, g);
        const double G = Ops::norm(net, total);
        norms.push_back(G);
        const double rho = (std::isfinite(cfg.clip) && G > cfg.clip) ? cfg.clip / G : 1.0;
        if (cfg.eta != 0.0) Ops::descend(net, total, cfg.eta * rho);
    }
    MamlResult res = evaluate_impl<Ops>(net, test_tasks, cfg);
    res.meta_grad_norm = std::move(norms);
    return res;
}

}  // namespace

MamlResult maml_finite(CoeffNet& net, const std::vector<FewShotTask>& train_tasks,
                       const std::vector<FewShotTask>& test_tasks, const MamlConfig& cfg) {
    return train_impl<CoeffOps>(net, train_tasks, test_tasks, cfg);
}

MamlResult maml_finite(FiniteMlp& net, const std::vector<FewShotTask>& train_tasks,
                       const std::vector<FewShotTask>& test_tasks, const MamlConfig& cfg) {
    return train_impl<MlpOps>(net, train_tasks, test_tasks, cfg);
}

MamlResult maml_evaluate(const CoeffNet& net, const std::vector<FewShotTask>& tasks, const MamlConfig& cfg) {
    return evaluate_impl<CoeffOps>(net, tasks, cfg);
}

MamlResult maml_evaluate(const FiniteMlp& net, const std::vector<FewShotTask>& tasks, const MamlConfig& cfg) {
    return evaluate_impl<MlpOps>(net, tasks, cfg);
}

KernelModelQ KernelModelQ::from_features(FeatureFn features, int d_o) {
    if (!features) throw std::invalid_argument("empty feature map");
    KernelModelQ m([features](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return features(a).dot(features(b)); },
                   d_o);
    m.features_ = std::move(features);
    return m;
}

void KernelModelQ::push(const Eigen::VectorXd& zeta, const Eigen::VectorXd& q) {
    if (q.size() != d_o_) throw std::invalid_argument("kernel entry has the wrong output dimension");
    if (features_) {
        const Eigen::VectorXd phi = features_(zeta);
        if (readout_.size() == 0) readout_ = Eigen::MatrixXd::Zero(d_o_, phi.size());
        readout_.noalias() += q * phi.transpose();
    }
    entries_.emplace_back(zeta, q);
}

void KernelModelQ::pop() {
    if (entries_.empty()) throw std::logic_error("pop on an empty kernel model");
    if (features_) {
        const auto& [zeta, q] = entries_.back();
        readout_.noalias() -= q * features_(zeta).transpose();
    }
    entries_.pop_back();
}

Eigen::VectorXd KernelModelQ::predict(const Eigen::VectorXd& xi) const {
    if (features_) return readout_.size() == 0 ? Eigen::VectorXd::Zero(d_o_) : Eigen::VectorXd(readout_ * features_(xi));
    Eigen::VectorXd f = Eigen::VectorXd::Zero(d_o_);
    for (const auto& [zeta, q] : entries_) f += q * kernel_(zeta, xi);
    return f;
}

Eigen::MatrixXd KernelModelQ::predict(const Eigen::MatrixXd& X) const {
    Eigen::MatrixXd F(X.rows(), d_o_);
    for (Eigen::Index r = 0; r < X.rows(); ++r) F.row(r) = predict(Eigen::VectorXd(X.row(r).transpose())).transpose();
    return F;
}

Eigen::MatrixXd KernelModelQ::gram(const Eigen::MatrixXd& X) const {
    if (features_) {
        std::vector<Eigen::VectorXd> phi;
        for (Eigen::Index r = 0; r < X.rows(); ++r) phi.push_back(features_(Eigen::VectorXd(X.row(r).transpose())));
        Eigen::MatrixXd Phi(X.rows(), phi.empty() ? 0 : phi[0].size());
        for (Eigen::Index r = 0; r < X.rows(); ++r) Phi.row(r) = phi[static_cast<std::size_t>(r)].transpose();
        return Phi * Phi.transpose();
    }
    Eigen::MatrixXd K(X.rows(), X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = 0; j < X.rows(); ++j)
            K(i, j) = kernel_(X.row(i).transpose(), X.row(j).transpose());
    return K;
}

namespace {

// Pushes the adaptation entries for `task` and returns how many were pushed.
std::size_t kernel_adapt(KernelModelQ& model, const FewShotTask& task, int steps, const MamlConfig& cfg) {
    std::size_t pushed = 0;
    for (int s = 0; s < steps; ++s) {
        const Eigen::MatrixXd chi = loss_derivs(cfg.loss, model.predict(task.train_x), task.train_y);
        for (Eigen::Index i = 0; i < task.train_x.rows(); ++i) {
            model.push(task.train_x.row(i).transpose(), -cfg.eps * chi.row(i).transpose());
            ++pushed;
        }
    }
    return pushed;
}

}  // namespace

KernelMamlResult maml_kernel(const KernelFn& kernel, int d_o, const std::vector<FewShotTask>& train_tasks,
                             const std::vector<FewShotTask>& test_tasks, const MamlConfig& cfg) {
    return maml_kernel(KernelModelQ(kernel, d_o), train_tasks, test_tasks, cfg);
}

KernelMamlResult maml_kernel(KernelModelQ model, const std::vector<FewShotTask>& train_tasks,
                             const std::vector<FewShotTask>& test_tasks, const MamlConfig& cfg) {
    if (cfg.task_batch < 1) throw std::invalid_argument("task batch must be >= 1");
    std::vector<double> norms;
    for (const FewShotTask& task : train_tasks) {
        const std::size_t pushed = kernel_adapt(model, task, cfg.adapt_steps, cfg);
        const Eigen::MatrixXd chi = loss_derivs(cfg.loss, model.predict(task.test_x), task.test_y);
        for (std::size_t i = 0; i < pushed; ++i) model.pop();

        const double g2 = (chi * chi.transpose()).cwiseProduct(model.gram(task.test_x)).sum();
        const double G = std::sqrt(std::max(g2, 0.0));
        norms.push_back(G);
        const double rho = (std::isfinite(cfg.clip) && G > cfg.clip) ? cfg.clip / G : 1.0;
        for (Eigen::Index i = 0; i < task.test_x.rows(); ++i)
            model.push(task.test_x.row(i).transpose(), -rho * cfg.eta * chi.row(i).transpose());
    }
    MamlResult res = maml_evaluate(model, test_tasks, cfg);
    res.meta_grad_norm = std::move(norms);
    return {std::move(model), std::move(res)};
}

MamlResult maml_evaluate(const KernelModelQ& model, const std::vector<FewShotTask>& tasks, const MamlConfig& cfg) {
    std::vector<double> hits(tasks.size()), losses(tasks.size());
    parallel_chunks(tasks.size(), 16, [&](std::size_t b, std::size_t e) {
        KernelModelQ work = model;
        for (std::size_t i = b; i < e; ++i) {
            const std::size_t pushed = kernel_adapt(work, tasks[i], cfg.test_adapt_steps, cfg);
            const Eigen::MatrixXd F = work.predict(tasks[i].test_x);
            for (std::size_t k = 0; k < pushed; ++k) work.pop();
            hits[i] = argmax_accuracy(F, tasks[i].test_y) * static_cast<double>(F.rows());
            losses[i] = total_loss(cfg.loss, F, tasks[i].test_y);
        }
    });
    MamlResult res;
    double h = 0.0, l = 0.0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        h += hits[i];
        l += losses[i];
        res.test_queries += static_cast<std::size_t>(tasks[i].test_x.rows());
    }
    if (res.test_queries > 0) {
        res.test_accuracy = h / static_cast<double>(res.test_queries);
        res.test_loss = l / static_cast<double>(res.test_queries);
    }
    return res;
}

McShallowKernel::McShallowKernel(Kind kind, Activation act, int d, std::size_t units, std::uint64_t seed)
    : kind_(kind), act_(act) {
    if (d < 1 || units < 2) throw std::invalid_argument("need d >= 1 and at least two units");
    Rng rw(hash_combine(seed, 1));
    Rng rv(hash_combine(seed, 2));
    const auto U = static_cast<Eigen::Index>(units);
    w_.resize(U, d);
    for (Eigen::Index i = 0; i < U; ++i)
        for (Eigen::Index j = 0; j < d; ++j) w_(i, j) = rw.normal();
    v2_.resize(U);
    for (Eigen::Index i = 0; i < U; ++i) {
        const double v = rv.normal();
        v2_(i) = v * v;
    }
}

Estimate McShallowKernel::estimate(const Eigen::VectorXd& xi, const Eigen::VectorXd& zeta) const {
    if (xi.size() != w_.cols() || zeta.size() != w_.cols()) throw std::invalid_argument("kernel input dimension");
    const Eigen::VectorXd a = w_ * xi;
    const Eigen::VectorXd b = w_ * zeta;
    const double dot = xi.dot(zeta);
    const auto U = a.size();
    double s = 0.0, s2 = 0.0;
    for (Eigen::Index i = 0; i < U; ++i) {
        // symmetric in (xi, zeta) term by term
        double c = act_.value(a(i)) * act_.value(b(i));
        if (kind_ == Kind::ntk) c += v2_(i) * act_.deriv(a(i)) * act_.deriv(b(i)) * dot;
        s += c;
        s2 += c * c;
    }
    const double n = static_cast<double>(U);
    Estimate e;
    e.mean = s / n;
    e.stderr = std::sqrt(std::max(s2 / n - e.mean * e.mean, 0.0) / (n - 1.0));
    return e;
}

double McShallowKernel::operator()(const Eigen::VectorXd& xi, const Eigen::VectorXd& zeta) const {
    return estimate(xi, zeta).mean;
}

Eigen::VectorXd McShallowKernel::features(const Eigen::VectorXd& xi) const {
    if (xi.size() != w_.cols()) throw std::invalid_argument("kernel input dimension");
    const Eigen::VectorXd a = w_ * xi;
    const auto U = a.size();
    const auto d = xi.size();
    const double inv = 1.0 / std::sqrt(static_cast<double>(U));
    Eigen::VectorXd phi(kind_ == Kind::ntk ? U * (1 + d) : U);
    for (Eigen::Index i = 0; i < U; ++i) phi(i) = inv * act_.value(a(i));
    if (kind_ == Kind::ntk)
        for (Eigen::Index i = 0; i < U; ++i)
            phi.segment(U + i * d, d) = (inv * std::sqrt(v2_(i)) * act_.deriv(a(i))) * xi;
    return phi;
}

FeatureFn McShallowKernel::feature_handle() const {
    return [k = *this](const Eigen::VectorXd& x) { return k.features(x); };
}

KernelFn McShallowKernel::handle() const {
    return [k = *this](const Eigen::VectorXd& x, const Eigen::VectorXd& z) { return k(x, z); };
}

McShallowKernel nngp_ntk_kernel_mc(McShallowKernel::Kind kind, const Activation& act, int d, std::size_t units,
                                   std::uint64_t seed) {
    return McShallowKernel(kind, act, d, units, seed);
}

}  // namespace abclim
