#include "abclim/mlp.hpp"

#include "abclim/io.hpp"
#include "abclim/rng.hpp"

#include <boost/rational.hpp>

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace abclim {

namespace {

double width_power(int n, const Rational& e) {
    return std::pow(static_cast<double>(n), boost::rational_cast<double>(e));
}

Eigen::MatrixXd gaussian_matrix(Rng rng, Eigen::Index rows, Eigen::Index cols, double std) {
    Eigen::MatrixXd m(rows, cols);
    // Row-major fill order so that the draw sequence does not depend on
    // Eigen's storage order.
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = std * rng.normal();
    return m;
}

Eigen::VectorXd apply_act(const Activation& act, const Eigen::VectorXd& h) {
    return h.unaryExpr([&](double v) { return act.value(v); });
}
Eigen::VectorXd apply_dact(const Activation& act, const Eigen::VectorXd& h) {
    return h.unaryExpr([&](double v) { return act.deriv(v); });
}

}  // namespace

Gradients& Gradients::operator+=(const Gradients& o) {
    if (w.empty()) return *this = o;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += o.w[i];
    if (bias.size() > 0) bias += o.bias;
    return *this;
}

Gradients& Gradients::operator*=(double s) {
    for (auto& m : w) m *= s;
    bias *= s;
    return *this;
}

double Gradients::squared_norm() const {
    double s = bias.squaredNorm();
    for (const auto& m : w) s += m.squaredNorm();
    return s;
}

FiniteMlp FiniteMlp::init(const AbcParam& param, int n, int d, int d_o, Activation act,
                          std::uint64_t seed, const MlpOptions& opts) {
    param.validate();
    if (n < 1 || d < 1 || d_o < 1) throw std::invalid_argument("dimensions must be positive");
    FiniteMlp net;
    net.param_ = param;
    net.n_ = n;
    net.d_ = d;
    net.d_o_ = d_o;
    net.act_ = act;
    net.opts_ = opts;
    const int L = param.L;
    for (int l = 1; l <= L + 1; ++l) {
        const Eigen::Index rows = l == L + 1 ? d_o : n;
        const Eigen::Index cols = l == 1 ? d : n;
        const double scale = opts.init_scale.empty() ? 1.0 : opts.init_scale.at(l - 1);
        const double std = scale * width_power(n, -param.b_at(l));
        net.w_.push_back(gaussian_matrix(Rng(hash_combine(seed, l)), rows, cols, std));
        net.mult_.push_back(width_power(n, -param.a_at(l)));
        net.trainable_.push_back(true);
        if (opts.decoupled_backprop && l >= 2 && l <= L)
            net.w_back_.push_back(gaussian_matrix(Rng(hash_combine(seed, 1000 + l)), cols, rows, std));
        else
            net.w_back_.emplace_back();
    }
    if (opts.hidden_bias) {
        const double std = width_power(n, Rational(-1, 2));
        net.bias_ = gaussian_matrix(Rng(hash_combine(seed, 999)), n, 1, std).col(0);
        net.bias_mult_ = width_power(n, Rational(1, 2));
    }
    net.lr_scale_ = width_power(n, -param.c);
    return net;
}

ForwardCache FiniteMlp::forward(const Eigen::VectorXd& xi) const {
    if (xi.size() != d_) throw std::invalid_argument("input dimension mismatch");
    const int L = param_.L;
    ForwardCache c;
    Eigen::VectorXd h = mult_[0] * (w_[0] * xi);
    if (has_bias()) h += bias_mult_ * bias_;
    for (int l = 1; l <= L; ++l) {
        if (l > 1) h = mult_[l - 1] * (w_[l - 1] * c.x.back());
        c.x.push_back(apply_act(act_, h));
        c.h.push_back(std::move(h));
    }
    c.f = mult_[L] * (w_[L] * c.x.back());
    return c;
}

Gradients FiniteMlp::backward(const ForwardCache& c, const Eigen::VectorXd& xi,
                              const Eigen::VectorXd& cotangent) const {
    const int L = param_.L;
    Gradients g;
    g.w.resize(L + 1);
    g.w[L] = mult_[L] * cotangent * c.x[L - 1].transpose();
    Eigen::VectorXd dx = mult_[L] * (w_[L].transpose() * cotangent);
    for (int l = L; l >= 1; --l) {
        Eigen::VectorXd dh = apply_dact(act_, c.h[l - 1]).cwiseProduct(dx);
        const Eigen::VectorXd& below = l == 1 ? xi : c.x[l - 2];
        g.w[l - 1] = mult_[l - 1] * dh * below.transpose();
        if (l == 1) {
            if (has_bias()) g.bias = bias_mult_ * dh;
        } else if (opts_.decoupled_backprop) {
            dx = mult_[l - 1] * (w_back_[l - 1] * dh);
        } else {
            dx = mult_[l - 1] * (w_[l - 1].transpose() * dh);
        }
    }
    return g;
}

Gradients FiniteMlp::gradients(const Eigen::VectorXd& xi, const Eigen::VectorXd& y, Loss loss) const {
    const ForwardCache c = forward(xi);
    return backward(c, xi, loss_deriv(loss, c.f, y));
}

void FiniteMlp::apply(const Gradients& g, double lr) {
    for (int l = 1; l <= param_.L + 1; ++l) {
        if (!trainable_[l - 1]) continue;
        w_[l - 1].noalias() -= lr * g.w[l - 1];
        if (w_back_[l - 1].size() > 0) w_back_[l - 1].noalias() -= lr * g.w[l - 1].transpose();
    }
    if (has_bias() && trainable_[0] && g.bias.size() > 0) bias_ -= lr * g.bias;
}

void FiniteMlp::sgd_step(std::span<const Eigen::VectorXd> xs, std::span<const Eigen::VectorXd> ys,
                         double eta, Loss loss) {
    if (xs.size() != ys.size() || xs.empty()) throw std::invalid_argument("sgd_step: bad batch");
    Gradients total;
    for (std::size_t i = 0; i < xs.size(); ++i) total += gradients(xs[i], ys[i], loss);
    if (xs.size() > 1) total *= 1.0 / static_cast<double>(xs.size());
    apply(total, eta * lr_scale_);
}

void FiniteMlp::reinit_last_layer(std::uint64_t seed) {
    const int L = param_.L;
    const double scale = opts_.init_scale.empty() ? 1.0 : opts_.init_scale.at(L);
    const double std = scale * width_power(n_, -param_.b_at(L + 1));
    w_[L] = gaussian_matrix(Rng(hash_combine(seed, L + 1)), d_o_, n_, std);
}

void FiniteMlp::save(std::ostream& os) const {
    nlohmann::json header;
    header["format"] = "abclim-mlp";
    header["param"] = to_json(param_);
    header["n"] = n_;
    header["d"] = d_;
    header["d_o"] = d_o_;
    header["activation"] = act_.name();
    header["hidden_bias"] = opts_.hidden_bias;
    header["decoupled_backprop"] = opts_.decoupled_backprop;
    header["init_scale"] = opts_.init_scale;
    std::vector<const Eigen::MatrixXd*> tensors;
    auto& shapes = header["tensors"] = nlohmann::json::array();
    for (int l = 1; l <= param_.L + 1; ++l) {
        shapes.push_back({{"name", "w" + std::to_string(l)}, {"rows", w_[l - 1].rows()}, {"cols", w_[l - 1].cols()}});
        tensors.push_back(&w_[l - 1]);
    }
    for (int l = 1; l <= param_.L + 1; ++l) {
        if (w_back_[l - 1].size() == 0) continue;
        shapes.push_back({{"name", "wback" + std::to_string(l)},
                          {"rows", w_back_[l - 1].rows()},
                          {"cols", w_back_[l - 1].cols()}});
        tensors.push_back(&w_back_[l - 1]);
    }
    Eigen::MatrixXd bias_mat = bias_;
    if (has_bias()) {
        shapes.push_back({{"name", "bias"}, {"rows", bias_.size()}, {"cols", 1}});
        tensors.push_back(&bias_mat);
    }
    write_binary_blob(os, header, tensors);
}

FiniteMlp FiniteMlp::load(std::istream& is) {
    auto [header, tensors] = read_binary_blob(is);
    if (header.value("format", "") != "abclim-mlp") throw std::runtime_error("not an mlp checkpoint");
    MlpOptions opts;
    opts.hidden_bias = header.at("hidden_bias").get<bool>();
    opts.decoupled_backprop = header.at("decoupled_backprop").get<bool>();
    opts.init_scale = header.at("init_scale").get<std::vector<double>>();
    FiniteMlp net = init(param_from_json(header.at("param")), header.at("n").get<int>(),
                         header.at("d").get<int>(), header.at("d_o").get<int>(),
                         Activation::parse(header.at("activation").get<std::string>()), 0, opts);
    const auto& shapes = header.at("tensors");
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        const std::string name = shapes[i].at("name").get<std::string>();
        if (name == "bias") {
            net.bias_ = tensors[i].col(0);
        } else if (name.rfind("wback", 0) == 0) {
            net.w_back_.at(std::stoul(name.substr(5)) - 1) = tensors[i];
        } else {
            net.w_.at(std::stoul(name.substr(1)) - 1) = tensors[i];
        }
    }
    return net;
}

double coordinate_size(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("coordinate_size of empty vector");
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s / static_cast<double>(v.size()));
}

double feature_kernel(const FiniteMlp& net, const Eigen::VectorXd& xi, const Eigen::VectorXd& zeta) {
    const auto a = net.forward(xi);
    const auto b = net.forward(zeta);
    return a.x.back().dot(b.x.back()) / static_cast<double>(net.width());
}

double empirical_ntk(const FiniteMlp& net, const Eigen::VectorXd& xi, const Eigen::VectorXd& zeta) {
    if (net.output_dim() != 1) throw std::invalid_argument("empirical_ntk needs a scalar output");
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
    const Gradients ga = net.backward(net.forward(xi), xi, one);
    const Gradients gb = net.backward(net.forward(zeta), zeta, one);
    double k = 0.0;
    for (int l = 1; l <= net.param().L + 1; ++l) {
        if (!net.trainable(l)) continue;
        k += (ga.w[l - 1].array() * gb.w[l - 1].array()).sum();
    }
    if (net.has_bias() && net.trainable(1)) k += ga.bias.dot(gb.bias);
    return net.lr_scale() * k;
}

Trajectory train(FiniteMlp& net, const TrainRoutine& routine, int T, std::span<const Probe> probes) {
    if (T < 0) throw std::invalid_argument("T must be >= 0");
    if (routine.size() == 0 || routine.inputs.size() != routine.targets.size())
        throw std::invalid_argument("routine needs paired, nonempty data");
    Trajectory traj;
    for (const auto& p : probes) traj.probe_names.push_back(p.name);
    const auto B = static_cast<std::size_t>(std::max(1, routine.batch_size));
    std::vector<Eigen::VectorXd> xs(B), ys(B);
    for (int t = 0; t <= T; ++t) {
        double loss = 0.0;
        for (std::size_t k = 0; k < B; ++k) {
            const std::size_t idx = (static_cast<std::size_t>(t) * B + k) % routine.size();
            xs[k] = routine.inputs[idx];
            ys[k] = routine.targets[idx];
            loss += loss_value(routine.loss, net.output(xs[k]), ys[k]);
        }
        Trajectory::Row row;
        row.t = t;
        row.loss = loss / static_cast<double>(B);
        for (const auto& p : probes) row.probes.push_back(p.eval(net));
        traj.rows.push_back(std::move(row));
        if (t < T) net.sgd_step(xs, ys, routine.eta, routine.loss);
    }
    return traj;
}

std::vector<Probe> output_probes(const std::vector<Eigen::VectorXd>& inputs) {
    std::vector<Probe> out;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Eigen::VectorXd xi = inputs[i];
        out.push_back({"f" + std::to_string(i), [xi](const FiniteMlp& net) { return net.output(xi)[0]; }});
    }
    return out;
}

}  // namespace abclim
