#include "abclim/linlim.hpp"

#include "abclim/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace abclim {

CoeffNet CoeffNet::diagonal(int d, int d_o, const LinHyper& hyper) {
    if (d < 1 || d_o < 1) throw std::invalid_argument("dims must be >= 1");
    if (hyper.sigma_u < 0 || hyper.sigma_v < 0) throw std::invalid_argument("init scales must be >= 0");
    CoeffNet net;
    net.d_ = d;
    net.d_o_ = d_o;
    net.hyper_ = hyper;
    const int k = d + d_o;
    net.uu_ = Eigen::MatrixXd::Zero(k, d);
    net.uu_.topRows(d) = hyper.sigma_u * Eigen::MatrixXd::Identity(d, d);
    net.vv_ = Eigen::MatrixXd::Zero(d_o, k);
    net.vv_.rightCols(d_o) = hyper.sigma_v * Eigen::MatrixXd::Identity(d_o, d_o);
    net.bb_ = Eigen::VectorXd::Zero(k);
    return net;
}

CoeffNet CoeffNet::finite(int n, int d, int d_o, const LinHyper& hyper, std::uint64_t seed) {
    if (n < 1 || d < 1 || d_o < 1) throw std::invalid_argument("dims must be >= 1");
    CoeffNet net;
    net.d_ = d;
    net.d_o_ = d_o;
    net.hyper_ = hyper;
    const double su = hyper.sigma_u / std::sqrt(static_cast<double>(n));
    const double sv = hyper.sigma_v / std::sqrt(static_cast<double>(n));
    Rng ru(hash_combine(seed, 1));
    Rng rv(hash_combine(seed, 2));
    net.uu_.resize(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) net.uu_(i, j) = su * ru.normal();
    net.vv_.resize(d_o, n);
    for (int o = 0; o < d_o; ++o)
        for (int i = 0; i < n; ++i) net.vv_(o, i) = sv * rv.normal();
    net.bb_ = Eigen::VectorXd::Zero(n);
    return net;
}

Eigen::MatrixXd CoeffNet::forward(const Eigen::MatrixXd& Xi) const {
    if (Xi.cols() != d_) throw std::invalid_argument("input dimension mismatch");
    Eigen::MatrixXd H = Xi * uu_.transpose();
    H.rowwise() += bb_.transpose();
    return H * vv_.transpose();
}

Eigen::VectorXd CoeffNet::forward(const Eigen::VectorXd& xi) const {
    return forward(Eigen::MatrixXd(xi.transpose())).row(0).transpose();
}

CoeffNet::Direction CoeffNet::direction(const Eigen::MatrixXd& Xi, const Eigen::MatrixXd& chi) const {
    Eigen::MatrixXd H = Xi * uu_.transpose();
    H.rowwise() += bb_.transpose();
    Direction dir;
    dir.du = -vv_.transpose() * chi.transpose() * Xi;
    dir.dv = -chi.transpose() * H;
    const double a2 = hyper_.alpha * hyper_.alpha;
    if (a2 > 0.0)
        dir.db = -a2 * (chi.colwise().sum() * vv_).transpose();
    else
        dir.db = Eigen::VectorXd::Zero(bb_.size());
    return dir;
}

double CoeffNet::clip_norm(const Direction& dir) const {
    double g2 = dir.du.squaredNorm() + dir.dv.squaredNorm();
    if (hyper_.alpha != 0.0) g2 += (dir.db / hyper_.alpha).squaredNorm();
    return std::sqrt(g2);
}

void CoeffNet::apply(const Direction& dir, double scale) {
    const double eta = hyper_.eta;
    const double decay = eta * hyper_.gamma;
    uu_ += eta * scale * dir.du - decay * uu_;
    vv_ += eta * scale * dir.dv - decay * vv_;
    bb_ += eta * scale * dir.db - decay * bb_;
}

CoeffNet::StepInfo CoeffNet::step_with_chi(const Eigen::MatrixXd& Xi, const Eigen::MatrixXd& chi,
                                           bool allow_clip) {
    const Direction dir = direction(Xi, chi);
    StepInfo info;
    info.grad_norm = clip_norm(dir);
    if (allow_clip && std::isfinite(hyper_.clip) && info.grad_norm > 0.0)
        info.rho = std::min(1.0, hyper_.clip / info.grad_norm);
    apply(dir, info.rho);
    return info;
}

CoeffNet::StepInfo CoeffNet::sgd_step(const Eigen::MatrixXd& Xi, const Eigen::MatrixXd& Y, Loss loss) {
    const Eigen::MatrixXd F = forward(Xi);
    Eigen::MatrixXd chi(F.rows(), F.cols());
    for (Eigen::Index b = 0; b < F.rows(); ++b)
        chi.row(b) = loss_deriv(loss, F.row(b).transpose(), Y.row(b).transpose()).transpose();
    return step_with_chi(Xi, chi);
}

namespace {

Eigen::MatrixXd probe_outputs(const std::vector<Eigen::VectorXd>& probes, int d_o,
                              const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(probes.size()), d_o);
    for (std::size_t i = 0; i < probes.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = f(probes[i]).transpose();
    return out;
}

}  // namespace

LinLimitTrajectory lin1lp_run(const TrainRoutine& routine, int T, const std::vector<Eigen::VectorXd>& probes) {
    if (routine.size() == 0) throw std::invalid_argument("empty routine");
    const auto d = routine.inputs[0].size();
    const auto d_o = routine.targets[0].size();
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(d_o, d_o);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(d_o, d);
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(d_o, d);
    Eigen::MatrixXd D = Eigen::MatrixXd::Identity(d, d);
    LinLimitTrajectory out;
    for (int t = 0; t <= T; ++t) {
        const Eigen::MatrixXd M = A * C + B * D;
        out.f.push_back(probe_outputs(probes, static_cast<int>(d_o), [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(M * x); }));
        const auto& xi = routine.inputs[static_cast<std::size_t>(t) % routine.size()];
        const auto& y = routine.targets[static_cast<std::size_t>(t) % routine.size()];
        const Eigen::VectorXd f = M * xi;
        out.loss.push_back(loss_value(routine.loss, f, y));
        if (t == T) break;
        const Eigen::VectorXd chi = loss_deriv(routine.loss, f, y);
        const double eta = routine.eta;
        const Eigen::MatrixXd A_next = A - eta * chi * (C * xi).transpose();
        const Eigen::MatrixXd B_next = B - eta * chi * (D * xi).transpose();
        C -= eta * (A.transpose() * chi) * xi.transpose();
        D -= eta * (B.transpose() * chi) * xi.transpose();
        A = A_next;
        B = B_next;
    }
    return out;
}

LinLimitTrajectory coeff_run(CoeffNet net, const TrainRoutine& routine, int T,
                             const std::vector<Eigen::VectorXd>& probes) {
    if (routine.size() == 0) throw std::invalid_argument("empty routine");
    net.hyper().eta = routine.eta;
    LinLimitTrajectory out;
    for (int t = 0; t <= T; ++t) {
        out.f.push_back(probe_outputs(probes, net.output_dim(), [&](const Eigen::VectorXd& x) { return net.forward(x); }));
        const auto& xi = routine.inputs[static_cast<std::size_t>(t) % routine.size()];
        const auto& y = routine.targets[static_cast<std::size_t>(t) % routine.size()];
        out.loss.push_back(loss_value(routine.loss, net.forward(xi), y));
        if (t == T) break;
        net.sgd_step(Eigen::MatrixXd(xi.transpose()), Eigen::MatrixXd(y.transpose()), routine.loss);
    }
    return out;
}

}  // namespace abclim
