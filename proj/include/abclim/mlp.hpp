#pragma once

#include "abclim/abc.hpp"
#include "abclim/activation.hpp"
#include "abclim/loss.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace abclim {

struct MlpOptions {
    // Hidden bias on layer 1 with exponents a = -1/2, b = 1/2 (shallow nets).
    bool hidden_bias = false;
    // Backward pass through an independent copy of each middle matrix
    // instead of its transpose.
    bool decoupled_backprop = false;
    // Multiplies every init standard deviation of layer l (1-based); empty = all 1.
    std::vector<double> init_scale;
};

struct ForwardCache {
    std::vector<Eigen::VectorXd> h;  // h[0] = h^1 ... h[L-1] = h^L
    std::vector<Eigen::VectorXd> x;  // x[l] = phi(h[l])
    Eigen::VectorXd f;
};

// Gradients w.r.t. the trainable tensors w^l (and bias if present).
struct Gradients {
    std::vector<Eigen::MatrixXd> w;
    Eigen::VectorXd bias;  // empty if no bias

    Gradients& operator+=(const Gradients& o);
    Gradients& operator*=(double s);
    double squared_norm() const;
};

class FiniteMlp {
public:
    static FiniteMlp init(const AbcParam& param, int n, int d, int d_o, Activation act,
                          std::uint64_t seed, const MlpOptions& opts = {});

    ForwardCache forward(const Eigen::VectorXd& xi) const;
    Eigen::VectorXd output(const Eigen::VectorXd& xi) const { return forward(xi).f; }

    // d loss / d w^l for one example.
    Gradients gradients(const Eigen::VectorXd& xi, const Eigen::VectorXd& y, Loss loss) const;
    // Same backward pass seeded with an arbitrary output cotangent.
    Gradients backward(const ForwardCache& cache, const Eigen::VectorXd& xi,
                       const Eigen::VectorXd& cotangent) const;

    // w^l -= lr * g^l for every trainable layer (decoupled copies follow).
    void apply(const Gradients& g, double lr);

    // One SGD step on a batch: w <- w - eta n^{-c} mean_b grad.
    void sgd_step(std::span<const Eigen::VectorXd> xs, std::span<const Eigen::VectorXd> ys,
                  double eta, Loss loss);

    // Resamples the readout layer from the same init distribution.
    void reinit_last_layer(std::uint64_t seed);

    const AbcParam& param() const { return param_; }
    int width() const { return n_; }
    int input_dim() const { return d_; }
    int output_dim() const { return d_o_; }
    const Activation& activation() const { return act_; }
    double multiplier(int l) const { return mult_.at(static_cast<std::size_t>(l - 1)); }
    double lr_scale() const { return lr_scale_; }

    // Trainable tensors, w(l) for l in 1..L+1.
    Eigen::MatrixXd& w(int l) { return w_.at(static_cast<std::size_t>(l - 1)); }
    const Eigen::MatrixXd& w(int l) const { return w_.at(static_cast<std::size_t>(l - 1)); }
    bool has_bias() const { return bias_.size() > 0; }
    Eigen::VectorXd& bias() { return bias_; }
    const Eigen::VectorXd& bias() const { return bias_; }
    double bias_multiplier() const { return bias_mult_; }

    // Layers excluded from training keep zero gradient in sgd_step.
    void set_trainable(int l, bool on) { trainable_.at(static_cast<std::size_t>(l - 1)) = on; }
    bool trainable(int l) const { return trainable_.at(static_cast<std::size_t>(l - 1)); }

    void save(std::ostream& os) const;
    static FiniteMlp load(std::istream& is);

private:
    AbcParam param_;
    int n_ = 0, d_ = 0, d_o_ = 0;
    Activation act_;
    MlpOptions opts_;
    std::vector<Eigen::MatrixXd> w_;
    std::vector<Eigen::MatrixXd> w_back_;  // decoupled stand-ins for w^T (l >= 2)
    std::vector<double> mult_;
    std::vector<bool> trainable_;
    Eigen::VectorXd bias_;
    double bias_mult_ = 1.0;
    double lr_scale_ = 1.0;
};

double coordinate_size(std::span<const double> v);
inline double coordinate_size(const Eigen::VectorXd& v) {
    return coordinate_size(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

double feature_kernel(const FiniteMlp& net, const Eigen::VectorXd& xi, const Eigen::VectorXd& zeta);

// <grad f(xi), grad f(zeta)> with the n^{-c} learning-rate factor included,
// so one kernel step with base rate eta matches one SGD step to first order.
double empirical_ntk(const FiniteMlp& net, const Eigen::VectorXd& xi, const Eigen::VectorXd& zeta);

struct TrainRoutine {
    double eta = 1.0;
    std::vector<Eigen::VectorXd> inputs;
    std::vector<Eigen::VectorXd> targets;
    Loss loss = Loss::mse;
    int batch_size = 1;

    std::size_t size() const { return inputs.size(); }
};

struct Trajectory {
    std::vector<std::string> probe_names;
    struct Row {
        int t = 0;
        double loss = 0.0;
        std::vector<double> probes;
    };
    std::vector<Row> rows;
};

struct Probe {
    std::string name;
    std::function<double(const FiniteMlp&)> eval;
};

// Runs T SGD steps; row t records the batch loss at step t (before the
// update) and every probe evaluated on the current net.
Trajectory train(FiniteMlp& net, const TrainRoutine& routine, int T,
                 std::span<const Probe> probes = {});

// Standard probe: each output coordinate of f on the given input.
std::vector<Probe> output_probes(const std::vector<Eigen::VectorXd>& inputs);

}  // namespace abclim
