#pragma once

#include "abclim/activation.hpp"
#include "abclim/limit_dynamics.hpp"
#include "abclim/linlim.hpp"
#include "abclim/loss.hpp"
#include "abclim/mlp.hpp"
#include "abclim/stats.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

namespace abclim {

// One N-way K-shot task. Targets are one-hot rows.
struct FewShotTask {
    int n_way = 0;
    int k_shot = 0;
    Eigen::MatrixXd train_x, train_y;  // (n_way k_shot) x d, x n_way
    Eigen::MatrixXd test_x, test_y;    // (n_way n_query) x d, x n_way
};

struct FewShotConfig {
    int d = 16;
    int n_way = 5;
    int k_shot = 1;
    int n_query = 1;
    // Prototypes live in a seed-wide random subspace of this dimension
    // (0 = all of R^d). A shared subspace is what meta-training can learn.
    int latent_dim = 4;
    double proto_scale = 1.0;  // E|prototype|^2 = proto_scale^2
    double noise = 0.5;        // E|noise|^2 = noise^2
};

// Tasks first_index .. first_index+count-1 of the stream for `seed`. The
// subspace depends on the seed only, so disjoint index ranges give
// meta-train and meta-test tasks from one distribution.
std::vector<FewShotTask> gen_fewshot(std::uint64_t seed, const FewShotConfig& cfg, std::size_t count,
                                     std::size_t first_index = 0);

struct MamlConfig {
    double eps = 0.4;  // adaptation step
    double eta = 0.1;  // meta step
    int task_batch = 32;
    double clip = std::numeric_limits<double>::infinity();  // meta gradient only
    int adapt_steps = 1;        // during meta-training
    int test_adapt_steps = 20;  // during meta-test
    Loss loss = Loss::softmax;
};

struct MamlResult {
    double test_accuracy = 0.0;
    double test_loss = 0.0;
    std::size_t test_queries = 0;
    std::vector<double> meta_grad_norm;  // per meta update, before clipping
};

// Fraction of rows whose argmax (lowest index on ties) matches the target's.
double argmax_accuracy(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& targets);

// First-order MAML. Task losses are sums over the task's examples; the
// meta gradient is summed over a task batch, clipped once, then applied.
// No clipping and no weight decay during adaptation. The model is updated
// in place; the result is its meta-test performance.
MamlResult maml_finite(CoeffNet& net, const std::vector<FewShotTask>& train_tasks,
                       const std::vector<FewShotTask>& test_tasks, const MamlConfig& cfg);
MamlResult maml_finite(FiniteMlp& net, const std::vector<FewShotTask>& train_tasks,
                       const std::vector<FewShotTask>& test_tasks, const MamlConfig& cfg);

// Meta-test only: adapt a copy on each task, score its queries.
MamlResult maml_evaluate(const CoeffNet& net, const std::vector<FewShotTask>& tasks, const MamlConfig& cfg);
MamlResult maml_evaluate(const FiniteMlp& net, const std::vector<FewShotTask>& tasks, const MamlConfig& cfg);

using KernelFn = std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>;
using FeatureFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// f_Q(xi) = sum over (zeta, q) in Q of q K(zeta, xi).
class KernelModelQ {
public:
    KernelModelQ(KernelFn kernel, int d_o) : kernel_(std::move(kernel)), d_o_(d_o) {}
    // K(a, b) = features(a) . features(b). The model then also keeps
    // sum q features(zeta)^T, so a prediction costs one feature map instead
    // of a kernel call per entry. pop() subtracts, so that sum can pick up
    // rounding of order 1e-16 relative.
    static KernelModelQ from_features(FeatureFn features, int d_o);

    Eigen::VectorXd predict(const Eigen::VectorXd& xi) const;
    Eigen::MatrixXd predict(const Eigen::MatrixXd& X) const;  // rows are inputs
    Eigen::MatrixXd gram(const Eigen::MatrixXd& X) const;     // K between rows of X

    void push(const Eigen::VectorXd& zeta, const Eigen::VectorXd& q);
    void pop();
    std::size_t size() const { return entries_.size(); }
    const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& entries() const { return entries_; }
    const KernelFn& kernel() const { return kernel_; }
    int output_dim() const { return d_o_; }

private:
    KernelFn kernel_;
    int d_o_;
    std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> entries_;
    FeatureFn features_;       // empty unless built from features
    Eigen::MatrixXd readout_;  // d_o x feature dim
};

struct KernelMamlResult {
    KernelModelQ model;
    MamlResult result;
};

// MAML on a kernel model, one task at a time: push adaptation entries,
// read the query loss derivatives, pop, clip by the kernel norm, push the
// meta step. Tasks still arrive in batches of task_batch, but each task's
// update lands before the next task adapts.
KernelMamlResult maml_kernel(const KernelFn& kernel, int d_o, const std::vector<FewShotTask>& train_tasks,
                             const std::vector<FewShotTask>& test_tasks, const MamlConfig& cfg);
// Same, starting from `model` (e.g. one built from features).
KernelMamlResult maml_kernel(KernelModelQ model, const std::vector<FewShotTask>& train_tasks,
                             const std::vector<FewShotTask>& test_tasks, const MamlConfig& cfg);

MamlResult maml_evaluate(const KernelModelQ& model, const std::vector<FewShotTask>& tasks, const MamlConfig& cfg);

// Random-feature estimate of the NNGP or NTK of a one-hidden-layer net
// with rows w ~ N(0, I_d), readout v ~ N(0, 1): the average over
// `units` sampled hidden units of the per-unit kernel contribution.
class McShallowKernel {
public:
    enum class Kind { nngp, ntk };
    McShallowKernel(Kind kind, Activation act, int d, std::size_t units, std::uint64_t seed);

    Estimate estimate(const Eigen::VectorXd& xi, const Eigen::VectorXd& zeta) const;
    double operator()(const Eigen::VectorXd& xi, const Eigen::VectorXd& zeta) const;
    KernelFn handle() const;
    // Explicit map with features(a) . features(b) = the estimate above;
    // units entries for nngp, units (1 + d) for ntk.
    Eigen::VectorXd features(const Eigen::VectorXd& xi) const;
    FeatureFn feature_handle() const;

private:
    Kind kind_;
    Activation act_;
    Eigen::MatrixXd w_;  // units x d
    Eigen::VectorXd v2_;  // squared readout weights
};

McShallowKernel nngp_ntk_kernel_mc(McShallowKernel::Kind kind, const Activation& act, int d, std::size_t units,
                                   std::uint64_t seed);

}  // namespace abclim
