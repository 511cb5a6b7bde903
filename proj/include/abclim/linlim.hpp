#pragma once

#include "abclim/loss.hpp"
#include "abclim/mlp.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <vector>

namespace abclim {

struct LinHyper {
    double sigma_u = 1.0;
    double sigma_v = 1.0;
    double alpha = 0.0;  // bias multiplier; 0 freezes the bias
    double eta = 1.0;
    double clip = std::numeric_limits<double>::infinity();
    double gamma = 0.0;  // weight decay
};

// Shallow linear net f = (Xi uu^T + bb) vv^T with hidden size k.
// k = d + d_o with the diagonal init is the infinite-width limit in
// coefficient space; k = n with Gaussian init is the finite net.
class CoeffNet {
public:
    static CoeffNet diagonal(int d, int d_o, const LinHyper& hyper);
    static CoeffNet finite(int n, int d, int d_o, const LinHyper& hyper, std::uint64_t seed);

    // Rows of Xi are inputs; returns B x d_o logits.
    Eigen::MatrixXd forward(const Eigen::MatrixXd& Xi) const;
    Eigen::VectorXd forward(const Eigen::VectorXd& xi) const;

    struct StepInfo {
        double grad_norm = 0.0;  // G before clipping
        double rho = 1.0;
    };
    StepInfo sgd_step(const Eigen::MatrixXd& Xi, const Eigen::MatrixXd& Y, Loss loss);
    // Step with an explicit loss derivative chi (B x d_o), no clipping if clip = inf.
    StepInfo step_with_chi(const Eigen::MatrixXd& Xi, const Eigen::MatrixXd& chi, bool allow_clip = true);

    // Raw descent directions for a batch (before clipping).
    struct Direction {
        Eigen::MatrixXd du, dv;
        Eigen::VectorXd db;
    };
    Direction direction(const Eigen::MatrixXd& Xi, const Eigen::MatrixXd& chi) const;
    double clip_norm(const Direction& dir) const;
    void apply(const Direction& dir, double scale);

    int input_dim() const { return d_; }
    int output_dim() const { return d_o_; }
    int hidden() const { return static_cast<int>(uu_.rows()); }
    const LinHyper& hyper() const { return hyper_; }
    LinHyper& hyper() { return hyper_; }

    const Eigen::MatrixXd& uu() const { return uu_; }  // k x d
    const Eigen::MatrixXd& vv() const { return vv_; }  // d_o x k
    const Eigen::VectorXd& bb() const { return bb_; }  // k
    Eigen::MatrixXd& uu() { return uu_; }
    Eigen::MatrixXd& vv() { return vv_; }
    Eigen::VectorXd& bb() { return bb_; }

private:
    int d_ = 0, d_o_ = 0;
    LinHyper hyper_;
    Eigen::MatrixXd uu_, vv_;
    Eigen::VectorXd bb_;
};

// Closed-form (A, B, C, D) evolution of the infinite-width shallow linear
// net, batch size 1. Row t holds f_t on every probe (all output coords).
struct LinLimitTrajectory {
    std::vector<Eigen::MatrixXd> f;  // f[t]: probes x d_o
    std::vector<double> loss;        // loss of the training example at step t
};

LinLimitTrajectory lin1lp_run(const TrainRoutine& routine, int T, const std::vector<Eigen::VectorXd>& probes);

// Same routine through CoeffNet (batch size 1, hyper sigma = 1, no clip/decay/bias).
LinLimitTrajectory coeff_run(CoeffNet net, const TrainRoutine& routine, int T,
                             const std::vector<Eigen::VectorXd>& probes);

}  // namespace abclim
