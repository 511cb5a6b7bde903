#pragma once

#include "abclim/abc.hpp"
#include "abclim/activation.hpp"
#include "abclim/limit_dynamics.hpp"
#include "abclim/mlp.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <json.hpp>
#include <ostream>
#include <vector>

namespace abclim {

// Kernel values on a finite input list.
struct KernelTable {
    std::vector<Eigen::VectorXd> inputs;
    Eigen::MatrixXd values;
    Eigen::MatrixXd stderr;  // empty unless estimated by Monte Carlo
    // a_{L+1}+b_{L+1} > 2a_{L+1}+c: the one-step-lag case, where only the
    // last-layer (NNGP) term survives.
    bool lag_case = false;

    // Throws std::out_of_range if xi is not an input of the table.
    std::size_t index_of(const Eigen::VectorXd& xi) const;
    double operator()(const Eigen::VectorXd& xi, const Eigen::VectorXd& zeta) const {
        return values(static_cast<Eigen::Index>(index_of(xi)), static_cast<Eigen::Index>(index_of(zeta)));
    }
    double min_eigenvalue() const;

    void write_csv(std::ostream& os) const;  // i,j,value[,stderr]
    nlohmann::json to_json() const;
};

// Evaluation scheme for the bivariate Gaussian expectations.
struct GaussQuad {
    int nodes = 64;              // Gauss-Hermite nodes per dimension
    std::size_t mc_samples = 0;  // > 0 switches to Monte Carlo
    std::uint64_t seed = 0;
};

// Sigma^{ml}(xi, zeta) for 0 <= m <= l <= L: the layer-m feature kernel
// (xi . zeta when m = 0) times E phi'(h^k(xi)) phi'(h^k(zeta)) for k = m+1..l,
// with layer covariances propagated from the normalized initialization.
// The stderr is zero for quadrature; for Monte Carlo it combines the
// per-factor errors and ignores error carried through the layer recursion.
Estimate sigma_ml(int m, int l, const Eigen::VectorXd& xi, const Eigen::VectorXd& zeta, const AbcParam& param,
                  const Activation& act, const GaussQuad& quad = {});

// Limit indicators that weight the Sigma^{mL} terms.
struct KernelWeights {
    bool last_layer = false;      // 2a_{L+1} + c = 1
    bool through_layers = false;  // a_{L+1} + b_{L+1} + r = 1
    int ell = 1;                  // first layer whose update scale equals layer L's
    std::vector<bool> vartheta;   // vartheta[m] for m = 1..L (index 0 unused)
    bool lag_case = false;
};
KernelWeights kernel_weights(const AbcParam& param);

// Infinite-width kernel of a kernel-regime parametrization. Throws
// std::domain_error for any other regime.
KernelTable limit_kernel(const AbcParam& param, const Activation& act, const std::vector<Eigen::VectorXd>& inputs,
                         const GaussQuad& quad = {});

// f_{t+1}(xi) = f_t(xi) - eta mean_b K(xi, xi_b) L'(f_t(xi_b), y_b) on every
// table input. Row t holds f_t before update t.
struct KernelTrajectory {
    std::vector<Eigen::MatrixXd> f;  // inputs x d_o
    std::vector<double> loss;        // batch loss at step t
};

// f0: inputs x d_o initial outputs; empty means zero.
KernelTrajectory kgd_run(const KernelTable& K, const TrainRoutine& routine, int T, const Eigen::MatrixXd& f0 = {});

}  // namespace abclim
