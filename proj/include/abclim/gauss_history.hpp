#pragma once

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

namespace abclim {

// Covariance and lower Cholesky factor of a growing list of jointly
// Gaussian vectors. Label k is realized as sum_s chol(k, s) eps_s over
// independent standard normals eps_0..eps_k.
class GaussianHistory {
public:
    struct Options {
        // exact: no jitter; pivots below degenerate_tol * variance become 0
        // and the label gets no fresh eps. Otherwise jitter is added to the
        // diagonal, escalating x10 up to jitter_max before giving up.
        bool exact = false;
        double jitter = 1e-10;
        double jitter_max = 1e-6;
        double degenerate_tol = 1e-12;
    };

    GaussianHistory() = default;
    explicit GaussianHistory(Options opt) : opt_(opt), jitter_(opt.exact ? 0.0 : opt.jitter) {}

    // Appends a label with E[new * old_i] = cov_row[i] and E[new^2] = variance.
    // Returns the new factor row (length size() after the call).
    std::vector<double> extend(std::string label, std::span<const double> cov_row, double variance);

    int size() const { return static_cast<int>(labels_.size()); }
    const std::vector<std::string>& labels() const { return labels_; }
    const Eigen::MatrixXd& cov() const { return cov_; }
    const Eigen::MatrixXd& chol() const { return chol_; }
    double jitter() const { return jitter_; }
    // Whether label k got its own eps (always true unless exact and degenerate).
    bool has_pivot(int k) const { return chol_(k, k) > 0.0; }

private:
    bool factor_row(Eigen::Index k);
    bool refactor();

    Options opt_;
    double jitter_ = 1e-10;
    std::vector<std::string> labels_;
    Eigen::MatrixXd cov_, chol_;
};

}  // namespace abclim
