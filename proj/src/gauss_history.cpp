#include "abclim/gauss_history.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace abclim {

bool GaussianHistory::factor_row(Eigen::Index k) {
    for (Eigen::Index s = 0; s < k; ++s) {
        const double piv = chol_(s, s);
        if (piv <= 0.0) {
            chol_(k, s) = 0.0;
            continue;
        }
        double v = cov_(k, s);
        for (Eigen::Index j = 0; j < s; ++j) v -= chol_(k, j) * chol_(s, j);
        chol_(k, s) = v / piv;
    }
    double d2 = cov_(k, k) + jitter_;
    for (Eigen::Index j = 0; j < k; ++j) d2 -= chol_(k, j) * chol_(k, j);
    if (opt_.exact) {
        chol_(k, k) = (d2 > opt_.degenerate_tol * std::abs(cov_(k, k)) && d2 > 0.0) ? std::sqrt(d2) : 0.0;
        return true;
    }
    if (!(d2 > 0.0)) return false;
    chol_(k, k) = std::sqrt(d2);
    return true;
}

bool GaussianHistory::refactor() {
    chol_.setZero();
    for (Eigen::Index k = 0; k < cov_.rows(); ++k)
        if (!factor_row(k)) return false;
    return true;
}

std::vector<double> GaussianHistory::extend(std::string label, std::span<const double> cov_row, double variance) {
    const auto n = cov_.rows();
    if (static_cast<Eigen::Index>(cov_row.size()) != n)
        throw std::invalid_argument("covariance row length must equal the number of existing labels");
    if (!std::isfinite(variance)) throw std::domain_error("non-finite variance for '" + label + "'");
    cov_.conservativeResize(n + 1, n + 1);
    chol_.conservativeResize(n + 1, n + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        cov_(n, i) = cov_(i, n) = cov_row[static_cast<std::size_t>(i)];
        chol_(i, n) = 0.0;
    }
    cov_(n, n) = variance;
    labels_.push_back(std::move(label));
    if (!factor_row(n)) {
        bool ok = false;
        while (!ok && jitter_ * 10.0 <= opt_.jitter_max * (1.0 + 1e-9)) {
            jitter_ *= 10.0;
            ok = refactor();
        }
        if (!ok) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov_, Eigen::EigenvaluesOnly);
            std::ostringstream msg;
            msg << "Gaussian history covariance is not PSD after jitter " << jitter_
                << "; minimum eigenvalue " << es.eigenvalues().minCoeff();
            throw std::domain_error(msg.str());
        }
    }
    std::vector<double> row(static_cast<std::size_t>(n + 1));
    for (Eigen::Index s = 0; s <= n; ++s) row[static_cast<std::size_t>(s)] = chol_(n, s);
    return row;
}

}  // namespace abclim
