#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace abclim {

// mse: 0.5 |f - y|^2.  logistic: per-coordinate sigmoid cross-entropy with
// targets in [0, 1].  softmax: cross-entropy against a probability vector.
enum class Loss { mse, logistic, softmax };

inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline Loss parse_loss(std::string_view s) {
    if (s == "mse") return Loss::mse;
    if (s == "logistic") return Loss::logistic;
    if (s == "softmax" || s == "xent") return Loss::softmax;
    throw std::invalid_argument("unknown loss '" + std::string(s) + "'");
}

inline std::string loss_name(Loss l) {
    switch (l) {
        case Loss::mse: return "mse";
        case Loss::logistic: return "logistic";
        case Loss::softmax: return "softmax";
    }
    return "mse";
}

inline double loss_value(Loss l, const Eigen::VectorXd& f, const Eigen::VectorXd& y) {
    switch (l) {
        case Loss::mse: return 0.5 * (f - y).squaredNorm();
        case Loss::logistic: {
            double s = 0.0;
            for (Eigen::Index i = 0; i < f.size(); ++i) s += softplus(f[i]) - y[i] * f[i];
            return s;
        }
        case Loss::softmax: {
            const double m = f.maxCoeff();
            const double lse = m + std::log((f.array() - m).exp().sum());
            return -(y.array() * (f.array() - lse)).sum();
        }
    }
    return 0.0;
}

// dL/df.
inline Eigen::VectorXd loss_deriv(Loss l, const Eigen::VectorXd& f, const Eigen::VectorXd& y) {
    switch (l) {
        case Loss::mse: return f - y;
        case Loss::logistic: {
            Eigen::VectorXd g(f.size());
            for (Eigen::Index i = 0; i < f.size(); ++i) g[i] = sigmoid(f[i]) - y[i];
            return g;
        }
        case Loss::softmax: {
            Eigen::VectorXd p = (f.array() - f.maxCoeff()).exp();
            p /= p.sum();
            return p * y.sum() - y;
        }
    }
    return f - y;
}

inline double loss_value(Loss l, double f, double y) {
    return loss_value(l, Eigen::VectorXd::Constant(1, f), Eigen::VectorXd::Constant(1, y));
}
inline double loss_deriv(Loss l, double f, double y) {
    return loss_deriv(l, Eigen::VectorXd::Constant(1, f), Eigen::VectorXd::Constant(1, y))[0];
}

}  // namespace abclim
