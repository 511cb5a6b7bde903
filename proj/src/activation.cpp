#include "abclim/activation.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace abclim {

double Activation::value(double x) const {
    switch (kind) {
        case ActKind::identity: return x;
        case ActKind::quadratic: return x * x;
        case ActKind::relu: return x > 0.0 ? x : 0.0;
        case ActKind::tanh: return std::tanh(x);
        case ActKind::gelu: {
            const double s = sigma;
            return 0.5 * x * (std::erf(x / s) + 1.0) +
                   s * std::exp(-x * x / (s * s)) / (2.0 * std::sqrt(std::numbers::pi));
        }
    }
    return x;
}

double Activation::deriv(double x) const {
    switch (kind) {
        case ActKind::identity: return 1.0;
        case ActKind::quadratic: return 2.0 * x;
        case ActKind::relu: return x > 0.0 ? 1.0 : 0.0;
        case ActKind::tanh: {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        }
        case ActKind::gelu: return 0.5 * (std::erf(x / sigma) + 1.0);
    }
    return 1.0;
}

double Activation::deriv2(double x) const {
    switch (kind) {
        case ActKind::identity: return 0.0;
        case ActKind::quadratic: return 2.0;
        case ActKind::relu: return 0.0;
        case ActKind::tanh: {
            const double t = std::tanh(x);
            return -2.0 * t * (1.0 - t * t);
        }
        case ActKind::gelu: return std::exp(-x * x / (sigma * sigma)) / (sigma * std::sqrt(std::numbers::pi));
    }
    return 0.0;
}

double Activation::derivative(double x, int order) const {
    switch (order) {
        case 0: return value(x);
        case 1: return deriv(x);
        case 2: return deriv2(x);
    }
    throw std::invalid_argument("activation derivative order must be 0, 1 or 2");
}

Activation Activation::parse(std::string_view text) {
    Activation a;
    if (text == "identity" || text == "linear" || text == "id") {
        a.kind = ActKind::identity;
    } else if (text == "quadratic" || text == "square") {
        a.kind = ActKind::quadratic;
    } else if (text == "relu") {
        a.kind = ActKind::relu;
    } else if (text == "tanh") {
        a.kind = ActKind::tanh;
    } else if (text.substr(0, 4) == "gelu") {
        a.kind = ActKind::gelu;
        if (text.size() > 4) {
            if (text[4] != ':') throw std::invalid_argument("expected gelu:<sigma>");
            a.sigma = std::stod(std::string(text.substr(5)));
            if (!(a.sigma > 0.0)) throw std::invalid_argument("gelu sigma must be positive");
        }
    } else {
        throw std::invalid_argument("unknown activation '" + std::string(text) + "'");
    }
    return a;
}

std::string Activation::name() const {
    switch (kind) {
        case ActKind::identity: return "identity";
        case ActKind::quadratic: return "quadratic";
        case ActKind::relu: return "relu";
        case ActKind::tanh: return "tanh";
        case ActKind::gelu: return "gelu:" + std::to_string(sigma);
    }
    return "identity";
}

}  // namespace abclim
