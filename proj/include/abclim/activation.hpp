#pragma once

#include <string>
#include <string_view>

namespace abclim {

enum class ActKind { identity, quadratic, relu, tanh, gelu };

struct Activation {
    ActKind kind = ActKind::identity;
    double sigma = 0.1;  // gelu smoothing width

    double value(double x) const;
    double deriv(double x) const;
    double deriv2(double x) const;  // 0 a.e. for relu
    // order 0, 1 or 2
    double derivative(double x, int order) const;
    bool smooth() const { return kind != ActKind::relu; }
    bool polynomial() const { return kind == ActKind::identity || kind == ActKind::quadratic; }

    // "identity", "linear", "quadratic", "relu", "tanh", "gelu" or "gelu:<sigma>".
    static Activation parse(std::string_view text);
    std::string name() const;
};

}  // namespace abclim
