#pragma once

#include "abclim/gauss_poly.hpp"
#include "abclim/limit_dynamics.hpp"
#include "abclim/particle.hpp"

#include <span>
#include <string>
#include <vector>

namespace abclim {

// Exact backend: every Z is a polynomial in independent standard normals
// (U_0, nV_0 and one per non-degenerate history label).
class PolyBackend {
public:
    using Field = GaussianPoly;

    explicit PolyBackend(PolyLimits limits = {}) : limits_(limits) {}

    Field base(int which);
    Field ones() const { return GaussianPoly::constant(1.0); }
    bool is_zero(const Field& x) const { return x.is_zero(); }
    Field lin(double a, const Field& x, double b, const Field& y) const;
    Field scale(double a, const Field& x) const { return a * x; }
    Field mul(const Field& x, const Field& y) const { return multiply(x, y, limits_); }
    Field act(const Field& x, const Activation& phi, int order) const { return act_compose(x, phi, order, limits_); }
    double mean(const Field& x) const { return unit_expect(x, limits_); }
    Estimate estimate_product(const Field& x, const Field& y) const { return {unit_expect_product(x, y, limits_), 0.0}; }
    Estimate output(const Field& x, const Field& y) const { return estimate_product(x, y); }
    std::vector<double> cov_row(const Field& x, const std::vector<const Field*>& others) const;
    Field gauss_extend(int family, GaussianHistory& hist, std::string label, std::span<const double> cov_row,
                       double variance);

    const GaussianBasis& basis() const { return basis_; }
    // basis variable behind history label s of a family, -1 if degenerate
    int eps_variable(int family, int s) const { return eps_var_[family].at(static_cast<std::size_t>(s)); }

private:
    PolyLimits limits_;
    GaussianBasis basis_;
    int base_var_[2] = {-1, -1};
    std::vector<int> eps_var_[2];
};

struct ExactOptions {
    PolyLimits limits;
    int T_cap = 4;
};

// Exact f trajectory for identity or quadratic phi; T updates, T + 1 rows.
LimitTrajectory exact_run(const LimitConfig& cfg, const TrainRoutine& routine, int T, const ExactOptions& opt = {});

}  // namespace abclim
