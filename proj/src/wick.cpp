#include "abclim/wick.hpp"

#include <optional>
#include <stdexcept>

namespace abclim {

GaussianPoly PolyBackend::base(int which) {
    if (which != 0 && which != 1) throw std::out_of_range("base variable must be 0 (U) or 1 (nV)");
    if (base_var_[which] < 0) base_var_[which] = basis_.add_independent();
    return GaussianPoly::variable(base_var_[which]);
}

GaussianPoly PolyBackend::lin(double a, const Field& x, double b, const Field& y) const {
    GaussianPoly out = x;
    out.axpby(a, b, y);
    return out;
}

std::vector<double> PolyBackend::cov_row(const Field& x, const std::vector<const Field*>& others) const {
    constexpr double kDirectPairs = 4.0e6;
    std::optional<GaussianPoly::TermMap> hx;
    auto hermite_x = [&]() -> const GaussianPoly::TermMap& {
        if (!hx) hx = hermite_coefficients(x);
        return *hx;
    };
    auto product = [&](const GaussianPoly& o) {
        if (x.is_zero() || o.is_zero()) return 0.0;
        if (static_cast<double>(x.size()) * static_cast<double>(o.size()) <= kDirectPairs)
            return unit_expect_product(x, o, limits_);
        if (x.degree() + o.degree() > limits_.degree_cap) return unit_expect_product(x, o, limits_);  // throws
        if (&o == &x) return hermite_dot(hermite_x(), hermite_x());
        return hermite_dot(hermite_x(), hermite_coefficients(o));
    };
    std::vector<double> row;
    row.reserve(others.size() + 1);
    for (const Field* o : others) row.push_back(product(*o));
    row.push_back(product(x));
    return row;
}

GaussianPoly PolyBackend::gauss_extend(int family, GaussianHistory& hist, std::string label,
                                       std::span<const double> cov_row, double variance) {
    if (family < 0 || family > 1) throw std::out_of_range("history family must be 0 or 1");
    auto& vars = eps_var_[family];
    if (static_cast<int>(vars.size()) != hist.size()) throw std::logic_error("history and basis are out of step");
    const std::vector<double> row = hist.extend(std::move(label), cov_row, variance);
    const int k = hist.size() - 1;
    vars.push_back(hist.has_pivot(k) ? basis_.add_independent() : -1);
    GaussianPoly out;
    for (std::size_t s = 0; s < row.size(); ++s) {
        if (row[s] == 0.0 || vars[s] < 0) continue;
        out += GaussianPoly::variable(vars[s], row[s]);
    }
    return out;
}

LimitTrajectory exact_run(const LimitConfig& cfg, const TrainRoutine& routine, int T, const ExactOptions& opt) {
    if (!cfg.act.polynomial())
        throw std::invalid_argument("exact engine needs a polynomial activation, got " + cfg.act.name());
    if (T < 0) throw std::invalid_argument("T must be >= 0");
    if (T > opt.T_cap)
        throw std::length_error("T = " + std::to_string(T) + " exceeds the exact-engine cap " +
                                std::to_string(opt.T_cap));
    const auto [xs, ys] = scalar_routine(routine);
    LimitConfig c = cfg;
    c.eta = routine.eta;
    c.loss = routine.loss;
    c.history.exact = true;
    PolyBackend backend(opt.limits);
    LimitDynamics<PolyBackend> dyn(backend, c);
    LimitTrajectory out;
    out.probes = c.probes;
    for (int t = 0; t <= T; ++t) {
        const auto k = static_cast<std::size_t>(t) % xs.size();
        out.rows.push_back(t < T ? dyn.step(xs[k], ys[k]) : dyn.observe(xs[k], ys[k]));
    }
    return out;
}

}  // namespace abclim
