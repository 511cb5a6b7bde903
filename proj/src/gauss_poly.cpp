#include "abclim/gauss_poly.hpp"

#include "abclim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <stdexcept>
#include <string>

namespace abclim {

namespace {

constexpr int kTable = 256;

struct Tables {
    std::array<double, kTable> fact{};
    std::array<double, kTable> dfact_minus1{};  // (k-1)!! for even k, 0 for odd
    Tables() {
        fact[0] = 1.0;
        for (int i = 1; i < kTable; ++i) fact[i] = fact[i - 1] * i;
        dfact_minus1[0] = 1.0;
        dfact_minus1[1] = 0.0;
        for (int k = 2; k < kTable; ++k) dfact_minus1[k] = (k % 2) ? 0.0 : dfact_minus1[k - 2] * (k - 1);
    }
};

const Tables& tables() {
    static const Tables t;
    return t;
}

// x^n = sum_j n!/(j! (n-2j)! 2^j) He_{n-2j}(x)
double hermite_from_power(int n, int j) {
    return std::exp(std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - 2.0 * j + 1.0) -
                    j * std::log(2.0));
}

void check_degree(int deg, const PolyLimits& limits) {
    if (deg > limits.degree_cap)
        throw std::length_error("Gaussian moment degree " + std::to_string(deg) + " exceeds cap " +
                                std::to_string(limits.degree_cap));
}

double unit_moment(const Monomial& m) {
    const auto& tb = tables();
    double v = 1.0;
    for (auto e : m) {
        if (e == 0) continue;
        if (e & 1) return 0.0;
        v *= tb.dfact_minus1[e];
    }
    return v;
}

class IsserlisMemo {
public:
    IsserlisMemo(const Eigen::MatrixXd& cov, int cap) : cov_(cov), cap_(cap) {}

    double operator()(std::vector<int> k) {
        int total = 0;
        for (int v : k) {
            if (v < 0) throw std::invalid_argument("negative exponent");
            total += v;
        }
        if (total > cap_)
            throw std::length_error("Gaussian moment degree " + std::to_string(total) + " exceeds cap " +
                                    std::to_string(cap_));
        if (total % 2) return 0.0;
        return rec(k);
    }

private:
    double rec(std::vector<int>& k) {
        auto first = std::find_if(k.begin(), k.end(), [](int v) { return v > 0; });
        if (first == k.end()) return 1.0;
        if (auto it = memo_.find(k); it != memo_.end()) return it->second;
        const auto i = static_cast<std::size_t>(first - k.begin());
        double total = 0.0;
        k[i] -= 1;
        for (std::size_t j = 0; j < k.size(); ++j) {
            if (k[j] == 0) continue;
            const double c = cov_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (c == 0.0) continue;
            const int mult = k[j];
            k[j] -= 1;
            total += c * mult * rec(k);
            k[j] += 1;
        }
        k[i] += 1;
        memo_.emplace(k, total);
        return total;
    }

    const Eigen::MatrixXd& cov_;
    int cap_;
    std::map<std::vector<int>, double> memo_;
};

}  // namespace

std::size_t MonomialHash::operator()(const Monomial& m) const noexcept {
    std::uint64_t w[kMaxPolyVars / 8];
    std::memcpy(w, m.data(), sizeof(w));
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (auto x : w) h = hash_combine(h, x);
    return static_cast<std::size_t>(h);
}

int monomial_degree(const Monomial& m) {
    int d = 0;
    for (auto e : m) d += e;
    return d;
}

GaussianPoly GaussianPoly::constant(double c) {
    GaussianPoly p;
    p.add_term(Monomial{}, c);
    return p;
}

GaussianPoly GaussianPoly::variable(int index, double coef) {
    if (index < 0 || index >= kMaxPolyVars) throw std::out_of_range("basis variable index out of range");
    Monomial m{};
    m[static_cast<std::size_t>(index)] = 1;
    GaussianPoly p;
    p.add_term(m, coef);
    return p;
}

int GaussianPoly::degree() const {
    int d = 0;
    for (const auto& [m, c] : terms_) d = std::max(d, monomial_degree(m));
    return d;
}

void GaussianPoly::add_term(const Monomial& m, double coef) {
    if (coef == 0.0) return;
    auto [it, inserted] = terms_.try_emplace(m, coef);
    if (!inserted) {
        it->second += coef;
        if (it->second == 0.0) terms_.erase(it);
    }
}

double GaussianPoly::coefficient(const Monomial& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? 0.0 : it->second;
}

GaussianPoly& GaussianPoly::operator+=(const GaussianPoly& o) {
    for (const auto& [m, c] : o.terms_) add_term(m, c);
    return *this;
}

GaussianPoly& GaussianPoly::operator-=(const GaussianPoly& o) {
    for (const auto& [m, c] : o.terms_) add_term(m, -c);
    return *this;
}

GaussianPoly& GaussianPoly::operator*=(double s) {
    if (s == 0.0) {
        terms_.clear();
        return *this;
    }
    for (auto& [m, c] : terms_) c *= s;
    return *this;
}

void GaussianPoly::axpby(double a, double b, const GaussianPoly& o) {
    if (a != 1.0) *this *= a;
    if (b == 0.0) return;
    for (const auto& [m, c] : o.terms_) add_term(m, b * c);
}

GaussianPoly GaussianPoly::derivative(int var) const {
    if (var < 0 || var >= kMaxPolyVars) throw std::out_of_range("basis variable index out of range");
    const auto v = static_cast<std::size_t>(var);
    GaussianPoly out;
    for (const auto& [m, c] : terms_) {
        if (m[v] == 0) continue;
        Monomial d = m;
        d[v] -= 1;
        out.add_term(d, c * m[v]);
    }
    return out;
}

double GaussianPoly::evaluate(std::span<const double> values) const {
    double s = 0.0;
    for (const auto& [m, c] : terms_) {
        double t = c;
        for (std::size_t i = 0; i < m.size(); ++i)
            if (m[i]) t *= std::pow(values[i], m[i]);
        s += t;
    }
    return s;
}

GaussianPoly operator+(GaussianPoly a, const GaussianPoly& b) { return a += b; }
GaussianPoly operator-(GaussianPoly a, const GaussianPoly& b) { return a -= b; }
GaussianPoly operator*(double s, GaussianPoly a) { return a *= s; }

GaussianPoly multiply(const GaussianPoly& a, const GaussianPoly& b, const PolyLimits& limits) {
    GaussianPoly out;
    if (a.is_zero() || b.is_zero()) return out;
    for (const auto& [ma, ca] : a.terms()) {
        for (const auto& [mb, cb] : b.terms()) {
            Monomial m;
            for (std::size_t i = 0; i < m.size(); ++i) {
                const int e = ma[i] + mb[i];
                if (e > 255) throw std::length_error("monomial exponent overflow");
                m[i] = static_cast<std::uint8_t>(e);
            }
            out.add_term(m, ca * cb);
        }
        if (out.size() > limits.term_cap)
            throw std::length_error("polynomial term count exceeds cap " + std::to_string(limits.term_cap));
    }
    return out;
}

double isserlis(std::span<const int> k, const Eigen::MatrixXd& cov, int degree_cap) {
    if (cov.rows() != cov.cols() || static_cast<std::size_t>(cov.rows()) != k.size())
        throw std::invalid_argument("multi-index and covariance sizes differ");
    IsserlisMemo memo(cov, degree_cap);
    return memo(std::vector<int>(k.begin(), k.end()));
}

int GaussianBasis::add_independent() {
    const auto n = cov_.rows();
    if (n >= kMaxPolyVars) throw std::length_error("too many Gaussian basis variables");
    cov_.conservativeResize(n + 1, n + 1);
    cov_.row(n).setZero();
    cov_.col(n).setZero();
    cov_(n, n) = 1.0;
    return static_cast<int>(n);
}

int GaussianBasis::add(std::span<const double> cov_with_existing, double variance) {
    const auto n = cov_.rows();
    if (static_cast<Eigen::Index>(cov_with_existing.size()) != n)
        throw std::invalid_argument("covariance row has the wrong length");
    if (n >= kMaxPolyVars) throw std::length_error("too many Gaussian basis variables");
    cov_.conservativeResize(n + 1, n + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        cov_(n, i) = cov_(i, n) = cov_with_existing[static_cast<std::size_t>(i)];
        if (cov_(n, i) != 0.0) identity_ = false;
    }
    cov_(n, n) = variance;
    if (variance != 1.0) identity_ = false;
    return static_cast<int>(n);
}

double unit_expect(const GaussianPoly& p, const PolyLimits& limits) {
    check_degree(p.degree(), limits);
    double s = 0.0;
    for (const auto& [m, c] : p.terms()) s += c * unit_moment(m);
    return s;
}

double poly_expect(const GaussianPoly& p, const GaussianBasis& basis, const PolyLimits& limits) {
    if (basis.is_identity()) return unit_expect(p, limits);
    IsserlisMemo memo(basis.cov(), limits.degree_cap);
    const auto n = static_cast<std::size_t>(basis.size());
    double s = 0.0;
    for (const auto& [m, c] : p.terms()) {
        std::vector<int> k(n, 0);
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (m[i] == 0) continue;
            if (i >= n) throw std::out_of_range("polynomial uses an unregistered basis variable");
            k[i] = m[i];
        }
        s += c * memo(std::move(k));
    }
    return s;
}

GaussianPoly::TermMap hermite_coefficients(const GaussianPoly& p) {
    GaussianPoly::TermMap out;
    std::vector<std::pair<std::size_t, int>> nz;
    for (const auto& [m, c] : p.terms()) {
        nz.clear();
        for (std::size_t i = 0; i < m.size(); ++i)
            if (m[i]) nz.emplace_back(i, m[i]);
        // enumerate reductions j_i in [0, k_i/2] for each present variable
        std::vector<int> j(nz.size(), 0);
        while (true) {
            Monomial h = m;
            double coef = c;
            for (std::size_t q = 0; q < nz.size(); ++q) {
                h[nz[q].first] = static_cast<std::uint8_t>(nz[q].second - 2 * j[q]);
                if (j[q]) coef *= hermite_from_power(nz[q].second, j[q]);
            }
            out[h] += coef;
            std::size_t q = 0;
            for (; q < nz.size(); ++q) {
                if (2 * (j[q] + 1) <= nz[q].second) {
                    ++j[q];
                    break;
                }
                j[q] = 0;
            }
            if (q == nz.size()) break;
        }
    }
    return out;
}

double hermite_dot(const GaussianPoly::TermMap& p, const GaussianPoly::TermMap& q) {
    const auto& small = p.size() <= q.size() ? p : q;
    const auto& large = p.size() <= q.size() ? q : p;
    const auto& tb = tables();
    double s = 0.0;
    for (const auto& [m, c] : small) {
        auto it = large.find(m);
        if (it == large.end()) continue;
        double f = 1.0;
        for (auto e : m)
            if (e > 1) f *= tb.fact[e];
        s += c * it->second * f;
    }
    return s;
}

double unit_expect_product(const GaussianPoly& p, const GaussianPoly& q, const PolyLimits& limits) {
    if (p.is_zero() || q.is_zero()) return 0.0;
    check_degree(p.degree() + q.degree(), limits);
    const double pairs = static_cast<double>(p.size()) * static_cast<double>(q.size());
    if (pairs <= 4.0e6) {
        double s = 0.0;
        for (const auto& [ma, ca] : p.terms()) {
            for (const auto& [mb, cb] : q.terms()) {
                Monomial m;
                for (std::size_t i = 0; i < m.size(); ++i) m[i] = static_cast<std::uint8_t>(ma[i] + mb[i]);
                const double v = unit_moment(m);
                if (v != 0.0) s += ca * cb * v;
            }
        }
        return s;
    }
    if (&p == &q) {
        const auto h = hermite_coefficients(p);
        return hermite_dot(h, h);
    }
    return hermite_dot(hermite_coefficients(p), hermite_coefficients(q));
}

GaussianPoly act_compose(const GaussianPoly& p, const Activation& phi, int order, const PolyLimits& limits) {
    if (order < 0) throw std::invalid_argument("negative derivative order");
    switch (phi.kind) {
        case ActKind::identity:
            if (order == 0) return p;
            if (order == 1) return GaussianPoly::constant(1.0);
            return {};
        case ActKind::quadratic:
            if (order == 0) return multiply(p, p, limits);
            if (order == 1) return 2.0 * p;
            if (order == 2) return GaussianPoly::constant(2.0);
            return {};
        default:
            throw std::invalid_argument("exact composition needs a polynomial activation, got " + phi.name());
    }
}

}  // namespace abclim
