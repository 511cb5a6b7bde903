#pragma once

#include "abclim/activation.hpp"

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

namespace abclim {

inline constexpr int kMaxPolyVars = 32;

// Exponent vector over basis variables.
using Monomial = std::array<std::uint8_t, kMaxPolyVars>;

struct MonomialHash {
    std::size_t operator()(const Monomial& m) const noexcept;
};

int monomial_degree(const Monomial& m);

struct PolyLimits {
    // Monomial exponents are stored in a byte, which bounds every product.
    // Two-layer coupled quadratic runs reach degree ~144 at four updates.
    int degree_cap = 255;
    std::size_t term_cap = std::size_t{1} << 20;
};

class GaussianPoly {
public:
    using TermMap = std::unordered_map<Monomial, double, MonomialHash>;

    GaussianPoly() = default;
    static GaussianPoly constant(double c);
    static GaussianPoly variable(int index, double coef = 1.0);

    bool is_zero() const { return terms_.empty(); }
    std::size_t size() const { return terms_.size(); }
    int degree() const;
    const TermMap& terms() const { return terms_; }

    void add_term(const Monomial& m, double coef);
    double coefficient(const Monomial& m) const;

    GaussianPoly& operator+=(const GaussianPoly& o);
    GaussianPoly& operator-=(const GaussianPoly& o);
    GaussianPoly& operator*=(double s);
    // a*this + b*o, skipping zero scalars
    void axpby(double a, double b, const GaussianPoly& o);

    GaussianPoly derivative(int var) const;
    double evaluate(std::span<const double> values) const;

private:
    TermMap terms_;
};

GaussianPoly operator+(GaussianPoly a, const GaussianPoly& b);
GaussianPoly operator-(GaussianPoly a, const GaussianPoly& b);
GaussianPoly operator*(double s, GaussianPoly a);
GaussianPoly multiply(const GaussianPoly& a, const GaussianPoly& b, const PolyLimits& limits = {});

// E[prod_i Z_i^{k_i}] for Z ~ N(0, cov), by memoized pairing recursion.
double isserlis(std::span<const int> k, const Eigen::MatrixXd& cov, int degree_cap = 32);

// Registry of jointly Gaussian basis variables.
class GaussianBasis {
public:
    int add_independent();  // new N(0,1) independent of everything so far
    int add(std::span<const double> cov_with_existing, double variance);
    int size() const { return static_cast<int>(cov_.rows()); }
    const Eigen::MatrixXd& cov() const { return cov_; }
    bool is_identity() const { return identity_; }

private:
    Eigen::MatrixXd cov_;
    bool identity_ = true;
};

double poly_expect(const GaussianPoly& p, const GaussianBasis& basis, const PolyLimits& limits = {});

// Fast paths for a basis of independent standard normals.
double unit_expect(const GaussianPoly& p, const PolyLimits& limits = {});
double unit_expect_product(const GaussianPoly& p, const GaussianPoly& q, const PolyLimits& limits = {});

// Hermite (probabilists') coefficients: p = sum_a c_a prod_i He_{a_i}(Z_i).
GaussianPoly::TermMap hermite_coefficients(const GaussianPoly& p);
// E[pq] from Hermite coefficients: sum_a p_a q_a a!.
double hermite_dot(const GaussianPoly::TermMap& p, const GaussianPoly::TermMap& q);

// order-th derivative of phi composed with p; identity and quadratic only.
GaussianPoly act_compose(const GaussianPoly& p, const Activation& phi, int order = 0,
                         const PolyLimits& limits = {});

}  // namespace abclim
