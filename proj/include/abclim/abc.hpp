#pragma once

#include <boost/rational.hpp>
#include <json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace abclim {

using Rational = boost::rational<long long>;

// "p/q" or "p"; throws std::invalid_argument on malformed input.
Rational parse_rational(std::string_view text);
std::string format_rational(const Rational& q);

// Width exponents of an L-hidden-layer MLP. Layers are 1-based in the
// accessors; a.size() == b.size() == L + 1.
struct AbcParam {
    int L = 1;
    std::vector<Rational> a;
    std::vector<Rational> b;
    Rational c{0};

    const Rational& a_at(int l) const { return a.at(static_cast<std::size_t>(l - 1)); }
    const Rational& b_at(int l) const { return b.at(static_cast<std::size_t>(l - 1)); }
    Rational& a_at(int l) { return a.at(static_cast<std::size_t>(l - 1)); }
    Rational& b_at(int l) { return b.at(static_cast<std::size_t>(l - 1)); }

    // Throws if the sizes do not match L.
    void validate() const;

    bool operator==(const AbcParam&) const = default;
};

enum class Regime { FeatureLearning, KernelRegime, Trivial, Unstable };

std::string to_string(Regime r);

struct Classification {
    Rational r{0};
    std::vector<Rational> r_per_layer;
    bool init_stable = false;
    bool stable = false;
    bool nontrivial = false;
    Regime regime = Regime::Unstable;
    bool nngp_limit = false;
    bool last_layer_updated_maximally = false;
    bool last_layer_initialized_maximally = false;

    bool operator==(const Classification&) const = default;
};

// name is one of SP, NTP, MFP, MUP (case-insensitive; "mup"/"mu" accepted).
AbcParam named_param(std::string_view name, int L);

Rational r_value(const AbcParam& p);
Rational layer_r(const AbcParam& p, int l);
Classification classify(const AbcParam& p);
AbcParam symmetry_shift(const AbcParam& p, const Rational& theta);

// Smallest c for which p (with its own c ignored) is stable.
std::optional<Rational> min_stable_c(const AbcParam& p);

nlohmann::json to_json(const AbcParam& p);
AbcParam param_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Classification& c);

}  // namespace abclim
