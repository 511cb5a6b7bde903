#include "abclim/abc.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <stdexcept>

namespace abclim {

namespace {

long long parse_integer(std::string_view s) {
    long long v = 0;
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
        throw std::invalid_argument("bad rational component: '" + std::string(s) + "'");
    return v;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// boost::rational's mixed rational/int comparisons recurse forever under
// C++20 rewritten operators, so compare against these instead.
const Rational kZero{0};
const Rational kOne{1};

Rational last_a_plus_b(const AbcParam& p) { return p.a_at(p.L + 1) + p.b_at(p.L + 1); }
Rational last_2a_plus_c(const AbcParam& p) { return 2 * p.a_at(p.L + 1) + p.c; }

Rational layer_term(const AbcParam& p, int l) { return 2 * p.a_at(l) + (l == 1 ? 1 : 0); }

Rational r_prefix(const AbcParam& p) {
    return std::min(last_a_plus_b(p), last_2a_plus_c(p)) + p.c - 1;
}

bool init_stable(const AbcParam& p) {
    if (p.a_at(1) + p.b_at(1) != kZero) return false;
    for (int l = 2; l <= p.L; ++l)
        if (p.a_at(l) + p.b_at(l) != Rational(1, 2)) return false;
    return last_a_plus_b(p) >= Rational(1, 2);
}

}  // namespace

Rational parse_rational(std::string_view text) {
    text = trim(text);
    auto slash = text.find('/');
    if (slash == std::string_view::npos) return Rational(parse_integer(text));
    long long num = parse_integer(trim(text.substr(0, slash)));
    long long den = parse_integer(trim(text.substr(slash + 1)));
    if (den == 0) throw std::invalid_argument("zero denominator in '" + std::string(text) + "'");
    return Rational(num, den);
}

std::string format_rational(const Rational& q) {
    if (q.denominator() == 1) return std::to_string(q.numerator());
    return std::to_string(q.numerator()) + "/" + std::to_string(q.denominator());
}

void AbcParam::validate() const {
    if (L < 1) throw std::invalid_argument("L must be >= 1");
    auto want = static_cast<std::size_t>(L + 1);
    if (a.size() != want || b.size() != want)
        throw std::invalid_argument("a and b must have exactly L+1 entries");
}

std::string to_string(Regime r) {
    switch (r) {
        case Regime::FeatureLearning: return "FeatureLearning";
        case Regime::KernelRegime: return "KernelRegime";
        case Regime::Trivial: return "Trivial";
        case Regime::Unstable: return "Unstable";
    }
    return "Unstable";
}

AbcParam named_param(std::string_view name, int L) {
    if (L < 1) throw std::domain_error("L must be >= 1");
    std::string key(name);
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
    const Rational half(1, 2);
    AbcParam p;
    p.L = L;
    p.a.assign(L + 1, Rational(0));
    p.b.assign(L + 1, Rational(0));
    if (key == "SP") {
        for (int l = 2; l <= L + 1; ++l) p.b_at(l) = half;
        p.c = 1;
    } else if (key == "NTP") {
        for (int l = 2; l <= L + 1; ++l) p.a_at(l) = half;
        p.c = 0;
    } else if (key == "MFP") {
        if (L != 1) throw std::domain_error("MFP is only defined for L = 1");
        p.a_at(2) = 1;
        p.c = -1;
    } else if (key == "MUP" || key == "MU") {
        p.a_at(1) = -half;
        p.a_at(L + 1) = half;
        for (int l = 1; l <= L + 1; ++l) p.b_at(l) = half;
        p.c = 0;
    } else {
        throw std::invalid_argument("unknown parametrization '" + std::string(name) + "'");
    }
    return p;
}

Rational layer_r(const AbcParam& p, int l) {
    p.validate();
    if (l < 1 || l > p.L) throw std::out_of_range("layer index out of range");
    return r_prefix(p) + layer_term(p, l);
}

Rational r_value(const AbcParam& p) {
    p.validate();
    Rational m = layer_term(p, 1);
    for (int l = 2; l <= p.L; ++l) m = std::min(m, layer_term(p, l));
    return r_prefix(p) + m;
}

Classification classify(const AbcParam& p) {
    p.validate();
    Classification out;
    out.r = r_value(p);
    for (int l = 1; l <= p.L; ++l) out.r_per_layer.push_back(layer_r(p, l));
    const Rational ab = last_a_plus_b(p);
    const Rational ac = last_2a_plus_c(p);
    out.init_stable = init_stable(p);
    out.stable = out.init_stable && out.r >= kZero && ac >= kOne && ab + out.r >= kOne;
    out.last_layer_updated_maximally = ac == kOne;
    out.last_layer_initialized_maximally = ab + out.r == kOne;
    out.nontrivial = out.stable && (ab + out.r == kOne || ac == kOne);
    if (!out.stable)
        out.regime = Regime::Unstable;
    else if (!out.nontrivial)
        out.regime = Regime::Trivial;
    else
        out.regime = out.r == kZero ? Regime::FeatureLearning : Regime::KernelRegime;
    out.nngp_limit = out.stable && ab + out.r > kOne && ac == kOne;
    return out;
}

AbcParam symmetry_shift(const AbcParam& p, const Rational& theta) {
    p.validate();
    AbcParam q = p;
    for (auto& x : q.a) x += theta;
    for (auto& x : q.b) x -= theta;
    q.c -= 2 * theta;
    return q;
}

std::optional<Rational> min_stable_c(const AbcParam& p) {
    p.validate();
    if (!init_stable(p)) return std::nullopt;
    const Rational last_a = p.a_at(p.L + 1);
    const Rational ab = last_a_plus_b(p);
    Rational m = layer_term(p, 1);
    for (int l = 2; l <= p.L; ++l) m = std::min(m, layer_term(p, l));

    // Smallest c with min(ab, 2a + c) + c - 1 + m >= k. The left side is
    // nondecreasing and piecewise linear in c with a kink at c = ab - 2a.
    auto smallest_c_for_r = [&](const Rational& k) {
        const Rational target = k + 1 - m;
        if (target <= 2 * ab - 2 * last_a) return (target - 2 * last_a) / 2;
        return target - ab;
    };
    Rational c = 1 - 2 * last_a;
    c = std::max(c, smallest_c_for_r(Rational(0)));
    c = std::max(c, smallest_c_for_r(1 - ab));
    return c;
}

nlohmann::json to_json(const AbcParam& p) {
    nlohmann::json j;
    j["L"] = p.L;
    auto& a = j["a"] = nlohmann::json::array();
    for (const auto& x : p.a) a.push_back(format_rational(x));
    auto& b = j["b"] = nlohmann::json::array();
    for (const auto& x : p.b) b.push_back(format_rational(x));
    j["c"] = format_rational(p.c);
    return j;
}

namespace {
Rational rational_from_json(const nlohmann::json& v) {
    if (v.is_string()) return parse_rational(v.get<std::string>());
    if (v.is_number_integer()) return Rational(v.get<long long>());
    throw std::invalid_argument("rationals must be \"p/q\" strings or integers");
}
}  // namespace

AbcParam param_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("parametrization must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (key != "L" && key != "a" && key != "b" && key != "c")
            throw std::invalid_argument("unknown key in parametrization: '" + key + "'");
    AbcParam p;
    p.L = j.at("L").get<int>();
    for (const auto& v : j.at("a")) p.a.push_back(rational_from_json(v));
    for (const auto& v : j.at("b")) p.b.push_back(rational_from_json(v));
    p.c = rational_from_json(j.at("c"));
    p.validate();
    return p;
}

nlohmann::json to_json(const Classification& c) {
    nlohmann::json j;
    j["r"] = format_rational(c.r);
    auto& rl = j["r_per_layer"] = nlohmann::json::array();
    for (const auto& x : c.r_per_layer) rl.push_back(format_rational(x));
    j["init_stable"] = c.init_stable;
    j["stable"] = c.stable;
    j["nontrivial"] = c.nontrivial;
    j["regime"] = to_string(c.regime);
    j["nngp_limit"] = c.nngp_limit;
    j["last_layer_updated_maximally"] = c.last_layer_updated_maximally;
    j["last_layer_initialized_maximally"] = c.last_layer_initialized_maximally;
    return j;
}

}  // namespace abclim
