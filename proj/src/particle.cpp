#include "abclim/particle.hpp"

#include "abclim/parallel.hpp"
#include "abclim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace abclim {

namespace {

constexpr std::size_t kMapChunk = 1 << 15;

template <class Fn>
ParticleEnsemble::Field build(std::size_t M, Fn&& fn) {
    ParticleEnsemble::Field out(M);
    parallel_chunks(M, kMapChunk, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) out[i] = fn(i);
    });
    return out;
}

void check_size(const ParticleEnsemble::Field& x, std::size_t M) {
    if (!x.empty() && x.size() != M) throw std::invalid_argument("particle field has the wrong size");
}

}  // namespace

LimitDepth parse_depth(const std::string& s) {
    if (s == "1" || s == "shallow" || s == "depth1") return LimitDepth::shallow;
    if (s == "2-decoupled" || s == "decoupled") return LimitDepth::decoupled;
    if (s == "2" || s == "2-coupled" || s == "coupled") return LimitDepth::coupled;
    throw std::invalid_argument("unknown depth '" + s + "' (1, 2-decoupled, 2-coupled)");
}

std::string depth_name(LimitDepth d) {
    switch (d) {
        case LimitDepth::shallow: return "1";
        case LimitDepth::decoupled: return "2-decoupled";
        case LimitDepth::coupled: return "2-coupled";
    }
    return "1";
}

ParticleEnsemble::ParticleEnsemble(std::size_t M, std::uint64_t seed, std::uint64_t first_index)
    : M_(M), seed_(seed), first_index_(first_index) {
    if (M == 0) throw std::invalid_argument("particle count must be >= 1");
    slots_["U_0"] = base(0);
    slots_["nV_0"] = base(1);
}

double ParticleEnsemble::normal(std::uint64_t stream, int family, int index, std::size_t i) const {
    double z = counter_normal(seed_, stream, first_index_ + i);
    if (shift_ && shift_->family == family && shift_->index == index) z += shift_->delta;
    return z;
}

ParticleEnsemble::Field ParticleEnsemble::base(int which) {
    if (which != 0 && which != 1) throw std::out_of_range("base slot must be 0 (U) or 1 (nV)");
    const auto stream = static_cast<std::uint64_t>(0x100 + which);
    return build(M_, [&](std::size_t i) { return normal(stream, 2, which, i); });
}

void ParticleEnsemble::set_slot(const std::string& name, Field values) {
    check_size(values, M_);
    if (values.empty()) values.assign(M_, 0.0);
    slots_[name] = std::move(values);
}

const ParticleEnsemble::Field& ParticleEnsemble::slot(const std::string& name) const {
    auto it = slots_.find(name);
    if (it == slots_.end()) throw std::out_of_range("unknown slot '" + name + "'");
    return it->second;
}

std::vector<std::string> ParticleEnsemble::slot_names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : slots_) out.push_back(k);
    return out;
}

const ParticleEnsemble::Field& ParticleEnsemble::eps(int family, int index) const {
    if (family < 0 || family > 1) throw std::out_of_range("eps family must be 0 or 1");
    return eps_[family].at(static_cast<std::size_t>(index));
}

int ParticleEnsemble::eps_count(int family) const {
    if (family < 0 || family > 1) throw std::out_of_range("eps family must be 0 or 1");
    return static_cast<int>(eps_[family].size());
}

ParticleEnsemble::Field ParticleEnsemble::fresh_normal(int family) {
    if (family < 0 || family > 1) throw std::out_of_range("eps family must be 0 or 1");
    const int index = eps_count(family);
    const std::uint64_t stream = (static_cast<std::uint64_t>(family + 1) << 32) | static_cast<std::uint64_t>(index);
    eps_[family].push_back(build(M_, [&](std::size_t i) { return normal(stream, family, index, i); }));
    return eps_[family].back();
}

ParticleEnsemble::Field ParticleEnsemble::lin(double a, const Field& x, double b, const Field& y) const {
    check_size(x, M_);
    check_size(y, M_);
    if (x.empty() && y.empty()) return {};
    if (x.empty()) return scale(b, y);
    if (y.empty()) return scale(a, x);
    return build(M_, [&](std::size_t i) { return a * x[i] + b * y[i]; });
}

ParticleEnsemble::Field ParticleEnsemble::scale(double a, const Field& x) const {
    check_size(x, M_);
    if (x.empty()) return {};
    return build(M_, [&](std::size_t i) { return a * x[i]; });
}

ParticleEnsemble::Field ParticleEnsemble::mul(const Field& x, const Field& y) const {
    check_size(x, M_);
    check_size(y, M_);
    if (x.empty() || y.empty()) return {};
    return build(M_, [&](std::size_t i) { return x[i] * y[i]; });
}

ParticleEnsemble::Field ParticleEnsemble::act(const Field& x, const Activation& phi, int order) const {
    check_size(x, M_);
    if (x.empty()) {
        const double c = phi.derivative(0.0, order);
        return c == 0.0 ? Field{} : Field(M_, c);
    }
    return build(M_, [&](std::size_t i) { return phi.derivative(x[i], order); });
}

double ParticleEnsemble::tape_next() {
    if (tape_->cursor >= tape_->values.size()) throw std::runtime_error("scalar tape exhausted");
    return tape_->values[tape_->cursor++];
}

Estimate ParticleEnsemble::reduce(const Field& x, const Field* y, bool with_stderr) {
    check_size(x, M_);
    if (y) check_size(*y, M_);
    Estimate e;
    if (mode_ == TapeMode::playback) {
        e.mean = tape_next();
        if (with_stderr) e.stderr = tape_next();
        return e;
    }
    if (!x.empty() && !(y && y->empty())) {
        auto term = [&](std::size_t i) { return y ? x[i] * (*y)[i] : x[i]; };
        const double n = static_cast<double>(M_);
        e.mean = deterministic_sum(M_, term) / n;
        if (with_stderr && M_ > 1) {
            const double ss = deterministic_sum(M_, [&](std::size_t i) {
                const double d = term(i) - e.mean;
                return d * d;
            });
            e.stderr = std::sqrt(ss / (n - 1.0) / n);
        }
    }
    if (mode_ == TapeMode::record) {
        tape_->values.push_back(e.mean);
        if (with_stderr) tape_->values.push_back(e.stderr);
    }
    return e;
}

double ParticleEnsemble::mean(const Field& x) { return reduce(x, nullptr, false).mean; }

std::vector<double> ParticleEnsemble::cov_row(const Field& x, const std::vector<const Field*>& others) {
    std::vector<double> row;
    row.reserve(others.size() + 1);
    for (const Field* o : others) row.push_back(estimate_product(x, *o).mean);
    row.push_back(estimate_product(x, x).mean);
    return row;
}

ParticleEnsemble::Field ParticleEnsemble::gauss_extend(int family, GaussianHistory& hist, std::string label,
                                                       std::span<const double> cov_row, double variance) {
    if (eps_count(family) != hist.size()) throw std::logic_error("history and eps store are out of step");
    const std::vector<double> row = hist.extend(std::move(label), cov_row, variance);
    fresh_normal(family);
    Field out(M_, 0.0);
    parallel_chunks(M_, kMapChunk, [&](std::size_t b, std::size_t e) {
        for (std::size_t s = 0; s < row.size(); ++s) {
            if (row[s] == 0.0) continue;
            const Field& z = eps_[family][s];
            for (std::size_t i = b; i < e; ++i) out[i] += row[s] * z[i];
        }
    });
    return out;
}

Estimate estimate(const ParticleEnsemble& ens, std::span<const std::string> slots,
                  const std::function<double(std::span<const double>)>& expr) {
    std::vector<const ParticleEnsemble::Field*> cols;
    for (const auto& name : slots) cols.push_back(&ens.slot(name));
    const std::size_t M = ens.size();
    std::vector<double> vals(M);
    std::vector<double> args(cols.size());
    for (std::size_t i = 0; i < M; ++i) {
        for (std::size_t c = 0; c < cols.size(); ++c) args[c] = (*cols[c])[i];
        vals[i] = expr(args);
    }
    const double n = static_cast<double>(M);
    Estimate e;
    e.mean = deterministic_sum(M, [&](std::size_t i) { return vals[i]; }) / n;
    if (M > 1) {
        const double ss = deterministic_sum(M, [&](std::size_t i) {
            const double d = vals[i] - e.mean;
            return d * d;
        });
        e.stderr = std::sqrt(ss / (n - 1.0) / n);
    }
    return e;
}

ParticleEnsemble::Field gauss_extend(GaussianHistory& hist, ParticleEnsemble& ens, int family, std::string label,
                                     std::span<const double> cov_row, double variance) {
    return ens.gauss_extend(family, hist, std::move(label), cov_row, variance);
}

ParticleLimit::ParticleLimit(LimitConfig cfg, std::size_t M, std::uint64_t seed, std::uint64_t first_index)
    : ens_(std::make_unique<ParticleEnsemble>(M, seed, first_index)),
      dyn_(std::make_unique<LimitDynamics<ParticleEnsemble>>(*ens_, std::move(cfg))) {}

void ParticleLimit::snapshot() {
    const auto t = std::to_string(dyn_->t());
    ens_->set_slot("U_" + t, dyn_->U().val);
    ens_->set_slot("nV_" + t, dyn_->nV().val);
}

LimitRow ParticleLimit::step(double xi, double y) {
    LimitRow row = dyn_->step(xi, y);
    snapshot();
    return row;
}

LimitRow ParticleLimit::observe(double xi, double y) { return dyn_->observe(xi, y); }

std::pair<std::vector<double>, std::vector<double>> scalar_routine(const TrainRoutine& routine) {
    if (routine.size() == 0) throw std::invalid_argument("empty routine");
    if (routine.batch_size != 1) throw std::invalid_argument("limit engines use batch size 1");
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < routine.size(); ++i) {
        if (routine.inputs[i].size() != 1 || routine.targets[i].size() != 1)
            throw std::invalid_argument("limit engines take scalar inputs and outputs");
        xs.push_back(routine.inputs[i][0]);
        ys.push_back(routine.targets[i][0]);
    }
    return {xs, ys};
}

namespace {

std::vector<LimitRow> run_rows(ParticleEnsemble& ens, const LimitConfig& cfg, const std::vector<double>& xs,
                               const std::vector<double>& ys, int T) {
    LimitDynamics<ParticleEnsemble> dyn(ens, cfg);
    std::vector<LimitRow> rows;
    for (int t = 0; t <= T; ++t) {
        const auto k = static_cast<std::size_t>(t) % xs.size();
        rows.push_back(t < T ? dyn.step(xs[k], ys[k]) : dyn.observe(xs[k], ys[k]));
    }
    return rows;
}

}  // namespace

LimitTrajectory particle_run(const LimitConfig& cfg, const TrainRoutine& routine, int T, std::size_t M,
                             std::uint64_t seed, const ParticleOptions& opt) {
    if (T < 0) throw std::invalid_argument("T must be >= 0");
    const auto [xs, ys] = scalar_routine(routine);
    LimitConfig c = cfg;
    c.eta = routine.eta;
    c.loss = routine.loss;
    LimitTrajectory out;
    out.probes = c.probes;
    out.ae_derivatives = !c.act.smooth();

    {
        ParticleEnsemble ens(M, seed);
        out.rows = run_rows(ens, c, xs, ys, T);
    }
    const auto R = static_cast<std::size_t>(std::max(opt.sections, 0));
    if (R < 2 || M / R < 2) return out;

    // block estimates of every output
    const std::size_t block = M / R;
    std::vector<std::vector<double>> f(out.rows.size()), probe(out.rows.size() * c.probes.size());
    for (std::size_t s = 0; s < R; ++s) {
        ParticleEnsemble ens(block, seed, s * block);
        const auto rows = run_rows(ens, c, xs, ys, T);
        for (std::size_t t = 0; t < rows.size(); ++t) {
            f[t].push_back(rows[t].f);
            for (std::size_t p = 0; p < c.probes.size(); ++p)
                probe[t * c.probes.size() + p].push_back(rows[t].probe_f[p]);
        }
    }
    auto sectioned = [&](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - m) * (x - m);
        return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
    };
    for (std::size_t t = 0; t < out.rows.size(); ++t) {
        out.rows[t].f_stderr = sectioned(f[t]);
        for (std::size_t p = 0; p < c.probes.size(); ++p)
            out.rows[t].probe_stderr[p] = sectioned(probe[t * c.probes.size() + p]);
    }
    return out;
}

}  // namespace abclim
