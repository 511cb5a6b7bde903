#pragma once

#include "abclim/activation.hpp"
#include "abclim/gauss_history.hpp"
#include "abclim/limit_dynamics.hpp"
#include "abclim/mlp.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace abclim {

// Every reduced scalar of a run, in order. Recording a full run and then
// replaying it on a single particle reproduces that particle's path with
// all expectations held fixed.
struct ScalarTape {
    std::vector<double> values;
    std::size_t cursor = 0;
};

enum class TapeMode { off, record, playback };

// Which standard normal to perturb in playback: family 0 backs W x labels,
// 1 backs W^T dhbar labels, 2 is the initial (U_0, nV_0) pair.
struct EpsShift {
    int family = 0;
    int index = 0;
    double delta = 0.0;
};

// M samples of each Z variable. A field is one value per particle; the empty
// vector is the zero field.
class ParticleEnsemble {
public:
    using Field = std::vector<double>;

    ParticleEnsemble(std::size_t M, std::uint64_t seed, std::uint64_t first_index = 0);

    std::size_t size() const { return M_; }
    std::uint64_t seed() const { return seed_; }

    // named slots
    void set_slot(const std::string& name, Field values);
    const Field& slot(const std::string& name) const;
    bool has_slot(const std::string& name) const { return slots_.count(name) > 0; }
    std::vector<std::string> slot_names() const;

    // standard normals backing a Gaussian history
    const Field& eps(int family, int index) const;
    int eps_count(int family) const;
    Field fresh_normal(int family);

    void set_tape(ScalarTape* tape, TapeMode mode) {
        tape_ = tape;
        mode_ = tape ? mode : TapeMode::off;
    }
    void set_shift(std::optional<EpsShift> shift) { shift_ = shift; }

    // backend interface for LimitDynamics
    Field base(int which);
    Field ones() const { return Field(M_, 1.0); }
    bool is_zero(const Field& x) const { return x.empty(); }
    Field lin(double a, const Field& x, double b, const Field& y) const;
    Field scale(double a, const Field& x) const;
    Field mul(const Field& x, const Field& y) const;
    Field act(const Field& x, const Activation& phi, int order) const;
    double mean(const Field& x);
    Estimate estimate_product(const Field& x, const Field& y) { return reduce(x, &y, true); }
    Estimate output(const Field& x, const Field& y) { return reduce(x, &y, true); }
    // [E x*o_0, ..., E x*o_{k-1}, E x*x]
    std::vector<double> cov_row(const Field& x, const std::vector<const Field*>& others);
    Field gauss_extend(int family, GaussianHistory& hist, std::string label, std::span<const double> cov_row,
                       double variance);

private:
    // Sample mean of x (times y when given), routed through the tape.
    Estimate reduce(const Field& x, const Field* y, bool with_stderr);
    double tape_next();
    double normal(std::uint64_t stream, int family, int index, std::size_t i) const;

    std::size_t M_;
    std::uint64_t seed_;
    std::uint64_t first_index_;
    std::map<std::string, Field> slots_;
    std::vector<Field> eps_[2];
    ScalarTape* tape_ = nullptr;
    TapeMode mode_ = TapeMode::off;
    std::optional<EpsShift> shift_;
};

// Sample mean and stderr of expr over the named slots.
Estimate estimate(const ParticleEnsemble& ens, std::span<const std::string> slots,
                  const std::function<double(std::span<const double>)>& expr);

// Draws per-particle values of a new history label: appends the label to
// hist, takes one fresh eps per particle, returns sum_s chol(new, s) eps_s.
ParticleEnsemble::Field gauss_extend(GaussianHistory& hist, ParticleEnsemble& ens, int family, std::string label,
                                     std::span<const double> cov_row, double variance);

// Owns an ensemble and the dynamics running on it.
class ParticleLimit {
public:
    ParticleLimit(LimitConfig cfg, std::size_t M, std::uint64_t seed, std::uint64_t first_index = 0);

    LimitRow step(double xi, double y);
    LimitRow observe(double xi, double y);

    ParticleEnsemble& ensemble() { return *ens_; }
    const LimitDynamics<ParticleEnsemble>& dynamics() const { return *dyn_; }

private:
    void snapshot();

    std::unique_ptr<ParticleEnsemble> ens_;
    std::unique_ptr<LimitDynamics<ParticleEnsemble>> dyn_;
};

struct LimitTrajectory {
    std::vector<double> probes;
    std::vector<LimitRow> rows;  // rows[t] for t = 0..T
    bool ae_derivatives = false;  // relu: a.e. derivatives in tangents
};

// Scalar-input routine (d = 1, batch size 1): T updates, T + 1 rows.
std::pair<std::vector<double>, std::vector<double>> scalar_routine(const TrainRoutine& routine);

struct ParticleOptions {
    // Stderr by sectioning: the run is repeated on this many disjoint blocks
    // of the same particles and stderr = sd(block estimates) / sqrt(blocks).
    // Plug-in expectations (variances, Zdot coefficients, chi) are sample
    // means too, so the per-product stderr alone understates the error.
    // Below 2 blocks, or fewer than 2 particles per block, the per-product
    // stderr is reported.
    int sections = 64;
};

LimitTrajectory particle_run(const LimitConfig& cfg, const TrainRoutine& routine, int T, std::size_t M,
                             std::uint64_t seed, const ParticleOptions& opt = {});

}  // namespace abclim
