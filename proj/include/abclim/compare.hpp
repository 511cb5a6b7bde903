#pragma once

#include "abclim/limit_dynamics.hpp"
#include "abclim/mlp.hpp"
#include "abclim/particle.hpp"

#include <cstdint>
#include <vector>

namespace abclim {

enum class LimitEngine { exact, particle };

// Finite muP nets against the infinite-width limit on a scalar toy routine.
// shallow = 1 hidden layer; decoupled and coupled = 2 hidden layers, the
// finite net using a decoupled transpose for the former.
struct ToyConfig {
    LimitDepth depth = LimitDepth::shallow;
    Activation act;
    int T = 4;
    double eta = 0.01;
    std::vector<int> widths;
    int seeds = 20;
    std::uint64_t seed = 0;
    LimitEngine engine = LimitEngine::exact;
    std::size_t M = std::size_t{1} << 20;  // particles, engine = particle
};

// T random +-1 inputs and +-1 targets, mse loss, batch size 1.
TrainRoutine toy_routine(std::uint64_t seed, int T, double eta);

struct ToyGapRow {
    int width = 0;
    int seed_index = 0;
    double gap = 0.0;  // mean over t < T of |finite loss - limit loss|
};

struct ToyComparison {
    TrainRoutine routine;
    LimitTrajectory limit;
    std::vector<ToyGapRow> rows;   // width-major
    std::vector<double> mean_gap;  // per width
    std::vector<double> gap_stderr;
};

ToyComparison compare_toy(const ToyConfig& cfg);

}  // namespace abclim
