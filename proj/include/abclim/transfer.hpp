#pragma once

#include "abclim/abc.hpp"
#include "abclim/activation.hpp"
#include "abclim/mlp.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace abclim {

struct TransferConfig {
    AbcParam param;
    Activation act;
    std::vector<int> widths;
    int T_pre = 0;   // pretraining updates on routine A
    int t_fine = 0;  // finetuning updates on routine B after the readout reset
    TrainRoutine A, B;
    std::vector<std::uint64_t> seeds;
    std::vector<Eigen::VectorXd> probes;  // empty: inputs of A and B
    bool allow_feature_learning = false;  // for the muP control run
};

struct TransferRow {
    int width = 0;
    std::uint64_t seed = 0;
    // max over probes and output coords of |g_{T;t} - g_{0;t}|
    double gap = 0.0;
};

// Pretrain on A, reset the readout, finetune on B; compare with the same
// procedure without pretraining (identical init and readout reset).
// Throws std::domain_error unless the parametrization is in the kernel
// regime (or allow_feature_learning is set).
std::vector<TransferRow> transfer_triviality(const TransferConfig& cfg);

}  // namespace abclim
