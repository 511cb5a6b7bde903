#include "abclim/transfer.hpp"

#include "abclim/parallel.hpp"
#include "abclim/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace abclim {

std::vector<TransferRow> transfer_triviality(const TransferConfig& cfg) {
    const Classification cls = classify(cfg.param);
    if (cls.regime != Regime::KernelRegime && !(cfg.allow_feature_learning && cls.stable && cls.nontrivial))
        throw std::domain_error("transfer triviality needs a kernel-regime parametrization, got " +
                                to_string(cls.regime));
    if (cfg.T_pre < 0 || cfg.t_fine < 0) throw std::invalid_argument("step counts must be >= 0");
    if (cfg.A.size() == 0 || cfg.B.size() == 0) throw std::invalid_argument("routines A and B need data");
    const int d = static_cast<int>(cfg.A.inputs[0].size());
    const int d_o = static_cast<int>(cfg.A.targets[0].size());

    std::vector<Eigen::VectorXd> probes = cfg.probes;
    if (probes.empty()) {
        probes = cfg.A.inputs;
        probes.insert(probes.end(), cfg.B.inputs.begin(), cfg.B.inputs.end());
    }

    std::vector<TransferRow> rows;
    for (int n : cfg.widths)
        for (std::uint64_t seed : cfg.seeds) rows.push_back({n, seed, 0.0});

    parallel_chunks(rows.size(), 1, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            TransferRow& row = rows[i];
            FiniteMlp pre = FiniteMlp::init(cfg.param, row.width, d, d_o, cfg.act, row.seed);
            FiniteMlp ctrl = pre;
            train(pre, cfg.A, cfg.T_pre);
            const std::uint64_t head = hash_combine(row.seed, 0x4ead);
            pre.reinit_last_layer(head);
            ctrl.reinit_last_layer(head);
            train(pre, cfg.B, cfg.t_fine);
            train(ctrl, cfg.B, cfg.t_fine);
            double gap = 0.0;
            for (const auto& x : probes) gap = std::max(gap, (pre.output(x) - ctrl.output(x)).cwiseAbs().maxCoeff());
            row.gap = gap;
        }
    });
    return rows;
}

}  // namespace abclim
