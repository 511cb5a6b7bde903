#include "abclim/compare.hpp"

#include "abclim/abc.hpp"
#include "abclim/parallel.hpp"
#include "abclim/rng.hpp"
#include "abclim/stats.hpp"
#include "abclim/wick.hpp"

#include <cmath>
#include <stdexcept>

namespace abclim {

TrainRoutine toy_routine(std::uint64_t seed, int T, double eta) {
    if (T < 1) throw std::invalid_argument("toy routine needs T >= 1");
    Rng rng(seed);
    TrainRoutine r;
    r.eta = eta;
    r.loss = Loss::mse;
    for (int t = 0; t < T; ++t) {
        r.inputs.push_back(Eigen::VectorXd::Constant(1, rng.below(2) ? 1.0 : -1.0));
        r.targets.push_back(Eigen::VectorXd::Constant(1, rng.below(2) ? 1.0 : -1.0));
    }
    return r;
}

ToyComparison compare_toy(const ToyConfig& cfg) {
    if (cfg.widths.empty() || cfg.seeds < 1) throw std::invalid_argument("compare needs widths and seeds");
    ToyComparison out;
    out.routine = toy_routine(hash_combine(cfg.seed, 0xda7a), cfg.T, cfg.eta);

    LimitConfig lc;
    lc.depth = cfg.depth;
    lc.act = cfg.act;
    lc.eta = cfg.eta;
    out.limit = cfg.engine == LimitEngine::exact
                    ? exact_run(lc, out.routine, cfg.T)
                    : particle_run(lc, out.routine, cfg.T, cfg.M, hash_combine(cfg.seed, 0x9a27));

    const int L = cfg.depth == LimitDepth::shallow ? 1 : 2;
    MlpOptions opts;
    opts.decoupled_backprop = cfg.depth == LimitDepth::decoupled;
    const AbcParam param = named_param("MUP", L);

    const auto S = static_cast<std::size_t>(cfg.seeds);
    out.rows.resize(cfg.widths.size() * S);
    parallel_chunks(out.rows.size(), 1, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const int n = cfg.widths[k / S];
            const auto s = static_cast<int>(k % S);
            FiniteMlp net = FiniteMlp::init(param, n, 1, 1, cfg.act, hash_combine(cfg.seed, static_cast<std::uint64_t>(s)),
                                            opts);
            const Trajectory tr = train(net, out.routine, cfg.T);
            double gap = 0.0;
            for (int t = 0; t < cfg.T; ++t)
                gap += std::abs(tr.rows[static_cast<std::size_t>(t)].loss -
                                out.limit.rows[static_cast<std::size_t>(t)].loss);
            out.rows[k] = {n, s, gap / cfg.T};
        }
    });

    for (std::size_t w = 0; w < cfg.widths.size(); ++w) {
        std::vector<double> g;
        for (std::size_t s = 0; s < S; ++s) g.push_back(out.rows[w * S + s].gap);
        out.mean_gap.push_back(mean(g));
        out.gap_stderr.push_back(S > 1 ? std_error(g) : 0.0);
    }
    return out;
}

}  // namespace abclim
