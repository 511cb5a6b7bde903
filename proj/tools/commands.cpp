#include "commands.hpp"

#include "abclim/compare.hpp"
#include "abclim/kernelgd.hpp"
#include "abclim/linlim.hpp"
#include "abclim/maml.hpp"
#include "abclim/particle.hpp"
#include "abclim/rng.hpp"
#include "abclim/stats.hpp"
#include "abclim/transfer.hpp"
#include "abclim/w2v.hpp"
#include "abclim/wick.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

namespace abclim::cli {

namespace {

std::string coord_name(const std::string& stem, std::size_t probe, Eigen::Index coord, Eigen::Index dims) {
    std::string s = stem + std::to_string(probe);
    if (dims > 1) s += "_" + std::to_string(coord);
    return s;
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    return in;
}

// ---------------------------------------------------------------- classify

class Classify : public Command {
    ParamSpec param_;

    void configure(Options& o) override { param_.add(o); }

public:
    void run() override {
        const AbcParam p = param_.build();
        const Classification c = classify(p);
        std::ostringstream csv;
        csv << "layer,a,b,layer_r\n";
        for (int l = 1; l <= p.L + 1; ++l)
            csv << l << ',' << format_rational(p.a_at(l)) << ',' << format_rational(p.b_at(l)) << ','
                << (l <= p.L ? format_rational(layer_r(p, l)) : std::string()) << '\n';
        out_.write("results.csv", csv.str());
        nlohmann::json result = to_json(c);
        result["param"] = to_json(p);
        std::cout << result.dump(2) << '\n';
        finish(result);
    }
};

// ------------------------------------------------------------ train-finite

class TrainFinite : public Command {
    ParamSpec param_;
    RoutineSpec routine_;
    std::string act_ = "tanh";
    int width_ = 256;
    int steps_ = 10;
    std::vector<double> probes_;
    bool decoupled_ = false, hidden_bias_ = false;

    void configure(Options& o) override {
        param_.add(o);
        routine_.add(o);
        o.add("act", act_, "identity, quadratic, relu, tanh, gelu[:sigma]");
        o.add("width", width_, "hidden width n");
        o.add("steps", steps_, "SGD updates");
        o.add("probes", probes_, "probe inputs, flattened");
        o.add("decoupled", decoupled_, "decoupled backprop");
        o.add("hidden-bias", hidden_bias_, "bias on layer 1");
        o.add_seed(seed_);
    }

public:
    void run() override {
        opts_->require_seed("finite nets are randomly initialized");
        const TrainRoutine r = routine_.build();
        MlpOptions mo;
        mo.decoupled_backprop = decoupled_;
        mo.hidden_bias = hidden_bias_;
        const auto d = static_cast<int>(r.inputs[0].size());
        const auto d_o = static_cast<int>(r.targets[0].size());
        FiniteMlp net = FiniteMlp::init(param_.build(), width_, d, d_o, Activation::parse(act_), seed_, mo);
        const auto probes = output_probes(probe_inputs(probes_, d, r));
        const Trajectory tr = train(net, r, steps_, probes);
        std::vector<std::string> cols{"t", "loss"};
        cols.insert(cols.end(), tr.probe_names.begin(), tr.probe_names.end());
        Table table(cols);
        for (const auto& row : tr.rows) {
            std::vector<double> v{static_cast<double>(row.t), row.loss};
            v.insert(v.end(), row.probes.begin(), row.probes.end());
            table.add_row(v);
        }
        out_.write("results.csv", table);
        finish();
    }
};

// ------------------------------------------------------------ limit-linear

class LimitLinear : public Command {
    RoutineSpec routine_;
    int steps_ = 10;
    std::vector<double> probes_;
    std::string engine_ = "closed";

    void configure(Options& o) override {
        routine_.add(o);
        o.add("steps", steps_, "SGD updates");
        o.add("probes", probes_, "probe inputs, flattened");
        o.add("engine", engine_, "closed (A,B,C,D recursion) or coeff (coefficient space)")
            ->check(CLI::IsMember({"closed", "coeff"}));
    }

public:
    void run() override {
        const TrainRoutine r = routine_.build();
        const auto d = static_cast<int>(r.inputs[0].size());
        const auto d_o = static_cast<int>(r.targets[0].size());
        const auto probes = probe_inputs(probes_, d, r);
        const LinLimitTrajectory tr = engine_ == "closed"
                                          ? lin1lp_run(r, steps_, probes)
                                          : coeff_run(CoeffNet::diagonal(d, d_o, LinHyper{}), r, steps_, probes);
        std::vector<std::string> cols{"t", "loss"};
        for (std::size_t p = 0; p < probes.size(); ++p)
            for (Eigen::Index o = 0; o < d_o; ++o) cols.push_back(coord_name("f", p, o, d_o));
        Table table(cols);
        for (std::size_t t = 0; t < tr.f.size(); ++t) {
            std::vector<double> v{static_cast<double>(t), t < tr.loss.size() ? tr.loss[t] : std::nan("")};
            for (Eigen::Index p = 0; p < tr.f[t].rows(); ++p)
                for (Eigen::Index o = 0; o < d_o; ++o) v.push_back(tr.f[t](p, o));
            table.add_row(v);
        }
        out_.write("results.csv", table);
        finish();
    }
};

// ------------------------------------------------- limit-particle / exact

class LimitRun : public Command {
    bool particle_;
    RoutineSpec routine_;
    std::string depth_ = "shallow";
    std::string act_ = "quadratic";
    int steps_ = 4;
    std::vector<double> probes_;
    std::size_t M_ = std::size_t{1} << 18;
    int sections_ = 64;
    int T_cap_ = 4;

    void configure(Options& o) override {
        routine_.add(o);
        o.add("depth", depth_, "shallow, decoupled or coupled");
        o.add("act", act_, "activation");
        o.add("steps", steps_, "SGD updates");
        o.add("probes", probes_, "scalar probe inputs");
        if (particle_) {
            o.add("M", M_, "particles");
            o.add("sections", sections_, "blocks for the sectioning stderr");
            o.add_seed(seed_);
        } else {
            o.add("T-cap", T_cap_, "largest allowed number of updates");
        }
    }

public:
    explicit LimitRun(bool particle) : particle_(particle) {}

    void run() override {
        if (particle_) opts_->require_seed("particles are sampled");
        const TrainRoutine r = routine_.build();
        LimitConfig cfg;
        cfg.depth = parse_depth(depth_);
        cfg.act = Activation::parse(act_);
        cfg.probes = probes_;
        LimitTrajectory tr;
        if (particle_) {
            ParticleOptions po;
            po.sections = sections_;
            tr = particle_run(cfg, r, steps_, M_, seed_, po);
        } else {
            ExactOptions eo;
            eo.T_cap = T_cap_;
            tr = exact_run(cfg, r, steps_, eo);
        }
        std::vector<std::string> cols{"t", "xi", "y", "f"};
        if (particle_) cols.push_back("f_stderr");
        cols.insert(cols.end(), {"loss", "chi"});
        for (std::size_t p = 0; p < tr.probes.size(); ++p) {
            cols.push_back("probe" + std::to_string(p));
            if (particle_) cols.push_back("probe" + std::to_string(p) + "_stderr");
        }
        Table table(cols);
        for (const auto& row : tr.rows) {
            std::vector<double> v{static_cast<double>(row.t), row.xi, row.y, row.f};
            if (particle_) v.push_back(row.f_stderr);
            v.insert(v.end(), {row.loss, row.chi});
            for (std::size_t p = 0; p < tr.probes.size(); ++p) {
                v.push_back(row.probe_f[p]);
                if (particle_) v.push_back(row.probe_stderr[p]);
            }
            table.add_row(v);
        }
        out_.write("results.csv", table);
        finish(nlohmann::json{{"ae_derivatives", tr.ae_derivatives}});
    }
};

// --------------------------------------------------------------- kernel-gd

class KernelGd : public Command {
    ParamSpec param_;
    RoutineSpec routine_;
    std::string act_ = "relu";
    int steps_ = 10;
    std::vector<double> probes_;
    int nodes_ = 64;
    std::size_t mc_samples_ = 0;

    void configure(Options& o) override {
        param_.name = "NTP";
        param_.add(o);
        routine_.add(o);
        o.add("act", act_, "activation");
        o.add("steps", steps_, "kernel gradient steps");
        o.add("probes", probes_, "extra kernel inputs, flattened");
        o.add("nodes", nodes_, "Gauss-Hermite nodes per dimension");
        o.add("mc-samples", mc_samples_, "Monte Carlo samples instead of quadrature (0 = off)");
        o.add_seed(seed_);
    }

public:
    void run() override {
        if (mc_samples_ > 0) opts_->require_seed("Monte Carlo kernel");
        const TrainRoutine r = routine_.build();
        const auto d = static_cast<int>(r.inputs[0].size());
        auto inputs = probe_inputs({}, d, r);
        for (const auto& p : probe_inputs(probes_, d, r))
            if (std::find(inputs.begin(), inputs.end(), p) == inputs.end()) inputs.push_back(p);
        GaussQuad quad;
        quad.nodes = nodes_;
        quad.mc_samples = mc_samples_;
        quad.seed = seed_;
        const KernelTable K = limit_kernel(param_.build(), Activation::parse(act_), inputs, quad);
        std::ostringstream kcsv;
        K.write_csv(kcsv);
        out_.write("results.csv", kcsv.str());

        const KernelTrajectory tr = kgd_run(K, r, steps_);
        const Eigen::Index d_o = tr.f[0].cols();
        std::vector<std::string> cols{"t", "loss"};
        for (std::size_t p = 0; p < inputs.size(); ++p)
            for (Eigen::Index o = 0; o < d_o; ++o) cols.push_back(coord_name("f", p, o, d_o));
        Table table(cols);
        for (std::size_t t = 0; t < tr.f.size(); ++t) {
            std::vector<double> v{static_cast<double>(t), t < tr.loss.size() ? tr.loss[t] : std::nan("")};
            for (Eigen::Index p = 0; p < tr.f[t].rows(); ++p)
                for (Eigen::Index o = 0; o < d_o; ++o) v.push_back(tr.f[t](p, o));
            table.add_row(v);
        }
        out_.write("trajectory.csv", table);
        finish(nlohmann::json{{"lag_case", K.lag_case}, {"min_eigenvalue", K.min_eigenvalue()}});
    }
};

// ----------------------------------------------------------------- compare

class Compare : public Command {
    std::string phi_ = "quadratic";
    std::string depth_ = "1";
    std::vector<int> widths_{256, 1024, 4096};
    int steps_ = 4;
    int seeds_ = 20;
    double eta_ = 0.01;
    std::string engine_ = "exact";
    std::size_t M_ = std::size_t{1} << 20;

    void configure(Options& o) override {
        o.add("phi", phi_, "activation");
        o.add("depth", depth_, "1, 2, 2-decoupled (or shallow, coupled, decoupled)");
        o.add("widths", widths_, "finite widths");
        o.add("steps", steps_, "loss rows compared (t = 0..steps-1)");
        o.add("seeds", seeds_, "finite nets per width");
        o.add("eta", eta_, "learning rate");
        o.add("engine", engine_, "limit engine: exact or particle")->check(CLI::IsMember({"exact", "particle"}));
        o.add("M", M_, "particles (particle engine)");
        o.add_seed(seed_);
    }

public:
    void run() override {
        opts_->require_seed("finite nets and data are random");
        ToyConfig cfg;
        cfg.depth = depth_ == "1"             ? LimitDepth::shallow
                    : depth_ == "2"           ? LimitDepth::coupled
                    : depth_ == "2-decoupled" ? LimitDepth::decoupled
                                              : parse_depth(depth_);
        cfg.act = Activation::parse(phi_);
        cfg.T = steps_;
        cfg.eta = eta_;
        cfg.widths = widths_;
        cfg.seeds = seeds_;
        cfg.seed = seed_;
        cfg.engine = engine_ == "exact" ? LimitEngine::exact : LimitEngine::particle;
        cfg.M = M_;
        const ToyComparison cmp = compare_toy(cfg);

        Table summary({"width", "mean_gap", "gap_stderr"});
        for (std::size_t w = 0; w < widths_.size(); ++w)
            summary.add_row({static_cast<double>(widths_[w]), cmp.mean_gap[w], cmp.gap_stderr[w]});
        out_.write("results.csv", summary);

        Table per_seed({"width", "seed_index", "gap"});
        for (const auto& row : cmp.rows)
            per_seed.add_row({static_cast<double>(row.width), static_cast<double>(row.seed_index), row.gap});
        out_.write("gaps.csv", per_seed);

        const bool particle = cfg.engine == LimitEngine::particle;
        Table limit(particle ? std::vector<std::string>{"t", "xi", "y", "f", "f_stderr", "loss"}
                             : std::vector<std::string>{"t", "xi", "y", "f", "loss"});
        for (const auto& row : cmp.limit.rows) {
            std::vector<double> v{static_cast<double>(row.t), row.xi, row.y, row.f};
            if (particle) v.push_back(row.f_stderr);
            v.push_back(row.loss);
            limit.add_row(v);
        }
        out_.write("limit.csv", limit);

        for (std::size_t w = 0; w < widths_.size(); ++w)
            std::cout << "width " << widths_[w] << "  mean gap " << format_double(cmp.mean_gap[w]) << " +- "
                      << format_double(cmp.gap_stderr[w]) << '\n';
        finish();
    }
};

// -------------------------------------------------------------------- maml

class Maml : public Command {
    std::string model_ = "coeff-inf";
    FewShotConfig fs_;
    MamlConfig mc_;
    double clip_ = 0.0;
    int train_tasks_ = 3200, test_tasks_ = 1000;
    double sigma_u_ = 1.0, sigma_v_ = 1.0, alpha_ = 1.0;
    int width_ = 256;
    ParamSpec param_;
    std::string act_ = "relu";
    std::string kernel_ = "linear";
    std::size_t units_ = 4096;

    void configure(Options& o) override {
        o.add("model", model_, "coeff-inf, coeff-finite, mlp or kernel")
            ->check(CLI::IsMember({"coeff-inf", "coeff-finite", "mlp", "kernel"}));
        o.add("d", fs_.d, "input dim");
        o.add("n-way", fs_.n_way, "classes per task");
        o.add("k-shot", fs_.k_shot, "support examples per class");
        o.add("n-query", fs_.n_query, "query examples per class");
        o.add("latent-dim", fs_.latent_dim, "prototype subspace dim (0 = d)");
        o.add("proto-scale", fs_.proto_scale, "prototype norm scale");
        o.add("noise", fs_.noise, "example noise norm scale");
        o.add("train-tasks", train_tasks_, "meta-training tasks");
        o.add("test-tasks", test_tasks_, "meta-test tasks");
        o.add("eps", mc_.eps, "adaptation step");
        o.add("eta", mc_.eta, "meta step");
        o.add("task-batch", mc_.task_batch, "tasks per meta update");
        o.add("clip", clip_, "meta gradient clip (0 = off)");
        o.add("adapt-steps", mc_.adapt_steps, "adaptation steps in meta-training");
        o.add("test-adapt-steps", mc_.test_adapt_steps, "adaptation steps at meta-test");
        o.add("sigma-u", sigma_u_, "coeff models: input layer init scale");
        o.add("sigma-v", sigma_v_, "coeff models: readout init scale");
        o.add("alpha", alpha_, "coeff models: bias multiplier");
        o.add("width", width_, "coeff-finite and mlp width");
        param_.add(o);
        o.add("act", act_, "mlp and MC kernel activation");
        o.add("kernel", kernel_, "linear, nngp-mc or ntk-mc")
            ->check(CLI::IsMember({"linear", "nngp-mc", "ntk-mc"}));
        o.add("units", units_, "hidden units of the MC kernel");
        o.add_seed(seed_);
    }

public:
    void run() override {
        opts_->require_seed("tasks are sampled");
        if (clip_ < 0.0) throw std::invalid_argument("--clip must be >= 0");
        mc_.clip = clip_ > 0.0 ? clip_ : std::numeric_limits<double>::infinity();
        mc_.loss = Loss::softmax;
        const auto train = gen_fewshot(seed_, fs_, static_cast<std::size_t>(train_tasks_));
        const auto test = gen_fewshot(seed_, fs_, static_cast<std::size_t>(test_tasks_),
                                      static_cast<std::size_t>(train_tasks_));
        LinHyper h;
        h.sigma_u = sigma_u_;
        h.sigma_v = sigma_v_;
        h.alpha = alpha_;
        const std::uint64_t init_seed = hash_combine(seed_, 0x1417);
        MamlResult res;
        if (model_ == "coeff-inf") {
            CoeffNet net = CoeffNet::diagonal(fs_.d, fs_.n_way, h);
            res = maml_finite(net, train, test, mc_);
        } else if (model_ == "coeff-finite") {
            CoeffNet net = CoeffNet::finite(width_, fs_.d, fs_.n_way, h, init_seed);
            res = maml_finite(net, train, test, mc_);
        } else if (model_ == "mlp") {
            FiniteMlp net = FiniteMlp::init(param_.build(), width_, fs_.d, fs_.n_way, Activation::parse(act_), init_seed);
            res = maml_finite(net, train, test, mc_);
        } else {
            if (kernel_ == "linear") {
                const KernelFn K = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.dot(b); };
                res = maml_kernel(K, fs_.n_way, train, test, mc_).result;
            } else {
                const auto kind = kernel_ == "ntk-mc" ? McShallowKernel::Kind::ntk : McShallowKernel::Kind::nngp;
                const auto K = nngp_ntk_kernel_mc(kind, Activation::parse(act_), fs_.d, units_, init_seed);
                res = maml_kernel(KernelModelQ::from_features(K.feature_handle(), fs_.n_way), train, test, mc_).result;
            }
        }
        Table table({"test_accuracy", "test_loss", "test_queries", "meta_updates"});
        table.add_row({res.test_accuracy, res.test_loss, static_cast<double>(res.test_queries),
                       static_cast<double>(res.meta_grad_norm.size())});
        out_.write("results.csv", table);
        Table norms({"update", "meta_grad_norm"});
        for (std::size_t i = 0; i < res.meta_grad_norm.size(); ++i)
            norms.add_row({static_cast<double>(i), res.meta_grad_norm[i]});
        if (!norms.empty()) out_.write("grad_norms.csv", norms);
        std::cout << "meta-test accuracy " << format_double(res.test_accuracy) << " over " << res.test_queries
                  << " queries\n";
        finish();
    }
};

// --------------------------------------------------------------------- w2v

class W2v : public Command {
    std::string corpus_, analogies_;
    int min_count_ = 5;
    int planted_rows_ = 8, planted_cols_ = 8;
    std::size_t planted_sentences_ = 20000;
    std::size_t planted_analogies_ = 1000;
    std::string mode_ = "coefficient";
    int width_ = 200;
    W2VHyper h_;
    double gamma_ = -1.0;  // < 0: pick by corpus
    long steps_ = 100000;
    long eval_every_ = 10000;
    int candidate_limit_ = 0;

    void configure(Options& o) override {
        o.add("corpus", corpus_, "text file, one sentence per line (empty = planted grid corpus)");
        o.add("analogies", analogies_, "analogy file, four words per line");
        o.add("min-count", min_count_, "drop words rarer than this");
        o.add("planted-rows", planted_rows_, "planted corpus grid rows");
        o.add("planted-cols", planted_cols_, "planted corpus grid columns");
        o.add("planted-sentences", planted_sentences_, "planted corpus sentences");
        o.add("planted-analogies", planted_analogies_, "planted analogies (at most)");
        o.add("mode", mode_, "coefficient (infinite-width muP) or finite")
            ->check(CLI::IsMember({"coefficient", "finite"}));
        o.add("width", width_, "finite embedding width");
        o.add("sigma-u", h_.sigma_u, "input embedding init scale");
        o.add("sigma-v", h_.sigma_v, "output embedding init scale");
        o.add("eta", h_.eta, "learning rate");
        o.add("gamma", gamma_, "weight decay (< 0: 0 on the planted corpus, 0.001 on a text corpus)");
        o.add("p-target", h_.p_target, "probability the target is the center word");
        o.add("window", h_.window, "context half-width");
        o.add("steps", steps_, "SGD steps");
        o.add("eval-every", eval_every_, "steps between analogy evaluations");
        o.add("candidate-limit", candidate_limit_, "answer only among the K most frequent words (0 = all)");
        o.add_seed(seed_);
    }

public:
    void run() override {
        opts_->require_seed("training samples positions and negatives");
        Corpus corpus;
        std::vector<Analogy> quads;
        std::size_t skipped = 0;
        if (corpus_.empty()) {
            PlantedCorpus pc = gen_planted_corpus(seed_, planted_rows_, planted_cols_, planted_sentences_,
                                                  planted_analogies_);
            corpus = std::move(pc.corpus);
            quads = std::move(pc.analogies);
        } else {
            auto in = open_input(corpus_);
            corpus = read_corpus(in, min_count_);
            if (analogies_.empty()) throw std::invalid_argument("--analogies is required with --corpus");
            auto an = open_input(analogies_);
            quads = read_analogies(an, corpus, &skipped);
        }
        if (quads.empty()) throw std::invalid_argument("no usable analogies");
        // decay pulls every embedding toward a shared direction on the
        // uniform-frequency planted corpus and analogies never form
        h_.gamma = gamma_ >= 0.0 ? gamma_ : corpus_.empty() ? 0.0 : W2VHyper{}.gamma;
        std::vector<int> candidates;
        for (int i = 0; i < candidate_limit_ && i < static_cast<int>(corpus.vocab.size()); ++i) candidates.push_back(i);

        const int V = static_cast<int>(corpus.vocab.size());
        W2VState state = mode_ == "coefficient" ? W2VState::coefficient(V, h_)
                                                : W2VState::finite(V, width_, h_, hash_combine(seed_, 0xe3b));
        if (eval_every_ <= 0) eval_every_ = steps_;
        Table table({"step", "analogy_accuracy"});
        table.add_row({0.0, analogy_eval(state.input_embeddings(), quads, candidates)});
        long done = 0;
        for (std::uint64_t chunk = 0; done < steps_; ++chunk) {
            const long n = std::min(eval_every_, steps_ - done);
            w2v_train(state, corpus, n, hash_combine(seed_, chunk));
            done += n;
            table.add_row({static_cast<double>(done), analogy_eval(state.input_embeddings(), quads, candidates)});
        }
        out_.write("results.csv", table);
        const double final_acc = table.rows().back()[1];
        std::cout << "vocab " << V << ", analogies " << quads.size() << " (skipped " << skipped
                  << "), final accuracy " << format_double(final_acc) << '\n';
        finish(nlohmann::json{{"vocab", V}, {"analogies", quads.size()}, {"skipped", skipped}, {"gamma", h_.gamma}});
    }
};

// ---------------------------------------------------------------- transfer

class Transfer : public Command {
    ParamSpec param_;
    std::string act_ = "tanh";
    std::vector<int> widths_{256, 512, 1024, 2048, 4096};
    int seeds_ = 5;
    int T_pre_ = 10, t_fine_ = 5;
    RoutineSpec A_, B_;
    std::vector<double> probes_;
    bool allow_fl_ = false;

    void configure(Options& o) override {
        param_.name = "NTP";
        param_.L = 2;
        param_.add(o);
        o.add("act", act_, "activation");
        o.add("widths", widths_, "widths");
        o.add("seeds", seeds_, "nets per width");
        o.add("T-pre", T_pre_, "pretraining updates on A");
        o.add("t-fine", t_fine_, "finetuning updates on B");
        A_.prefix = "a-";
        B_.prefix = "b-";
        A_.add(o);
        B_.add(o);
        o.add("probes", probes_, "probe inputs, flattened (empty = inputs of A and B)");
        o.add("allow-feature-learning", allow_fl_, "run feature-learning parametrizations too");
        o.add_seed(seed_);
    }

public:
    void run() override {
        opts_->require_seed("nets are randomly initialized");
        TransferConfig cfg;
        cfg.param = param_.build();
        cfg.act = Activation::parse(act_);
        cfg.widths = widths_;
        cfg.T_pre = T_pre_;
        cfg.t_fine = t_fine_;
        cfg.A = A_.build();
        cfg.B = B_.build();
        for (int s = 0; s < seeds_; ++s) cfg.seeds.push_back(hash_combine(seed_, static_cast<std::uint64_t>(s)));
        if (!probes_.empty()) cfg.probes = probe_inputs(probes_, static_cast<int>(cfg.A.inputs[0].size()), cfg.A);
        cfg.allow_feature_learning = allow_fl_;
        const auto rows = transfer_triviality(cfg);

        Table table({"width", "seed_index", "gap"});
        std::vector<double> w, g;
        for (std::size_t k = 0; k < rows.size(); ++k) {
            table.add_row({static_cast<double>(rows[k].width), static_cast<double>(k % cfg.seeds.size()), rows[k].gap});
        }
        for (std::size_t i = 0; i < widths_.size(); ++i) {
            std::vector<double> gi;
            for (const auto& r : rows)
                if (r.width == widths_[i]) gi.push_back(r.gap);
            w.push_back(widths_[i]);
            g.push_back(mean(gi));
        }
        out_.write("results.csv", table);
        nlohmann::json result;
        if (widths_.size() >= 2 && std::all_of(g.begin(), g.end(), [](double x) { return x > 0.0; })) {
            result["loglog_slope"] = loglog_slope(w, g);
            std::cout << "log-log slope of the mean gap vs width: " << format_double(loglog_slope(w, g)) << '\n';
        }
        finish(result);
    }
};

}  // namespace

std::vector<std::unique_ptr<Command>> make_commands(CLI::App& root) {
    std::vector<std::unique_ptr<Command>> cmds;
    auto add = [&](std::unique_ptr<Command> c, const char* name, const char* help) {
        c->attach(root, name, help);
        cmds.push_back(std::move(c));
    };
    add(std::make_unique<Classify>(), "classify", "stability and regime of an abc-parametrization");
    add(std::make_unique<TrainFinite>(), "train-finite", "SGD on a finite-width MLP");
    add(std::make_unique<LimitLinear>(), "limit-linear", "infinite-width shallow linear muP net");
    add(std::make_unique<LimitRun>(true), "limit-particle", "infinite-width muP limit by particles");
    add(std::make_unique<LimitRun>(false), "limit-exact", "infinite-width muP limit by exact Gaussian moments");
    add(std::make_unique<KernelGd>(), "kernel-gd", "limit kernel and kernel gradient descent");
    add(std::make_unique<Compare>(), "compare", "finite muP nets vs the infinite-width limit");
    add(std::make_unique<Maml>(), "maml", "first-order MAML on synthetic few-shot tasks");
    add(std::make_unique<W2v>(), "w2v", "CBOW word2vec with negative sampling");
    add(std::make_unique<Transfer>(), "transfer", "pretrain/finetune gap in the kernel regime");
    return cmds;
}

}  // namespace abclim::cli
