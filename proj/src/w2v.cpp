#include "abclim/w2v.hpp"

#include "abclim/loss.hpp"
#include "abclim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace abclim {

W2VState W2VState::coefficient(int vocab, const W2VHyper& hyper) {
    if (vocab < 2) throw std::invalid_argument("vocabulary needs at least two words");
    W2VState s;
    s.hyper_ = hyper;
    s.in_ = Eigen::MatrixXd::Zero(vocab, 2 * vocab);
    s.out_ = Eigen::MatrixXd::Zero(vocab, 2 * vocab);
    s.in_.leftCols(vocab) = hyper.sigma_u * Eigen::MatrixXd::Identity(vocab, vocab);
    s.out_.rightCols(vocab) = hyper.sigma_v * Eigen::MatrixXd::Identity(vocab, vocab);
    return s;
}

W2VState W2VState::finite(int vocab, int n, const W2VHyper& hyper, std::uint64_t seed) {
    if (vocab < 2 || n < 1) throw std::invalid_argument("need |V| >= 2 and n >= 1");
    W2VState s;
    s.hyper_ = hyper;
    const double root_n = std::sqrt(static_cast<double>(n));
    Rng ru(hash_combine(seed, 1)), rv(hash_combine(seed, 2));
    s.in_.resize(vocab, n);
    s.out_.resize(vocab, n);
    for (int j = 0; j < vocab; ++j)
        for (int a = 0; a < n; ++a) s.in_(j, a) = hyper.sigma_u / root_n * ru.normal();
    for (int j = 0; j < vocab; ++j)
        for (int a = 0; a < n; ++a) s.out_(j, a) = hyper.sigma_v / root_n * rv.normal();
    return s;
}

double W2VState::step(const std::vector<int>& context, int center, int target) {
    const int V = vocab();
    if (context.empty()) throw std::invalid_argument("empty context");
    auto check = [V](int w) {
        if (w < 0 || w >= V) throw std::out_of_range("token id out of range");
    };
    for (int j : context) check(j);
    check(center);
    check(target);

    const double inv = 1.0 / static_cast<double>(context.size());
    Eigen::VectorXd ctx = Eigen::VectorXd::Zero(dim());
    for (int j : context) ctx += in_.row(j).transpose();
    ctx *= scale_ * inv;  // Phi^J
    const Eigen::VectorXd tgt = scale_ * out_.row(target).transpose();
    const double s = sigmoid(ctx.dot(tgt));
    // ascent on log sigma for the true center, log(1 - sigma) for negatives
    const double coef = target == center ? 1.0 - s : -s;

    const double eta = hyper_.eta;
    const double next_scale = scale_ * (1.0 - eta * hyper_.gamma);
    if (next_scale == 0.0) throw std::domain_error("weight decay factor eta*gamma must be < 1");
    for (int j : context) in_.row(j) += (eta * inv * coef / next_scale) * tgt.transpose();
    out_.row(target) += (eta * coef / next_scale) * ctx.transpose();
    scale_ = next_scale;
    if (scale_ < 1e-150) {
        in_ *= scale_;
        out_ *= scale_;
        scale_ = 1.0;
    }
    return s;
}

std::size_t Corpus::tokens() const {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.size();
    return n;
}

int Corpus::id(const std::string& word) const {
    if (index_.size() != vocab.size()) {
        index_.clear();
        for (std::size_t i = 0; i < vocab.size(); ++i) index_.emplace(vocab[i], static_cast<int>(i));
    }
    const auto it = index_.find(word);
    return it == index_.end() ? -1 : it->second;
}

void w2v_train(W2VState& state, const Corpus& corpus, long steps, std::uint64_t seed) {
    if (steps < 0) throw std::invalid_argument("steps must be >= 0");
    const int V = state.vocab();
    if (static_cast<int>(corpus.vocab.size()) > V) throw std::invalid_argument("corpus vocabulary exceeds state");
    // cumulative token offsets for uniform position sampling
    std::vector<std::size_t> offsets{0};
    for (const auto& s : corpus.sentences) {
        for (int tok : s)
            if (tok < 0 || tok >= V) throw std::out_of_range("corpus token id out of range");
        offsets.push_back(offsets.back() + s.size());
    }
    const std::size_t total = offsets.back();
    if (total == 0) throw std::invalid_argument("empty corpus");
    const int w = state.hyper().window;
    if (w < 1) throw std::invalid_argument("window must be >= 1");

    Rng rng(seed);
    std::vector<int> context;
    for (long t = 0; t < steps;) {
        const std::size_t pos = rng.below(total);
        const auto sit = std::upper_bound(offsets.begin(), offsets.end(), pos) - 1;
        const auto& sent = corpus.sentences[static_cast<std::size_t>(sit - offsets.begin())];
        const auto k = static_cast<long>(pos - *sit);
        context.clear();
        for (long q = std::max(0L, k - w); q <= std::min(static_cast<long>(sent.size()) - 1, k + w); ++q)
            if (q != k) context.push_back(sent[static_cast<std::size_t>(q)]);
        if (context.empty()) continue;  // one-word sentence: resample
        const int center = sent[static_cast<std::size_t>(k)];
        int target = center;
        if (rng.uniform() >= state.hyper().p_target) {
            target = static_cast<int>(rng.below(static_cast<std::uint64_t>(V - 1)));
            if (target >= center) ++target;
        }
        state.step(context, center, target);
        ++t;
    }
}

double analogy_eval(const Eigen::MatrixXd& embeddings, const std::vector<Analogy>& quads,
                    const std::vector<int>& candidates) {
    if (quads.empty()) return 0.0;
    const auto V = static_cast<int>(embeddings.rows());
    std::vector<int> pool = candidates;
    if (pool.empty()) {
        pool.resize(static_cast<std::size_t>(V));
        std::iota(pool.begin(), pool.end(), 0);
    } else {
        std::sort(pool.begin(), pool.end());
    }
    int correct = 0;
    for (const auto& q : quads) {
        for (int w : q)
            if (w < 0 || w >= V) throw std::out_of_range("analogy word id out of range");
        const Eigen::VectorXd query =
            embeddings.row(q[0]).transpose() - embeddings.row(q[1]).transpose() + embeddings.row(q[2]).transpose();
        int best = -1;
        double best_score = -std::numeric_limits<double>::infinity();
        for (int i : pool) {
            if (i == q[0] || i == q[1] || i == q[2]) continue;
            const double s = embeddings.row(i).dot(query);
            if (best < 0 || s > best_score) {  // strict: earlier index wins ties
                best = i;
                best_score = s;
            }
        }
        correct += best == q[3];
    }
    return static_cast<double>(correct) / static_cast<double>(quads.size());
}

PlantedCorpus gen_planted_corpus(std::uint64_t seed, int rows, int cols, std::size_t sentences,
                                 std::size_t max_analogies, int sentence_len) {
    if (rows < 2 || cols < 2) throw std::invalid_argument("planted grid needs at least 2 x 2");
    if (sentence_len < 2) throw std::invalid_argument("sentences need at least two words");
    Rng rng(seed);
    const int V = rows * cols;

    // random placement of ids
    std::vector<int> perm(static_cast<std::size_t>(V));
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = V - 1; i > 0; --i)
        std::swap(perm[static_cast<std::size_t>(i)], perm[rng.below(static_cast<std::uint64_t>(i) + 1)]);
    auto grid = [&](int r, int c) { return perm[static_cast<std::size_t>(r * cols + c)]; };

    PlantedCorpus out;
    out.corpus.vocab.resize(static_cast<std::size_t>(V));
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            out.corpus.vocab[static_cast<std::size_t>(grid(r, c))] = "w" + std::to_string(r) + "_" + std::to_string(c);

    // each sentence runs along one row or one column of the grid
    for (std::size_t s = 0; s < sentences; ++s) {
        const bool along_row = rng.uniform() < 0.5;
        const int fixed = static_cast<int>(rng.below(static_cast<std::uint64_t>(along_row ? rows : cols)));
        const int span = along_row ? cols : rows;
        std::vector<int> sent;
        for (int k = 0; k < sentence_len; ++k) {
            const int free = static_cast<int>(rng.below(static_cast<std::uint64_t>(span)));
            sent.push_back(along_row ? grid(fixed, free) : grid(free, fixed));
        }
        out.corpus.sentences.push_back(std::move(sent));
    }

    std::vector<Analogy> all;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            for (int r2 = 0; r2 < rows; ++r2)
                for (int c2 = 0; c2 < cols; ++c2)
                    if (r2 != r && c2 != c) all.push_back({grid(r, c), grid(r, c2), grid(r2, c2), grid(r2, c)});
    for (std::size_t i = all.size(); i > 1; --i) std::swap(all[i - 1], all[rng.below(i)]);
    if (all.size() > max_analogies) all.resize(max_analogies);
    out.analogies = std::move(all);
    return out;
}

Corpus read_corpus(std::istream& in, int min_count) {
    std::vector<std::vector<std::string>> lines;
    std::map<std::string, long> counts;
    std::string line, tok;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::vector<std::string> words;
        while (ls >> tok) {
            ++counts[tok];
            words.push_back(tok);
        }
        if (!words.empty()) lines.push_back(std::move(words));
    }
    std::vector<std::pair<std::string, long>> kept;
    for (const auto& [w, c] : counts)
        if (c >= min_count) kept.emplace_back(w, c);
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    Corpus corpus;
    for (const auto& [w, c] : kept) corpus.vocab.push_back(w);
    for (const auto& words : lines) {
        std::vector<int> ids;
        for (const auto& w : words)
            if (const int id = corpus.id(w); id >= 0) ids.push_back(id);
        if (!ids.empty()) corpus.sentences.push_back(std::move(ids));
    }
    return corpus;
}

std::vector<Analogy> read_analogies(std::istream& in, const Corpus& corpus, std::size_t* skipped) {
    std::vector<Analogy> out;
    std::size_t miss = 0;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::vector<std::string> words;
        std::string w;
        while (ls >> w) words.push_back(w);
        if (words.empty() || words[0].starts_with(':')) continue;  // blank or section header
        if (words.size() != 4) throw std::invalid_argument("analogy line needs 4 words: " + line);
        Analogy q{};
        bool ok = true;
        for (std::size_t i = 0; i < 4; ++i) {
            q[i] = corpus.id(words[i]);
            ok = ok && q[i] >= 0;
        }
        if (ok)
            out.push_back(q);
        else
            ++miss;
    }
    if (skipped) *skipped = miss;
    return out;
}

}  // namespace abclim
