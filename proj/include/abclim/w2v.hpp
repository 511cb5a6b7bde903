#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace abclim {

struct W2VHyper {
    double sigma_u = 1.0;
    double sigma_v = 1.0;
    double eta = 0.05;
    double gamma = 0.001;  // weight decay, applied every step
    double p_target = 1.0 / 21.0;  // chance that the target is the center word
    int window = 2;  // context = up to `window` tokens on each side
};

// CBOW embeddings. Input embeddings are the word vectors; output embeddings
// score targets. Coefficient mode is the infinite-width linear muP limit,
// hidden size 2|V| with one-hot init; finite mode has Gaussian init.
class W2VState {
public:
    static W2VState coefficient(int vocab, const W2VHyper& hyper);
    static W2VState finite(int vocab, int n, const W2VHyper& hyper, std::uint64_t seed);

    int vocab() const { return static_cast<int>(in_.rows()); }
    int dim() const { return static_cast<int>(in_.cols()); }
    const W2VHyper& hyper() const { return hyper_; }
    W2VHyper& hyper() { return hyper_; }

    Eigen::MatrixXd input_embeddings() const { return scale_ * in_; }
    Eigen::MatrixXd output_embeddings() const { return scale_ * out_; }
    Eigen::VectorXd input(int word) const { return scale_ * in_.row(word).transpose(); }
    Eigen::VectorXd output(int word) const { return scale_ * out_.row(word).transpose(); }

    // One SGD step for context bag J (with multiplicity), center i and
    // sampled target tau. Returns the sigmoid of the pre-update score.
    double step(const std::vector<int>& context, int center, int target);

private:
    W2VHyper hyper_;
    Eigen::MatrixXd in_, out_;  // stored; actual = scale_ * stored
    double scale_ = 1.0;        // shared weight-decay factor, applied lazily
};

struct Corpus {
    std::vector<std::string> vocab;
    std::vector<std::vector<int>> sentences;

    std::size_t tokens() const;
    int id(const std::string& word) const;  // -1 if absent
private:
    mutable std::unordered_map<std::string, int> index_;
};

// Samples positions uniformly over corpus tokens; see W2VHyper for the
// window and target rules. Negatives are uniform over V minus the center.
void w2v_train(W2VState& state, const Corpus& corpus, long steps, std::uint64_t seed);

using Analogy = std::array<int, 4>;  // a : b :: c : answer, scored as h(a) - h(b) + h(c)

// Fraction answered correctly. argmax over candidates (all words if empty)
// other than a, b, c; ties go to the lowest index.
double analogy_eval(const Eigen::MatrixXd& embeddings, const std::vector<Analogy>& quads,
                    const std::vector<int>& candidates = {});

// Grid corpus: each sentence is a run of words w(r,c) sharing a row or a
// column, so w(r,c) - w(r,c') + w(r',c') = w(r',c) is planted. Every word is
// equally frequent; ids are shuffled so answers sit at random indices.
struct PlantedCorpus {
    Corpus corpus;
    std::vector<Analogy> analogies;
};
PlantedCorpus gen_planted_corpus(std::uint64_t seed, int rows, int cols, std::size_t sentences,
                                 std::size_t max_analogies, int sentence_len = 4);

// Whitespace tokens, one sentence per line; words seen fewer than
// min_count times are dropped. Vocabulary is ordered by count, then text.
Corpus read_corpus(std::istream& in, int min_count);
// Four words per line; lines with unknown words are skipped and counted.
std::vector<Analogy> read_analogies(std::istream& in, const Corpus& corpus, std::size_t* skipped = nullptr);

}  // namespace abclim
