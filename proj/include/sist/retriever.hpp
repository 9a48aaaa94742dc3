#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sist/core.hpp"
#include "sist/stream.hpp"

namespace sist {

// Terminology store. Keys are unique; iteration follows insertion order.
class KnowledgeBase {
public:
    KnowledgeBase() = default;
    explicit KnowledgeBase(std::vector<KnowledgeItem> items);

    // Throws DataError for an empty or duplicate key.
    void add(KnowledgeItem item);

    const std::vector<KnowledgeItem>& items() const noexcept { return items_; }
    const KnowledgeItem* find(std::string_view key) const;
    std::size_t size() const noexcept { return items_.size(); }
    bool empty() const noexcept { return items_.empty(); }

private:
    std::vector<KnowledgeItem> items_;
    std::map<std::string, std::size_t, std::less<>> key_index_;
};

enum class Pooling { mean, max };

struct FeatureConfig {
    std::size_t n_gram = 3;
    std::size_t hash_buckets = 4096;
    std::size_t dim = 64;
    std::size_t heads = 1;
    std::uint64_t projection_seed = 0;
    Pooling pooling = Pooling::mean;

    bool operator==(const FeatureConfig&) const = default;
};

// Throws DataError unless dim % heads == 0, hash_buckets >= dim, and all counts are positive.
void validate_feature_config(const FeatureConfig& cfg);

// Boundary-padded character n-grams of one token ("abc", 3 -> ^ab abc bc$).
// Tokens shorter than n yield the whole padded token.
std::vector<std::string> char_ngrams(std::string_view token, std::size_t n);

// FNV-1a, used to bucket n-grams.
std::uint64_t fnv1a64(std::string_view bytes);

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Hashed n-gram encoder: sparse gram counts times a frozen seeded +-1/sqrt(d) projection.
class Featurizer {
public:
    explicit Featurizer(FeatureConfig cfg);

    const FeatureConfig& config() const noexcept { return cfg_; }

    // One row per token. Throws DataError("nothing to encode") on empty input.
    Matrix encode(const std::vector<std::string>& tokens) const;
    Matrix encode(const std::vector<TimedToken>& tokens) const;
    // Splits on whitespace first.
    Matrix encode_text(std::string_view text) const;

private:
    FeatureConfig cfg_;
    Matrix projection_;  // hash_buckets x dim
};

Matrix featurize(const std::vector<std::string>& tokens, const FeatureConfig& cfg);

struct FusionParams {
    Matrix w_q, w_k, w_v;  // dim x dim
    Vector w;              // dim
    double b = 0.0;

    static FusionParams zeros(std::size_t dim);
    std::size_t dim() const { return static_cast<std::size_t>(w.size()); }
    bool operator==(const FusionParams& o) const {
        return w_q == o.w_q && w_k == o.w_k && w_v == o.w_v && w == o.w && b == o.b;
    }
};

struct InitOptions {
    // W_q = W_k = qk_scale * I and W_v = I, each plus N(0, noise^2 / dim).
    // With qk_scale == 0 the projections are purely random, N(0, 1/dim).
    // From a purely random start attention and the output head give each other
    // no gradient and training stalls at the class prior.
    double qk_scale = 2.0;
    double noise = 0.01;
    double w_scale = 0.01;
};

FusionParams init_params(const FeatureConfig& cfg, std::uint64_t seed, const InitOptions& opts = {});

// Throws DataError when shapes disagree with cfg or entries are not finite.
void validate_params(const FusionParams& params, const FeatureConfig& cfg);

// Window-side projections, reusable across keys.
struct EncodedWindow {
    Matrix keys;    // L x d  (window . W_k)
    Matrix values;  // L x d  (window . W_v)
};

EncodedWindow encode_window(const FusionParams& params, const Matrix& window_vecs);

// Probability that the key occurs in the window.
double score(const FusionParams& params, const FeatureConfig& cfg, const Matrix& key_vecs,
             const Matrix& window_vecs);
double score_encoded(const FusionParams& params, const FeatureConfig& cfg, const Matrix& key_vecs,
                     const EncodedWindow& window);

struct BceResult {
    double loss = 0.0;
    double dlogit = 0.0;  // d loss / d pre-sigmoid logit
};

inline constexpr double kProbClamp = 1e-7;

BceResult bce_loss(double p, int label);

struct FusionGrads {
    Matrix w_q, w_k, w_v;
    Vector w;
    double b = 0.0;
};

// Loss and full analytic gradient for one (key, window, label) example.
double loss_and_grad(const FusionParams& params, const FeatureConfig& cfg, const Matrix& key_vecs,
                     const Matrix& window_vecs, int label, FusionGrads* grads);

struct TrainExample {
    std::vector<std::string> window_tokens;
    std::string key;
    int label = 0;
};

struct TrainHyper {
    double lr = 0.05;
    std::size_t epochs = 20;
    std::size_t batch = 16;
    std::uint64_t seed = 0;
};

struct TrainResult {
    FusionParams params;
    std::vector<double> epoch_losses;  // mean loss per epoch
    double final_loss() const { return epoch_losses.empty() ? 0.0 : epoch_losses.back(); }
};

// Mini-batch gradient descent on BCE. Throws DataError when a class is
// missing or the loss becomes NaN.
TrainResult train(const FusionParams& init, const Featurizer& featurizer,
                  const std::vector<TrainExample>& examples, const TrainHyper& hyper);

// Scores every key against the window; highest first, ties by smaller key.
std::vector<KnowledgeItem> top_k(const FusionParams& params, const Featurizer& featurizer,
                                 const KnowledgeBase& kb, const Matrix& window_vecs,
                                 std::size_t k);

struct LabeledWindow {
    std::vector<std::string> tokens;
    std::vector<std::string> true_keys;
};

// Fraction of true keys found in their window's top-k list.
double eval_recall(const FusionParams& params, const Featurizer& featurizer,
                   const std::vector<LabeledWindow>& windows, const KnowledgeBase& kb,
                   std::size_t k);

// Positives are words drawn from each window; negatives are words drawn from
// other windows that the window does not contain.
std::vector<TrainExample> make_train_examples(const std::vector<std::vector<std::string>>& windows,
                                              std::size_t positives_per_window,
                                              std::size_t negatives_per_positive,
                                              std::uint64_t seed);

// Retrieval as seen by the agent loop.
class Retriever {
public:
    virtual ~Retriever() = default;
    virtual std::vector<KnowledgeItem> retrieve(const StreamWindow& window, std::size_t k) = 0;
};

class FusionRetriever : public Retriever {
public:
    FusionRetriever(FusionParams params, FeatureConfig cfg, KnowledgeBase kb);

    std::vector<KnowledgeItem> retrieve(const StreamWindow& window, std::size_t k) override;

private:
    FusionParams params_;
    Featurizer featurizer_;
    KnowledgeBase kb_;
    std::vector<Matrix> key_vecs_;
};

// Whether every whitespace token of key occurs as a contiguous run in tokens
// (ASCII case-insensitive).
bool window_mentions(const std::vector<std::string>& tokens, std::string_view key);

}  // namespace sist
