#include "sist/retriever.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "sist/error.hpp"
#include "sist/rng.hpp"

namespace sist {

// ---------------------------------------------------------------- knowledge base

KnowledgeBase::KnowledgeBase(std::vector<KnowledgeItem> items) {
    for (auto& item : items) add(std::move(item));
}

void KnowledgeBase::add(KnowledgeItem item) {
    if (item.key.empty()) throw DataError(fmt::format("knowledge item {} has an empty key", items_.size()));
    if (key_index_.count(item.key))
        throw DataError(fmt::format("duplicate knowledge key '{}'", item.key));
    key_index_.emplace(item.key, items_.size());
    items_.push_back(std::move(item));
}

const KnowledgeItem* KnowledgeBase::find(std::string_view key) const {
    auto it = key_index_.find(key);
    return it == key_index_.end() ? nullptr : &items_[it->second];
}

// ---------------------------------------------------------------- features

void validate_feature_config(const FeatureConfig& cfg) {
    if (cfg.n_gram < 1) throw DataError("n_gram must be at least 1");
    if (cfg.dim < 1 || cfg.heads < 1) throw DataError("dim and heads must be positive");
    if (cfg.dim % cfg.heads != 0)
        throw DataError(fmt::format("dim {} is not divisible by heads {}", cfg.dim, cfg.heads));
    if (cfg.hash_buckets < cfg.dim)
        throw DataError(fmt::format("hash_buckets {} must be at least dim {}", cfg.hash_buckets, cfg.dim));
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

std::vector<std::string> split_ws(std::string_view text) {
    return tokenize_target(text, Tokenization::whitespace);
}

}  // namespace

std::vector<std::string> char_ngrams(std::string_view token, std::size_t n) {
    std::vector<std::string> chars{"^"};
    for (auto& c : utf8_chars(token)) chars.push_back(std::move(c));
    chars.emplace_back("$");
    std::vector<std::string> grams;
    if (chars.size() <= n) {
        grams.push_back(std::accumulate(chars.begin(), chars.end(), std::string{}));
        return grams;
    }
    for (std::size_t i = 0; i + n <= chars.size(); ++i) {
        std::string g;
        for (std::size_t k = i; k < i + n; ++k) g += chars[k];
        grams.push_back(std::move(g));
    }
    return grams;
}

Featurizer::Featurizer(FeatureConfig cfg) : cfg_(cfg) {
    validate_feature_config(cfg_);
    const auto buckets = static_cast<Eigen::Index>(cfg_.hash_buckets);
    const auto d = static_cast<Eigen::Index>(cfg_.dim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.dim));
    projection_.resize(buckets, d);
    Rng rng(cfg_.projection_seed);
    for (Eigen::Index r = 0; r < buckets; ++r) {
        std::uint64_t bits = 0;
        for (Eigen::Index c = 0; c < d; ++c) {
            if (c % 64 == 0) bits = rng.next_u64();
            projection_(r, c) = (bits & 1) ? scale : -scale;
            bits >>= 1;
        }
    }
}

Matrix Featurizer::encode(const std::vector<std::string>& tokens) const {
    if (tokens.empty()) throw DataError("nothing to encode");
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(tokens.size()),
                              static_cast<Eigen::Index>(cfg_.dim));
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        for (const auto& g : char_ngrams(ascii_lower(tokens[i]), cfg_.n_gram)) {
            const auto bucket = static_cast<Eigen::Index>(fnv1a64(g) % cfg_.hash_buckets);
            out.row(static_cast<Eigen::Index>(i)) += projection_.row(bucket);
        }
    }
    return out;
}

Matrix Featurizer::encode(const std::vector<TimedToken>& tokens) const {
    std::vector<std::string> texts;
    texts.reserve(tokens.size());
    for (const auto& t : tokens) texts.push_back(t.text);
    return encode(texts);
}

Matrix Featurizer::encode_text(std::string_view text) const { return encode(split_ws(text)); }

Matrix featurize(const std::vector<std::string>& tokens, const FeatureConfig& cfg) {
    return Featurizer(cfg).encode(tokens);
}

// ---------------------------------------------------------------- fusion scorer

FusionParams FusionParams::zeros(std::size_t dim) {
    const auto d = static_cast<Eigen::Index>(dim);
    return {Matrix::Zero(d, d), Matrix::Zero(d, d), Matrix::Zero(d, d), Vector::Zero(d), 0.0};
}

FusionParams init_params(const FeatureConfig& cfg, std::uint64_t seed, const InitOptions& opts) {
    validate_feature_config(cfg);
    auto p = FusionParams::zeros(cfg.dim);
    Rng rng(seed);
    const double s = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
    const bool identity = opts.qk_scale != 0.0;
    const double noise = identity ? opts.noise * s : s;
    for (Matrix* m : {&p.w_q, &p.w_k, &p.w_v})
        for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = noise * rng.normal();
    if (identity) {
        const auto eye = Matrix::Identity(p.w_q.rows(), p.w_q.cols());
        p.w_q += opts.qk_scale * eye;
        p.w_k += opts.qk_scale * eye;
        p.w_v += eye;
    }
    for (Eigen::Index i = 0; i < p.w.size(); ++i) p.w[i] = opts.w_scale * rng.normal();
    return p;
}

void validate_params(const FusionParams& p, const FeatureConfig& cfg) {
    const auto d = static_cast<Eigen::Index>(cfg.dim);
    for (const Matrix* m : {&p.w_q, &p.w_k, &p.w_v})
        if (m->rows() != d || m->cols() != d)
            throw DataError(fmt::format("projection is {}x{}, expected {}x{}", m->rows(), m->cols(), d, d));
    if (p.w.size() != d) throw DataError(fmt::format("w has {} entries, expected {}", p.w.size(), d));
    const bool finite = p.w_q.allFinite() && p.w_k.allFinite() && p.w_v.allFinite() &&
                        p.w.allFinite() && std::isfinite(p.b);
    if (!finite) throw DataError("fusion parameters contain non-finite entries");
}

namespace {

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void softmax_rows(Matrix& s) {
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
        const double mx = s.row(r).maxCoeff();
        s.row(r) = (s.row(r).array() - mx).exp();
        s.row(r) /= s.row(r).sum();
    }
}

struct Forward {
    Matrix q;                   // m x d
    std::vector<Matrix> attn;   // per head, m x L
    Matrix h;                   // m x d
    Vector pooled;              // d
    std::vector<Eigen::Index> argmax_rows;  // max pooling only
    double logit = 0.0;
};

void check_shapes(const FusionParams& params, const Matrix& key_vecs, const Matrix& window_vecs) {
    const auto d = static_cast<Eigen::Index>(params.dim());
    if (key_vecs.rows() < 1 || window_vecs.rows() < 1) throw DataError("key and window must be nonempty");
    if (key_vecs.cols() != d || window_vecs.cols() != d || params.w_q.rows() != d)
        throw DataError(fmt::format("shape mismatch: key {} cols, window {} cols, params dim {}",
                                    key_vecs.cols(), window_vecs.cols(), d));
}

Forward forward(const FusionParams& params, const FeatureConfig& cfg, const Matrix& key_vecs,
                const EncodedWindow& win) {
    const auto d = static_cast<Eigen::Index>(params.dim());
    const auto heads = static_cast<Eigen::Index>(cfg.heads);
    if (heads < 1 || d % heads != 0) throw DataError("dim must be divisible by heads");
    const Eigen::Index dh = d / heads;
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Forward f;
    f.q = key_vecs * params.w_q;
    f.h.resize(key_vecs.rows(), d);
    for (Eigen::Index g = 0; g < heads; ++g) {
        const Eigen::Index o = g * dh;
        Matrix a = f.q.middleCols(o, dh) * win.keys.middleCols(o, dh).transpose() * inv_scale;
        softmax_rows(a);
        f.h.middleCols(o, dh) = a * win.values.middleCols(o, dh);
        f.attn.push_back(std::move(a));
    }
    if (cfg.pooling == Pooling::mean) {
        f.pooled = f.h.colwise().mean().transpose();
    } else {
        f.pooled.resize(d);
        f.argmax_rows.resize(static_cast<std::size_t>(d));
        for (Eigen::Index c = 0; c < d; ++c)
            f.pooled[c] = f.h.col(c).maxCoeff(&f.argmax_rows[static_cast<std::size_t>(c)]);
    }
    f.logit = params.w.dot(f.pooled) + params.b;
    return f;
}

}  // namespace

EncodedWindow encode_window(const FusionParams& params, const Matrix& window_vecs) {
    return {window_vecs * params.w_k, window_vecs * params.w_v};
}

double score_encoded(const FusionParams& params, const FeatureConfig& cfg, const Matrix& key_vecs,
                     const EncodedWindow& window) {
    return sigmoid(forward(params, cfg, key_vecs, window).logit);
}

double score(const FusionParams& params, const FeatureConfig& cfg, const Matrix& key_vecs,
             const Matrix& window_vecs) {
    check_shapes(params, key_vecs, window_vecs);
    return score_encoded(params, cfg, key_vecs, encode_window(params, window_vecs));
}

BceResult bce_loss(double p, int label) {
    if (label != 0 && label != 1) throw DataError(fmt::format("label {} is not 0 or 1", label));
    const double pc = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
    return {label == 1 ? -std::log(pc) : -std::log(1.0 - pc), pc - label};
}

double loss_and_grad(const FusionParams& params, const FeatureConfig& cfg, const Matrix& key_vecs,
                     const Matrix& window_vecs, int label, FusionGrads* grads) {
    check_shapes(params, key_vecs, window_vecs);
    const auto win = encode_window(params, window_vecs);
    const auto f = forward(params, cfg, key_vecs, win);
    // Logit form of BCE: exact, and its derivative is sigmoid(z) - label.
    const double loss = softplus(f.logit) - label * f.logit;
    if (!grads) return loss;

    const double dz = sigmoid(f.logit) - label;
    const auto d = static_cast<Eigen::Index>(params.dim());
    const auto m = key_vecs.rows();
    const Eigen::Index dh = d / static_cast<Eigen::Index>(cfg.heads);
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    grads->w = dz * f.pooled;
    grads->b = dz;
    const Vector dpooled = dz * params.w;

    Matrix dh_all = Matrix::Zero(m, d);
    if (cfg.pooling == Pooling::mean) {
        dh_all.rowwise() = dpooled.transpose() / static_cast<double>(m);
    } else {
        for (Eigen::Index c = 0; c < d; ++c) dh_all(f.argmax_rows[static_cast<std::size_t>(c)], c) = dpooled[c];
    }

    Matrix dq(m, d), dk(window_vecs.rows(), d), dv(window_vecs.rows(), d);
    for (std::size_t g = 0; g < f.attn.size(); ++g) {
        const Eigen::Index o = static_cast<Eigen::Index>(g) * dh;
        const Matrix& a = f.attn[g];
        const auto dhg = dh_all.middleCols(o, dh);
        const Matrix da = dhg * win.values.middleCols(o, dh).transpose();
        dv.middleCols(o, dh) = a.transpose() * dhg;
        const Vector row_dot = (da.array() * a.array()).rowwise().sum();
        Matrix ds = a.array() * (da.colwise() - row_dot).array();
        ds *= inv_scale;
        dq.middleCols(o, dh) = ds * win.keys.middleCols(o, dh);
        dk.middleCols(o, dh) = ds.transpose() * f.q.middleCols(o, dh);
    }
    grads->w_q = key_vecs.transpose() * dq;
    grads->w_k = window_vecs.transpose() * dk;
    grads->w_v = window_vecs.transpose() * dv;
    return loss;
}

// ---------------------------------------------------------------- training

TrainResult train(const FusionParams& init, const Featurizer& featurizer,
                  const std::vector<TrainExample>& examples, const TrainHyper& hyper) {
    const auto& cfg = featurizer.config();
    validate_params(init, cfg);
    if (examples.empty()) throw DataError("no training examples");
    bool has_pos = false, has_neg = false;
    for (const auto& e : examples) {
        if (e.label != 0 && e.label != 1) throw DataError(fmt::format("label {} is not 0 or 1", e.label));
        (e.label == 1 ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg) throw DataError("both classes required");
    if (hyper.batch < 1 || hyper.epochs < 1 || !(hyper.lr > 0.0))
        throw DataError("lr, epochs and batch must be positive");

    std::vector<Matrix> keys, windows;
    keys.reserve(examples.size());
    windows.reserve(examples.size());
    for (const auto& e : examples) {
        keys.push_back(featurizer.encode_text(e.key));
        windows.push_back(featurizer.encode(e.window_tokens));
    }

    auto mean_loss = [&](const FusionParams& p) {
        double total = 0.0;
        for (std::size_t i = 0; i < examples.size(); ++i)
            total += loss_and_grad(p, cfg, keys[i], windows[i], examples[i].label, nullptr);
        return total / static_cast<double>(examples.size());
    };

    TrainResult out{init, {}};
    auto& p = out.params;
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(hyper.seed);
    FusionGrads g, acc;
    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += hyper.batch) {
            const std::size_t end = std::min(order.size(), start + hyper.batch);
            acc = {Matrix::Zero(p.w_q.rows(), p.w_q.cols()), Matrix::Zero(p.w_k.rows(), p.w_k.cols()),
                   Matrix::Zero(p.w_v.rows(), p.w_v.cols()), Vector::Zero(p.w.size()), 0.0};
            for (std::size_t i = start; i < end; ++i) {
                const auto idx = order[i];
                loss_and_grad(p, cfg, keys[idx], windows[idx], examples[idx].label, &g);
                acc.w_q += g.w_q;
                acc.w_k += g.w_k;
                acc.w_v += g.w_v;
                acc.w += g.w;
                acc.b += g.b;
            }
            const double step = hyper.lr / static_cast<double>(end - start);
            p.w_q -= step * acc.w_q;
            p.w_k -= step * acc.w_k;
            p.w_v -= step * acc.w_v;
            p.w -= step * acc.w;
            p.b -= step * acc.b;
        }
        const double loss = mean_loss(p);
        if (!std::isfinite(loss))
            throw DataError(fmt::format("training diverged at epoch {} (loss is NaN); use a smaller lr",
                                        epoch + 1));
        out.epoch_losses.push_back(loss);
    }
    return out;
}

std::vector<TrainExample> make_train_examples(const std::vector<std::vector<std::string>>& windows,
                                              std::size_t positives_per_window,
                                              std::size_t negatives_per_positive,
                                              std::uint64_t seed) {
    if (windows.size() < 2) throw DataError("need at least two windows to draw negatives");
    std::vector<std::vector<std::string>> lowered(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i)
        for (const auto& t : windows[i]) lowered[i].push_back(ascii_lower(t));

    Rng rng(seed);
    std::vector<TrainExample> out;
    for (std::size_t wi = 0; wi < windows.size(); ++wi) {
        const auto& win = windows[wi];
        if (win.empty()) continue;
        for (std::size_t p = 0; p < positives_per_window; ++p) {
            out.push_back({win, win[rng.below(win.size())], 1});
            std::size_t made = 0;
            // Bounded rejection sampling: a word shared by every window cannot be a negative.
            for (std::size_t tries = 0; made < negatives_per_positive && tries < 50 * negatives_per_positive; ++tries) {
                const auto other = rng.below(windows.size());
                if (other == wi || windows[other].empty()) continue;
                const auto& cand = windows[other][rng.below(windows[other].size())];
                const auto lc = ascii_lower(cand);
                if (std::find(lowered[wi].begin(), lowered[wi].end(), lc) != lowered[wi].end()) continue;
                out.push_back({win, cand, 0});
                ++made;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------- retrieval

namespace {

std::vector<KnowledgeItem> rank_keys(const FusionParams& params, const FeatureConfig& cfg,
                                     const KnowledgeBase& kb, const std::vector<Matrix>& key_vecs,
                                     const Matrix& window_vecs, std::size_t k) {
    if (k < 1) throw DataError("k must be at least 1");
    if (kb.empty()) return {};
    check_shapes(params, key_vecs.front(), window_vecs);
    const auto win = encode_window(params, window_vecs);
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(kb.size());
    for (std::size_t i = 0; i < kb.size(); ++i)
        scored.emplace_back(score_encoded(params, cfg, key_vecs[i], win), i);
    const auto& items = kb.items();
    auto better = [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return items[a.second].key < items[b.second].key;
    };
    const std::size_t n = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), better);
    std::vector<KnowledgeItem> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(items[scored[i].second]);
    return out;
}

std::vector<Matrix> encode_keys(const Featurizer& featurizer, const KnowledgeBase& kb) {
    std::vector<Matrix> keys;
    keys.reserve(kb.size());
    for (const auto& item : kb.items()) keys.push_back(featurizer.encode_text(item.key));
    return keys;
}

}  // namespace

std::vector<KnowledgeItem> top_k(const FusionParams& params, const Featurizer& featurizer,
                                 const KnowledgeBase& kb, const Matrix& window_vecs,
                                 std::size_t k) {
    if (kb.empty()) return {};
    return rank_keys(params, featurizer.config(), kb, encode_keys(featurizer, kb), window_vecs, k);
}

double eval_recall(const FusionParams& params, const Featurizer& featurizer,
                   const std::vector<LabeledWindow>& windows, const KnowledgeBase& kb,
                   std::size_t k) {
    if (windows.empty()) throw DataError("no labeled windows");
    const auto keys = encode_keys(featurizer, kb);
    std::size_t found = 0, total = 0;
    for (std::size_t w = 0; w < windows.size(); ++w) {
        const auto& lw = windows[w];
        if (lw.true_keys.empty()) throw DataError(fmt::format("window {} has no true key", w));
        for (const auto& key : lw.true_keys)
            if (!kb.find(key))
                throw DataError(fmt::format("true key '{}' of window {} is not in the knowledge base", key, w));
        const auto ranked = rank_keys(params, featurizer.config(), kb, keys, featurizer.encode(lw.tokens), k);
        for (const auto& key : lw.true_keys) {
            ++total;
            found += std::any_of(ranked.begin(), ranked.end(),
                                 [&](const KnowledgeItem& it) { return it.key == key; });
        }
    }
    return static_cast<double>(found) / static_cast<double>(total);
}

FusionRetriever::FusionRetriever(FusionParams params, FeatureConfig cfg, KnowledgeBase kb)
    : params_(std::move(params)), featurizer_(cfg), kb_(std::move(kb)) {
    validate_params(params_, cfg);
    key_vecs_ = encode_keys(featurizer_, kb_);
}

std::vector<KnowledgeItem> FusionRetriever::retrieve(const StreamWindow& window, std::size_t k) {
    if (window.tokens.empty() || kb_.empty()) return {};
    return rank_keys(params_, featurizer_.config(), kb_, key_vecs_, featurizer_.encode(window.tokens), k);
}

bool window_mentions(const std::vector<std::string>& tokens, std::string_view key) {
    const auto parts = split_ws(ascii_lower(key));
    if (parts.empty()) return false;
    std::vector<std::string> lowered;
    lowered.reserve(tokens.size());
    for (const auto& t : tokens) lowered.push_back(ascii_lower(t));
    if (std::search(lowered.begin(), lowered.end(), parts.begin(), parts.end()) != lowered.end())
        return true;
    // Unsegmented scripts: fall back to matching the joined text.
    const bool ascii = std::all_of(key.begin(), key.end(), [](char c) { return static_cast<unsigned char>(c) < 0x80; });
    if (ascii) return false;
    std::string joined;
    for (const auto& t : lowered) joined += strip_whitespace(t);
    return joined.find(strip_whitespace(ascii_lower(key))) != std::string::npos;
}

}  // namespace sist
