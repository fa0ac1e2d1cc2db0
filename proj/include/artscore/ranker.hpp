#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "artscore/core.hpp"
#include "artscore/dataset.hpp"
#include "artscore/image.hpp"
#include "artscore/serial.hpp"

namespace artscore {

// ---------------------------------------------------------------------------
// Scorer: a three-layer fully connected network, image -> scalar artness
// score. Rectifier hidden units, dropout on hidden activations in train mode.
// ---------------------------------------------------------------------------

enum class ScoreMode : std::uint8_t { Train = 0, Eval = 1 };

struct ScorerParams {
    std::vector<Matrix> weights;             // (hidden x in), (hidden x hidden), (1 x hidden)
    std::vector<std::vector<double>> biases;
    double dropout_rate = 0.5;

    std::size_t input_dim() const { return weights.empty() ? 0 : weights.front().cols; }
    std::size_t hidden_dim() const { return weights.empty() ? 0 : weights.front().rows; }

    void validate() const {
        if (weights.size() != 3 || biases.size() != 3)
            throw shape_error("ScorerParams: expected exactly three layers");
        if (weights[1].cols != weights[0].rows || weights[2].cols != weights[1].rows)
            throw shape_error("ScorerParams: layer widths do not chain");
        if (weights[2].rows != 1 || biases[2].size() != 1)
            throw shape_error("ScorerParams: output dimension must be 1");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
            throw config_error("ScorerParams: dropout rate must lie in [0, 1)");
        for (std::size_t i = 0; i < 3; ++i)
            if (!all_finite(weights[i].data) || !all_finite(biases[i]))
                throw shape_error("ScorerParams: non-finite parameter");
    }
};

// He-style init (Gaussian scaled by sqrt(2/fan-in)), zero biases.
inline ScorerParams make_scorer(std::size_t input_dim, std::size_t hidden,
                                double dropout_rate, std::uint64_t seed) {
    if (input_dim == 0 || hidden == 0) throw config_error("make_scorer: zero dimension");
    Rng rng(seed);
    ScorerParams p;
    p.dropout_rate = dropout_rate;
    const std::size_t dims[4] = {input_dim, hidden, hidden, 1};
    for (int l = 0; l < 3; ++l) {
        Matrix w(dims[l + 1], dims[l]);
        const double scale = std::sqrt(2.0 / static_cast<double>(dims[l]));
        for (double& v : w.data) v = rng.normal() * scale;
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(dims[l + 1], 0.0);
    }
    p.validate();
    return p;
}

struct ScorerCache {
    std::vector<double> input;
    std::vector<double> pre1, act1, mask1;
    std::vector<double> pre2, act2, mask2;
    double output = 0.0;
};

namespace detail {

// Inverted dropout: keep with probability 1-p and scale by 1/(1-p), so eval
// mode needs no rescaling. Masks are stored as the applied scale factors.
inline void relu_dropout(const std::vector<double>& pre, std::vector<double>& act,
                         std::vector<double>& mask, double p, bool train, Rng* rng) {
    act.resize(pre.size());
    mask.assign(pre.size(), 1.0);
    const bool drop = train && p > 0.0;
    const double keep_scale = drop ? 1.0 / (1.0 - p) : 1.0;
    for (std::size_t i = 0; i < pre.size(); ++i) {
        if (drop) mask[i] = (rng->uniform() < p) ? 0.0 : keep_scale;
        act[i] = (pre[i] > 0.0 ? pre[i] : 0.0) * mask[i];
    }
}

inline double scorer_forward(const ScorerParams& p, const std::vector<double>& input,
                             bool train, Rng* rng, ScorerCache& cache) {
    if (input.size() != p.input_dim())
        throw shape_error("score: image size " + std::to_string(input.size()) +
                          " does not match scorer input " + std::to_string(p.input_dim()));
    cache.input = input;
    matvec(p.weights[0], cache.input, p.biases[0], cache.pre1);
    relu_dropout(cache.pre1, cache.act1, cache.mask1, p.dropout_rate, train, rng);
    matvec(p.weights[1], cache.act1, p.biases[1], cache.pre2);
    relu_dropout(cache.pre2, cache.act2, cache.mask2, p.dropout_rate, train, rng);
    std::vector<double> out;
    matvec(p.weights[2], cache.act2, p.biases[2], out);
    cache.output = out[0];
    return cache.output;
}

}  // namespace detail

struct ScorerGrads {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;

    static ScorerGrads zeros_like(const ScorerParams& p) {
        ScorerGrads g;
        for (std::size_t i = 0; i < p.weights.size(); ++i) {
            g.weights.emplace_back(p.weights[i].rows, p.weights[i].cols);
            g.biases.emplace_back(p.biases[i].size(), 0.0);
        }
        return g;
    }
};

// Accumulates d(upstream * score)/d(params) for the forward pass recorded in
// the cache; upstream is dL/d(score).
inline void scorer_backward(const ScorerParams& p, const ScorerCache& cache, double upstream,
                            ScorerGrads& grads) {
    std::vector<double> d_out(1, upstream);
    accumulate_outer(d_out, cache.act2, grads.weights[2], grads.biases[2]);
    std::vector<double> d_act2;
    matvec_transposed(p.weights[2], d_out, d_act2);
    for (std::size_t i = 0; i < d_act2.size(); ++i)
        d_act2[i] *= cache.mask2[i] * (cache.pre2[i] > 0.0 ? 1.0 : 0.0);
    accumulate_outer(d_act2, cache.act1, grads.weights[1], grads.biases[1]);
    std::vector<double> d_act1;
    matvec_transposed(p.weights[1], d_act2, d_act1);
    for (std::size_t i = 0; i < d_act1.size(); ++i)
        d_act1[i] *= cache.mask1[i] * (cache.pre1[i] > 0.0 ? 1.0 : 0.0);
    accumulate_outer(d_act1, cache.input, grads.weights[0], grads.biases[0]);
}

// Forward pass on an image. Train mode applies seeded dropout; eval mode is
// deterministic and ignores the seed.
inline double score(const ScorerParams& params, const ImageGrid& img, ScoreMode mode,
                    std::uint64_t seed = 0) {
    params.validate();
    ScorerCache cache;
    Rng rng(seed);
    return detail::scorer_forward(params, img.values, mode == ScoreMode::Train, &rng, cache);
}

// ---------------------------------------------------------------------------
// Losses. `ranking` is the best-first permutation: ranking[i] holds the index
// of the i-th most artistic item.
// ---------------------------------------------------------------------------

inline void check_permutation(const std::vector<std::size_t>& ranking, std::size_t n) {
    if (ranking.size() != n) throw config_error("ranking length does not match scores");
    std::vector<bool> seen(n, false);
    for (std::size_t r : ranking) {
        if (r >= n || seen[r]) throw config_error("ranking is not a permutation");
        seen[r] = true;
    }
}

namespace detail {

// Log-sum-exp over every suffix of the best-first ordering, computed back to
// front with running max rescaling.
inline std::vector<double> suffix_logsumexp(const std::vector<double>& scores,
                                            const std::vector<std::size_t>& ranking) {
    const std::size_t n = ranking.size();
    std::vector<double> lse(n);
    double m = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (std::size_t i = n; i-- > 0;) {
        const double s = scores[ranking[i]];
        if (s > m) {
            sum = sum * std::exp(m - s) + 1.0;  // exp(-inf) == 0 on the first item
            m = s;
        } else {
            sum += std::exp(s - m);
        }
        lse[i] = m + std::log(sum);
    }
    return lse;
}

}  // namespace detail

// Negative log-likelihood of the given permutation under a Plackett-Luce
// model over the scores. Non-negative; zero only for n == 1 or in the
// degenerate separation limit.
inline double listmle_loss(const std::vector<double>& scores,
                           const std::vector<std::size_t>& ranking) {
    if (scores.empty()) throw config_error("listmle_loss: empty score list");
    check_permutation(ranking, scores.size());
    const auto lse = detail::suffix_logsumexp(scores, ranking);
    double loss = 0.0;
    for (std::size_t i = 0; i < ranking.size(); ++i) loss += lse[i] - scores[ranking[i]];
    return loss;
}

// Analytic gradient: d/ds_j = sum over the suffixes containing j of j's
// softmax weight, minus 1 for j's own position.
inline std::vector<double> listmle_grad(const std::vector<double>& scores,
                                        const std::vector<std::size_t>& ranking) {
    if (scores.empty()) throw config_error("listmle_grad: empty score list");
    check_permutation(ranking, scores.size());
    const std::size_t n = scores.size();
    const auto lse = detail::suffix_logsumexp(scores, ranking);
    std::vector<double> grad(n, 0.0);
    for (std::size_t pos = 0; pos < n; ++pos) {
        const std::size_t j = ranking[pos];
        double acc = 0.0;
        for (std::size_t i = 0; i <= pos; ++i) acc += std::exp(scores[j] - lse[i]);
        grad[j] = acc - 1.0;
    }
    return grad;
}

// Ablation objective: MSE against rank targets normalized to [0, 1]
// (rank r -> r/(n-1); a single item gets target 0).
inline double mse_rank_loss(const std::vector<double>& scores,
                            const std::vector<std::size_t>& ranking) {
    if (scores.empty()) throw config_error("mse_rank_loss: empty score list");
    check_permutation(ranking, scores.size());
    const std::size_t n = scores.size();
    double loss = 0.0;
    for (std::size_t pos = 0; pos < n; ++pos) {
        const double target =
            n == 1 ? 0.0
                   : static_cast<double>(n - 1 - pos) / static_cast<double>(n - 1);
        const double d = scores[ranking[pos]] - target;
        loss += d * d;
    }
    return loss / static_cast<double>(n);
}

inline std::vector<double> mse_rank_grad(const std::vector<double>& scores,
                                         const std::vector<std::size_t>& ranking) {
    if (scores.empty()) throw config_error("mse_rank_grad: empty score list");
    check_permutation(ranking, scores.size());
    const std::size_t n = scores.size();
    std::vector<double> grad(n, 0.0);
    for (std::size_t pos = 0; pos < n; ++pos) {
        const double target =
            n == 1 ? 0.0
                   : static_cast<double>(n - 1 - pos) / static_cast<double>(n - 1);
        grad[ranking[pos]] = 2.0 * (scores[ranking[pos]] - target) / static_cast<double>(n);
    }
    return grad;
}

// ---------------------------------------------------------------------------
// Augmentations. Neither touches rank labels.
// ---------------------------------------------------------------------------

struct SwapStats {
    std::size_t swapped = 0;
    bool single_sequence_noop = false;
};

// Cross-sequence swap: with the given probability, one uniformly chosen
// position per sequence is replaced by a donor sequence's image at the same
// rank. Donor images are read from the incoming batch, so every swapped
// sequence receives exactly one foreign image.
inline SwapStats swap_augment(std::vector<RankedSequence>& batch, double probability,
                              std::uint64_t seed) {
    if (!(probability >= 0.0 && probability <= 1.0))
        throw config_error("swap_augment: probability must lie in [0, 1]");
    SwapStats stats;
    if (batch.size() < 2) {
        stats.single_sequence_noop = true;
        return stats;
    }
    const std::size_t n = batch.front().size();
    for (const auto& seq : batch)
        if (seq.size() != n)
            throw shape_error("swap_augment: sequences must share one length");

    const std::vector<RankedSequence> sources = batch;
    Rng rng(seed);
    for (std::size_t si = 0; si < batch.size(); ++si) {
        if (!rng.bernoulli(probability)) continue;
        const std::size_t pos = static_cast<std::size_t>(rng.below(n));
        std::size_t donor = static_cast<std::size_t>(rng.below(batch.size() - 1));
        if (donor >= si) ++donor;
        const std::size_t rank = batch[si].ranks[pos];
        // Donor position holding the same rank.
        const auto& donor_ranks = sources[donor].ranks;
        const std::size_t dpos = static_cast<std::size_t>(
            std::find(donor_ranks.begin(), donor_ranks.end(), rank) - donor_ranks.begin());
        batch[si].images[pos] = sources[donor].images[dpos];
        ++stats.swapped;
    }
    return stats;
}

struct AugmentFlags {
    bool flip = false;
    bool rotation = false;
};

// Seeded per-image horizontal flip (p = 0.5) and quarter-turn rotation
// (uniform over the four orientations).
inline void geometric_augment(RankedSequence& seq, AugmentFlags flags, std::uint64_t seed) {
    if (!flags.flip && !flags.rotation) return;
    Rng rng(seed);
    for (auto& img : seq.images) {
        if (flags.rotation && img.height != img.width)
            throw config_error("geometric_augment: rotation requires square images");
        if (flags.flip && rng.bernoulli(0.5)) img = flip_horizontal(img);
        if (flags.rotation) {
            const unsigned q = static_cast<unsigned>(rng.below(4));
            if (q != 0) img = rotate_quarters(img, q);
        }
    }
}

// ---------------------------------------------------------------------------
// AdamW with decoupled weight decay, per parameter tensor.
// ---------------------------------------------------------------------------

struct AdamWConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
};

struct AdamWState {
    std::uint64_t step = 0;
    std::vector<double> m, v;
};

inline void adamw_step(std::vector<double>& param, const std::vector<double>& grad,
                       AdamWState& state, const AdamWConfig& cfg) {
    if (param.size() != grad.size()) throw shape_error("adamw_step: size mismatch");
    if (!all_finite(grad))
        throw divergence_error("adamw_step: non-finite gradient at step " +
                               std::to_string(state.step + 1));
    if (state.m.empty()) {
        state.m.assign(param.size(), 0.0);
        state.v.assign(param.size(), 0.0);
    }
    if (state.m.size() != param.size()) throw shape_error("adamw_step: stale state");
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        param[i] -=
            cfg.learning_rate * (m_hat / (std::sqrt(v_hat) + cfg.epsilon) +
                                 cfg.weight_decay * param[i]);
    }
}

// ---------------------------------------------------------------------------
// NDCG with linear gain and log2 position discount, untruncated. Relevance of
// rank r is r (most artistic highest). All-zero relevance is defined as 1.
// ---------------------------------------------------------------------------

inline double ndcg(const std::vector<double>& scores, const std::vector<double>& relevance) {
    if (scores.empty() || scores.size() != relevance.size())
        throw shape_error("ndcg: need equally sized non-empty inputs");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    double dcg = 0.0;
    for (std::size_t p = 0; p < n; ++p)
        dcg += relevance[order[p]] / std::log2(static_cast<double>(p) + 2.0);
    std::vector<double> ideal = relevance;
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t p = 0; p < n; ++p)
        idcg += ideal[p] / std::log2(static_cast<double>(p) + 2.0);
    if (idcg == 0.0) return 1.0;
    return dcg / idcg;
}

inline double sequence_ndcg(const ScorerParams& params, const RankedSequence& seq) {
    std::vector<double> scores(seq.size()), relevance(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
        scores[i] = score(params, seq.images[i], ScoreMode::Eval);
        relevance[i] = static_cast<double>(seq.ranks[i]);
    }
    return ndcg(scores, relevance);
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

enum class LossKind : std::uint8_t { ListMle = 0, Mse = 1 };

inline std::string loss_kind_name(LossKind k) {
    return k == LossKind::ListMle ? "listmle" : "mse";
}

inline LossKind loss_kind_from_name(const std::string& s) {
    if (s == "listmle") return LossKind::ListMle;
    if (s == "mse") return LossKind::Mse;
    throw config_error("loss must be listmle or mse");
}

struct TrainConfig {
    double learning_rate = 1e-4;
    double weight_decay = 0.01;
    std::size_t batch_sequences = 16;
    std::size_t epochs = 10;
    double swap_probability = 0.5;
    LossKind loss_kind = LossKind::ListMle;
    std::uint64_t seed = 0;
    bool flip = true;
    bool rotation = true;
    double dropout_rate = 0.5;
    std::size_t hidden_width = 64;

    void validate() const {
        if (learning_rate <= 0.0) throw config_error("train config: learning_rate must be > 0");
        if (weight_decay < 0.0) throw config_error("train config: negative weight_decay");
        if (batch_sequences == 0) throw config_error("train config: batch_sequences must be > 0");
        if (epochs == 0) throw config_error("train config: epochs must be > 0");
        if (!(swap_probability >= 0.0 && swap_probability <= 1.0))
            throw config_error("train config: swap_probability must lie in [0, 1]");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
            throw config_error("train config: dropout_rate must lie in [0, 1)");
        if (hidden_width == 0) throw config_error("train config: hidden_width must be > 0");
    }

    static TrainConfig from_kv(const KvFile& kv) {
        TrainConfig cfg;
        cfg.learning_rate = kv.get_double("learning_rate", cfg.learning_rate);
        cfg.weight_decay = kv.get_double("weight_decay", cfg.weight_decay);
        cfg.batch_sequences = kv.get_size("batch_sequences", cfg.batch_sequences);
        cfg.epochs = kv.get_size("epochs", cfg.epochs);
        cfg.swap_probability = kv.get_double("swap_probability", cfg.swap_probability);
        cfg.loss_kind = loss_kind_from_name(kv.get_or("loss", "listmle"));
        cfg.seed = kv.get_u64("seed", cfg.seed);
        cfg.flip = kv.get_bool("flip", cfg.flip);
        cfg.rotation = kv.get_bool("rotation", cfg.rotation);
        cfg.dropout_rate = kv.get_double("dropout_rate", cfg.dropout_rate);
        cfg.hidden_width = kv.get_size("hidden_width", cfg.hidden_width);
        cfg.validate();
        return cfg;
    }
};

struct TrainReport {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::vector<double> val_ndcg;
    std::size_t best_epoch = 0;  // index into the per-epoch vectors
    std::string checkpoint_path;

    std::string to_text() const {
        KvFile kv;
        kv.set("epochs", std::to_string(train_loss.size()));
        for (std::size_t e = 0; e < train_loss.size(); ++e) {
            const std::string p = "epoch." + std::to_string(e) + ".";
            kv.set(p + "train_loss", format_double(train_loss[e]));
            kv.set(p + "val_loss", format_double(val_loss[e]));
            kv.set(p + "val_ndcg", format_double(val_ndcg[e]));
        }
        kv.set("best_epoch", std::to_string(best_epoch));
        if (!checkpoint_path.empty()) kv.set("checkpoint", checkpoint_path);
        return kv.to_string();
    }
};

struct TrainResult {
    ScorerParams params;
    TrainReport report;
};

namespace detail {

// Best-first permutation: position i holds the index of the item with rank
// n-1-i (the i-th most artistic).
inline std::vector<std::size_t> best_first_ranking(const RankedSequence& seq) {
    const std::size_t n = seq.size();
    std::vector<std::size_t> ranking(n);
    for (std::size_t j = 0; j < n; ++j) ranking[n - 1 - seq.ranks[j]] = j;
    return ranking;
}

struct ScorerOptimizer {
    AdamWConfig cfg;
    std::vector<AdamWState> w_states, b_states;

    explicit ScorerOptimizer(const TrainConfig& tc) {
        cfg.learning_rate = tc.learning_rate;
        cfg.weight_decay = tc.weight_decay;
        w_states.resize(3);
        b_states.resize(3);
    }

    void step(ScorerParams& params, const ScorerGrads& grads) {
        for (std::size_t l = 0; l < 3; ++l) {
            adamw_step(params.weights[l].data, grads.weights[l].data, w_states[l], cfg);
            adamw_step(params.biases[l], grads.biases[l], b_states[l], cfg);
        }
    }
};

inline double sequence_loss_eval(const ScorerParams& params, const RankedSequence& seq,
                                 LossKind kind) {
    std::vector<double> scores(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i)
        scores[i] = score(params, seq.images[i], ScoreMode::Eval);
    const auto ranking = best_first_ranking(seq);
    return kind == LossKind::ListMle ? listmle_loss(scores, ranking)
                                     : mse_rank_loss(scores, ranking);
}

}  // namespace detail

// Minibatch training over ranked sequences: swap augmentation first, then
// per-image geometric augmentation, then the listwise (or MSE) objective.
// Returns the parameters from the epoch with the lowest validation loss.
// Fully deterministic under config.seed; single-threaded by contract.
inline TrainResult train(const std::vector<RankedSequence>& train_set,
                         const std::vector<RankedSequence>& val_set, const TrainConfig& config) {
    config.validate();
    if (train_set.empty() || val_set.empty())
        throw config_error("train: need non-empty train and validation splits");
    for (const auto& seq : train_set) seq.validate();
    for (const auto& seq : val_set) seq.validate();
    const std::size_t input_dim = train_set.front().images.front().size();

    TrainResult result;
    result.params = make_scorer(input_dim, config.hidden_width, config.dropout_rate,
                                mix_seed(config.seed, 1));
    detail::ScorerOptimizer opt(config);

    ScorerParams best_params = result.params;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;

    std::vector<std::size_t> indices(train_set.size());
    std::iota(indices.begin(), indices.end(), 0);
    const AugmentFlags flags{config.flip, config.rotation};

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        Rng rng(mix_seed(config.seed, 0xE000 + epoch));
        for (std::size_t i = indices.size(); i > 1; --i)
            std::swap(indices[i - 1], indices[rng.below(i)]);

        double epoch_loss = 0.0;
        std::size_t counted = 0;
        for (std::size_t start = 0; start < indices.size();
             start += config.batch_sequences) {
            const std::size_t stop =
                std::min(indices.size(), start + config.batch_sequences);
            std::vector<RankedSequence> batch;
            batch.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) batch.push_back(train_set[indices[i]]);

            if (config.swap_probability > 0.0 && batch.size() >= 2)
                swap_augment(batch, config.swap_probability, rng.next_u64());
            if (flags.flip || flags.rotation)
                for (auto& seq : batch) geometric_augment(seq, flags, rng.next_u64());

            ScorerGrads grads = ScorerGrads::zeros_like(result.params);
            const double inv_batch = 1.0 / static_cast<double>(batch.size());
            double batch_loss = 0.0;
            for (const auto& seq : batch) {
                std::vector<ScorerCache> caches(seq.size());
                std::vector<double> scores(seq.size());
                for (std::size_t i = 0; i < seq.size(); ++i) {
                    Rng drop_rng(rng.next_u64());
                    scores[i] = detail::scorer_forward(result.params, seq.images[i].values,
                                                       true, &drop_rng, caches[i]);
                }
                const auto ranking = detail::best_first_ranking(seq);
                double loss;
                std::vector<double> dscores;
                if (config.loss_kind == LossKind::ListMle) {
                    loss = listmle_loss(scores, ranking);
                    dscores = listmle_grad(scores, ranking);
                } else {
                    loss = mse_rank_loss(scores, ranking);
                    dscores = mse_rank_grad(scores, ranking);
                }
                if (!std::isfinite(loss))
                    throw divergence_error("train: non-finite loss at epoch " +
                                           std::to_string(epoch) + ", batch " +
                                           std::to_string(start / config.batch_sequences));
                batch_loss += loss;
                for (std::size_t i = 0; i < seq.size(); ++i)
                    scorer_backward(result.params, caches[i], dscores[i] * inv_batch, grads);
            }
            epoch_loss += batch_loss;
            counted += batch.size();
            opt.step(result.params, grads);
        }

        double val_loss = 0.0;
        double val_ndcg_sum = 0.0;
        for (const auto& seq : val_set) {
            val_loss += detail::sequence_loss_eval(result.params, seq, config.loss_kind);
            val_ndcg_sum += sequence_ndcg(result.params, seq);
        }
        val_loss /= static_cast<double>(val_set.size());
        val_ndcg_sum /= static_cast<double>(val_set.size());

        result.report.train_loss.push_back(epoch_loss / static_cast<double>(counted));
        result.report.val_loss.push_back(val_loss);
        result.report.val_ndcg.push_back(val_ndcg_sum);
        if (val_loss < best_val) {
            best_val = val_loss;
            best_epoch = epoch;
            best_params = result.params;
        }
    }

    result.params = best_params;
    result.report.best_epoch = best_epoch;
    return result;
}

}  // namespace artscore
