#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "artscore/core.hpp"
#include "artscore/image.hpp"
#include "artscore/style.hpp"

namespace artscore {

enum class Activation : std::uint8_t { Tanh = 0, Identity = 1 };

inline std::string activation_name(Activation a) {
    return a == Activation::Tanh ? "tanh" : "identity";
}

inline Activation activation_from_name(const std::string& name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "identity") return Activation::Identity;
    throw config_error("unknown activation tag: " + name);
}

// Architecture of a procedural image generator: a fully connected stack
// mapping a latent vector to an H x W x C grid. layer_widths includes the
// input width, so layer_widths = {16, 32, 768} describes two layers with
// weight shapes (32 x 16) and (768 x 32).
struct GeneratorSpec {
    std::size_t latent_dim = 16;
    std::vector<std::size_t> layer_widths;
    std::vector<Activation> activations;
    std::size_t height = 16;
    std::size_t width = 16;
    std::size_t channels = 3;
    std::uint64_t seed = 0;

    std::size_t layer_count() const {
        return layer_widths.empty() ? 0 : layer_widths.size() - 1;
    }

    std::size_t output_dim() const { return height * width * channels; }

    void validate() const {
        if (latent_dim == 0) throw config_error("GeneratorSpec: latent_dim must be positive");
        if (layer_widths.size() < 2)
            throw config_error("GeneratorSpec: need at least one layer");
        for (std::size_t w : layer_widths)
            if (w == 0) throw config_error("GeneratorSpec: zero layer width");
        if (layer_widths.front() != latent_dim)
            throw config_error("GeneratorSpec: layer_widths[0] must equal latent_dim");
        if (layer_widths.back() != output_dim())
            throw config_error("GeneratorSpec: final width must equal H*W*C");
        if (activations.size() != layer_count())
            throw config_error("GeneratorSpec: one activation tag per layer required");
        if (activations.back() != Activation::Tanh)
            throw config_error("GeneratorSpec: final activation must be tanh");
    }

    bool same_architecture(const GeneratorSpec& o) const {
        return latent_dim == o.latent_dim && layer_widths == o.layer_widths &&
               activations == o.activations && height == o.height && width == o.width &&
               channels == o.channels;
    }
};

// 8-layer default; the smallest stack where last-6 fusion and texture
// statistics are both meaningful.
inline GeneratorSpec default_generator_spec(std::uint64_t seed) {
    GeneratorSpec spec;
    spec.latent_dim = 16;
    spec.layer_widths = {16, 32, 48, 64, 96, 128, 192, 384, 768};
    spec.activations.assign(spec.layer_widths.size() - 1, Activation::Tanh);
    spec.height = 16;
    spec.width = 16;
    spec.channels = 3;
    spec.seed = seed;
    return spec;
}

struct GeneratorParams {
    GeneratorSpec spec;
    std::vector<Matrix> weights;               // layer i: widths[i+1] x widths[i]
    std::vector<std::vector<double>> biases;   // layer i: widths[i+1]

    std::size_t layer_count() const { return weights.size(); }

    void validate() const {
        spec.validate();
        if (weights.size() != spec.layer_count() || biases.size() != spec.layer_count())
            throw shape_error("GeneratorParams: layer count mismatch");
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (weights[i].rows != spec.layer_widths[i + 1] ||
                weights[i].cols != spec.layer_widths[i])
                throw shape_error("GeneratorParams: weight shape mismatch at layer " +
                                  std::to_string(i));
            if (biases[i].size() != spec.layer_widths[i + 1])
                throw shape_error("GeneratorParams: bias shape mismatch at layer " +
                                  std::to_string(i));
            if (!all_finite(weights[i].data) || !all_finite(biases[i]))
                throw shape_error("GeneratorParams: non-finite values at layer " +
                                  std::to_string(i));
        }
    }
};

struct LatentCode {
    std::vector<double> values;
};

inline LatentCode random_latent(const GeneratorSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    LatentCode z;
    z.values.resize(spec.latent_dim);
    for (double& v : z.values) v = rng.normal();
    return z;
}

// Seeded Gaussian init scaled by 1/sqrt(fan-in); biases start at zero.
// Deterministic function of the spec (including spec.seed).
inline GeneratorParams new_photoreal_generator(const GeneratorSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    GeneratorParams gen;
    gen.spec = spec;
    gen.weights.reserve(spec.layer_count());
    gen.biases.reserve(spec.layer_count());
    for (std::size_t i = 0; i < spec.layer_count(); ++i) {
        const std::size_t fan_in = spec.layer_widths[i];
        const std::size_t fan_out = spec.layer_widths[i + 1];
        Matrix w(fan_out, fan_in);
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (double& v : w.data) v = rng.normal() * scale;
        gen.weights.push_back(std::move(w));
        gen.biases.emplace_back(fan_out, 0.0);
    }
    return gen;
}

inline double apply_activation(Activation a, double x) {
    return a == Activation::Tanh ? std::tanh(x) : x;
}

struct ForwardCache {
    // activations[0] is the latent input; activations[i+1] the output of layer i.
    std::vector<std::vector<double>> activations;
};

inline void generator_forward(const GeneratorParams& gen, const std::vector<double>& z,
                              ForwardCache& cache) {
    if (z.size() != gen.spec.latent_dim)
        throw shape_error("generate: latent length " + std::to_string(z.size()) +
                          " does not match latent_dim " + std::to_string(gen.spec.latent_dim));
    cache.activations.assign(gen.layer_count() + 1, {});
    cache.activations[0] = z;
    std::vector<double> pre;
    for (std::size_t i = 0; i < gen.layer_count(); ++i) {
        matvec(gen.weights[i], cache.activations[i], gen.biases[i], pre);
        auto& out = cache.activations[i + 1];
        out.resize(pre.size());
        const Activation act = gen.spec.activations[i];
        for (std::size_t k = 0; k < pre.size(); ++k) out[k] = apply_activation(act, pre[k]);
    }
}

// Pure forward pass; output reshaped to (H, W, C), every value in [-1, 1].
inline ImageGrid generate(const GeneratorParams& gen, const LatentCode& z) {
    ForwardCache cache;
    generator_forward(gen, z.values, cache);
    ImageGrid img(gen.spec.height, gen.spec.width, gen.spec.channels);
    img.values = cache.activations.back();
    return img;
}

struct GeneratorGrads {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;

    static GeneratorGrads zeros_like(const GeneratorParams& gen) {
        GeneratorGrads g;
        g.weights.reserve(gen.layer_count());
        g.biases.reserve(gen.layer_count());
        for (std::size_t i = 0; i < gen.layer_count(); ++i) {
            g.weights.emplace_back(gen.weights[i].rows, gen.weights[i].cols);
            g.biases.emplace_back(gen.biases[i].size(), 0.0);
        }
        return g;
    }
};

// Backprop through the stack. grad_output is dL/d(final activation). Returns
// dL/dz; when param_grads is given, accumulates dL/dW and dL/db for layers
// with index >= accumulate_from.
inline std::vector<double> generator_backward(const GeneratorParams& gen,
                                              const ForwardCache& cache,
                                              std::vector<double> grad_output,
                                              GeneratorGrads* param_grads = nullptr,
                                              std::size_t accumulate_from = 0) {
    std::vector<double> grad_in;
    for (std::size_t li = gen.layer_count(); li-- > 0;) {
        const auto& act_out = cache.activations[li + 1];
        if (gen.spec.activations[li] == Activation::Tanh) {
            for (std::size_t k = 0; k < grad_output.size(); ++k)
                grad_output[k] *= 1.0 - act_out[k] * act_out[k];
        }
        if (param_grads && li >= accumulate_from)
            accumulate_outer(grad_output, cache.activations[li], param_grads->weights[li],
                             param_grads->biases[li]);
        matvec_transposed(gen.weights[li], grad_output, grad_in);
        grad_output = grad_in;
    }
    return grad_output;
}

// Deterministic stand-in for an art-style transfer: seeded Gaussian noise of
// the given standard deviation added to the parameters of the last k_last
// layers only; earlier layers stay bit-identical.
inline GeneratorParams perturb_artistic(const GeneratorParams& gen, std::size_t k_last,
                                        double magnitude, std::uint64_t seed) {
    if (k_last > gen.layer_count())
        throw config_error("perturb_artistic: k_last exceeds layer count");
    if (magnitude < 0.0) throw config_error("perturb_artistic: negative magnitude");
    GeneratorParams out = gen;
    if (k_last == 0 || magnitude == 0.0) return out;
    Rng rng(seed);
    for (std::size_t i = gen.layer_count() - k_last; i < gen.layer_count(); ++i) {
        for (double& v : out.weights[i].data) v += rng.normal() * magnitude;
        for (double& v : out.biases[i]) v += rng.normal() * magnitude;
    }
    return out;
}

// Parameter blend: layers i >= fuse_from get (1-alpha)*photo + alpha*art,
// layers below fuse_from are copied from the photorealistic model unchanged.
inline GeneratorParams interpolate(const GeneratorParams& photo, const GeneratorParams& art,
                                   double alpha, std::size_t fuse_from) {
    if (!photo.spec.same_architecture(art.spec))
        throw shape_error("interpolate: generators do not share an architecture");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw config_error("interpolate: alpha must lie in [0, 1]");
    if (fuse_from >= photo.layer_count())
        throw config_error("interpolate: fuse_from out of range");
    GeneratorParams out = photo;
    for (std::size_t i = fuse_from; i < photo.layer_count(); ++i) {
        for (std::size_t k = 0; k < out.weights[i].data.size(); ++k)
            out.weights[i].data[k] =
                (1.0 - alpha) * photo.weights[i].data[k] + alpha * art.weights[i].data[k];
        for (std::size_t k = 0; k < out.biases[i].size(); ++k)
            out.biases[i][k] = (1.0 - alpha) * photo.biases[i][k] + alpha * art.biases[i][k];
    }
    return out;
}

// Default fusion point mirrors last-6 blending on the 8-layer stack.
inline std::size_t default_fuse_from(const GeneratorSpec& spec) {
    const std::size_t last_k = 6;
    return spec.layer_count() > last_k ? spec.layer_count() - last_k : 0;
}

namespace detail {
constexpr std::size_t kAdaptBatch = 8;
}  // namespace detail

// The fixed latent batch adapt_freeze_early trains against, exposed so the
// style objective can be recomputed independently.
inline std::vector<LatentCode> adapt_latent_batch(const GeneratorSpec& spec,
                                                  std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0xADA7));
    std::vector<LatentCode> latents(detail::kAdaptBatch);
    for (auto& z : latents) {
        z.values.resize(spec.latent_dim);
        for (double& v : z.values) v = rng.normal();
    }
    return latents;
}

namespace detail {

struct StyleLossEval {
    double loss = 0.0;
    std::vector<double> mean_style;
};

inline StyleLossEval adapt_style_loss(const GeneratorParams& gen,
                                      const std::vector<LatentCode>& latents,
                                      const std::vector<double>& target,
                                      std::vector<ForwardCache>* caches = nullptr) {
    const std::size_t dim = gen.spec.channels * gen.spec.channels;
    StyleLossEval eval;
    eval.mean_style.assign(dim, 0.0);
    if (caches) caches->assign(latents.size(), {});
    for (std::size_t b = 0; b < latents.size(); ++b) {
        ForwardCache local;
        ForwardCache& cache = caches ? (*caches)[b] : local;
        generator_forward(gen, latents[b].values, cache);
        ImageGrid img(gen.spec.height, gen.spec.width, gen.spec.channels);
        img.values = cache.activations.back();
        const StyleVector sv = style_vector(img);
        for (std::size_t d = 0; d < dim; ++d) eval.mean_style[d] += sv.values[d];
    }
    for (double& v : eval.mean_style) v /= static_cast<double>(latents.size());
    eval.loss = squared_distance(eval.mean_style, target);
    return eval;
}

}  // namespace detail

// Freeze-early adaptation: gradient descent on the squared distance between
// the mean style vector of a fixed seeded latent batch and target_style,
// updating only layers >= freeze_below. Returns the parameters with the
// lowest observed loss, so the final loss never exceeds the initial one.
inline GeneratorParams adapt_freeze_early(const GeneratorParams& gen,
                                          const StyleVector& target_style,
                                          std::size_t freeze_below, std::size_t steps,
                                          double lr, std::uint64_t seed) {
    if (freeze_below >= gen.layer_count())
        throw config_error("adapt_freeze_early: freeze_below out of range");
    if (lr <= 0.0) throw config_error("adapt_freeze_early: learning rate must be positive");
    if (target_style.values.size() != gen.spec.channels * gen.spec.channels)
        throw shape_error("adapt_freeze_early: target style length mismatch");

    const std::vector<LatentCode> latents = adapt_latent_batch(gen.spec, seed);

    GeneratorParams current = gen;
    GeneratorParams best = gen;
    double best_loss = detail::adapt_style_loss(gen, latents, target_style.values).loss;
    if (!std::isfinite(best_loss))
        throw divergence_error("adapt_freeze_early: non-finite loss at step 0");

    const std::size_t c = gen.spec.channels;
    const double batch = static_cast<double>(latents.size());

    for (std::size_t step = 0; step < steps; ++step) {
        std::vector<ForwardCache> caches;
        const auto eval = detail::adapt_style_loss(current, latents, target_style.values, &caches);
        if (!std::isfinite(eval.loss))
            throw divergence_error("adapt_freeze_early: non-finite loss at step " +
                                   std::to_string(step));
        if (eval.loss < best_loss) {
            best_loss = eval.loss;
            best = current;
        }

        // dL/d(mean style) = 2 (mean - target); each sample contributes 1/B.
        Matrix grad_gram(c, c);
        for (std::size_t d = 0; d < c * c; ++d)
            grad_gram.data[d] = 2.0 * (eval.mean_style[d] - target_style.values[d]) / batch;

        GeneratorGrads grads = GeneratorGrads::zeros_like(current);
        ImageGrid probe(gen.spec.height, gen.spec.width, gen.spec.channels);
        std::vector<double> grad_image;
        for (std::size_t b = 0; b < latents.size(); ++b) {
            probe.values = caches[b].activations.back();
            gram_backward(probe, grad_gram, grad_image);
            generator_backward(current, caches[b], grad_image, &grads, freeze_below);
        }

        for (std::size_t i = freeze_below; i < current.layer_count(); ++i) {
            for (std::size_t k = 0; k < current.weights[i].data.size(); ++k)
                current.weights[i].data[k] -= lr * grads.weights[i].data[k];
            for (std::size_t k = 0; k < current.biases[i].size(); ++k)
                current.biases[i][k] -= lr * grads.biases[i][k];
        }
    }

    const double final_loss = detail::adapt_style_loss(current, latents, target_style.values).loss;
    if (!std::isfinite(final_loss))
        throw divergence_error("adapt_freeze_early: non-finite loss at step " +
                               std::to_string(steps));
    if (final_loss < best_loss) best = current;
    return best;
}

// Latent inversion by gradient descent on the mean squared reconstruction
// error, starting from a seeded Gaussian latent. Returns the latent with the
// lowest observed loss.
inline LatentCode invert(const GeneratorParams& gen, const ImageGrid& target,
                         std::size_t steps, double lr, std::uint64_t seed) {
    if (target.height != gen.spec.height || target.width != gen.spec.width ||
        target.channels != gen.spec.channels)
        throw shape_error("invert: target shape does not match generator output");
    if (lr <= 0.0) throw config_error("invert: learning rate must be positive");

    Rng rng(mix_seed(seed, 0x1272));
    LatentCode z;
    z.values.resize(gen.spec.latent_dim);
    for (double& v : z.values) v = rng.normal();

    const double m = static_cast<double>(target.size());
    auto mse = [&](const ForwardCache& cache) {
        double s = 0.0;
        const auto& out = cache.activations.back();
        for (std::size_t k = 0; k < out.size(); ++k) {
            const double d = out[k] - target.values[k];
            s += d * d;
        }
        return s / m;
    };

    LatentCode best = z;
    double best_loss = 0.0;
    {
        ForwardCache cache;
        generator_forward(gen, z.values, cache);
        best_loss = mse(cache);
        if (!std::isfinite(best_loss))
            throw divergence_error("invert: non-finite loss at step 0");
    }

    std::vector<double> grad_out(target.size());
    for (std::size_t step = 0; step < steps; ++step) {
        ForwardCache cache;
        generator_forward(gen, z.values, cache);
        const double loss = mse(cache);
        if (!std::isfinite(loss))
            throw divergence_error("invert: non-finite loss at step " + std::to_string(step));
        if (loss < best_loss) {
            best_loss = loss;
            best = z;
        }
        const auto& out = cache.activations.back();
        for (std::size_t k = 0; k < out.size(); ++k)
            grad_out[k] = 2.0 * (out[k] - target.values[k]) / m;
        const std::vector<double> grad_z = generator_backward(gen, cache, grad_out);
        for (std::size_t k = 0; k < z.values.size(); ++k) z.values[k] -= lr * grad_z[k];
    }

    ForwardCache cache;
    generator_forward(gen, z.values, cache);
    const double final_loss = mse(cache);
    if (!std::isfinite(final_loss))
        throw divergence_error("invert: non-finite loss at step " + std::to_string(steps));
    if (final_loss < best_loss) best = z;
    return best;
}

}  // namespace artscore
