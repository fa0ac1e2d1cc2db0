#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "artscore/model_zoo.hpp"
#include "artscore/style.hpp"

using namespace artscore;

namespace {

// Small stack for gradient checks: latent 3 -> 5 -> 2x2x3.
GeneratorSpec tiny_spec(std::uint64_t seed) {
    GeneratorSpec spec;
    spec.latent_dim = 3;
    spec.layer_widths = {3, 5, 12};
    spec.activations = {Activation::Tanh, Activation::Tanh};
    spec.height = 2;
    spec.width = 2;
    spec.channels = 3;
    spec.seed = seed;
    return spec;
}

double reconstruction_mse(const GeneratorParams& gen, const LatentCode& z,
                          const ImageGrid& target) {
    const ImageGrid out = generate(gen, z);
    double s = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double d = out.values[k] - target.values[k];
        s += d * d;
    }
    return s / static_cast<double>(out.size());
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

// Independent re-computation of the freeze-early style objective.
double style_loss_oracle(const GeneratorParams& gen, const std::vector<LatentCode>& latents,
                         const std::vector<double>& target) {
    std::vector<double> mean(target.size(), 0.0);
    for (const auto& z : latents) {
        const StyleVector sv = style_vector(generate(gen, z));
        for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += sv.values[d];
    }
    for (double& v : mean) v /= static_cast<double>(latents.size());
    double loss = 0.0;
    for (std::size_t d = 0; d < mean.size(); ++d) {
        const double diff = mean[d] - target[d];
        loss += diff * diff;
    }
    return loss;
}

}  // namespace

TEST_CASE("photoreal generator is a deterministic function of its spec") {
    const GeneratorSpec spec = default_generator_spec(1234);
    const GeneratorParams a = new_photoreal_generator(spec);
    const GeneratorParams b = new_photoreal_generator(spec);
    REQUIRE(a.layer_count() == 8);
    for (std::size_t l = 0; l < a.layer_count(); ++l) {
        REQUIRE(a.weights[l].data == b.weights[l].data);
        REQUIRE(a.biases[l] == b.biases[l]);
    }
}

TEST_CASE("layer widths produce the bookkeeping shapes") {
    GeneratorSpec spec;
    spec.latent_dim = 16;
    spec.layer_widths = {16, 32, 768};
    spec.activations = {Activation::Tanh, Activation::Tanh};
    spec.height = 16;
    spec.width = 16;
    spec.channels = 3;
    const GeneratorParams gen = new_photoreal_generator(spec);
    REQUIRE(gen.layer_count() == 2);
    REQUIRE(gen.weights[0].rows == 32);
    REQUIRE(gen.weights[0].cols == 16);
    REQUIRE(gen.weights[1].rows == 768);
    REQUIRE(gen.weights[1].cols == 32);
}

TEST_CASE("different seeds give different parameters") {
    GeneratorSpec s0 = tiny_spec(0);
    GeneratorSpec s1 = tiny_spec(1);
    const GeneratorParams a = new_photoreal_generator(s0);
    const GeneratorParams b = new_photoreal_generator(s1);
    bool any_diff = false;
    for (std::size_t l = 0; l < a.layer_count(); ++l)
        if (a.weights[l].data != b.weights[l].data) any_diff = true;
    REQUIRE(any_diff);
}

TEST_CASE("invalid specs are rejected") {
    GeneratorSpec spec = tiny_spec(0);
    spec.layer_widths = {4, 5, 12};  // does not chain with latent_dim 3
    REQUIRE_THROWS_AS(new_photoreal_generator(spec), config_error);

    GeneratorSpec bad_out = tiny_spec(0);
    bad_out.layer_widths.back() = 7;  // != H*W*C
    REQUIRE_THROWS_AS(new_photoreal_generator(bad_out), config_error);

    GeneratorSpec bad_act = tiny_spec(0);
    bad_act.activations.back() = Activation::Identity;
    REQUIRE_THROWS_AS(new_photoreal_generator(bad_act), config_error);
}

TEST_CASE("zero latent with zero biases maps to the zero image") {
    const GeneratorParams gen = new_photoreal_generator(tiny_spec(5));
    LatentCode z;
    z.values.assign(3, 0.0);
    const ImageGrid img = generate(gen, z);
    for (double v : img.values) REQUIRE(v == 0.0);
}

TEST_CASE("generate is pure and bounded") {
    const GeneratorParams gen = new_photoreal_generator(default_generator_spec(77));
    for (std::uint64_t s = 0; s < 5; ++s) {
        const LatentCode z = random_latent(gen.spec, s);
        const ImageGrid a = generate(gen, z);
        const ImageGrid b = generate(gen, z);
        REQUIRE(a.values == b.values);
        for (double v : a.values) {
            REQUIRE(v >= -1.0);
            REQUIRE(v <= 1.0);
        }
    }
}

TEST_CASE("generate rejects mismatched latents") {
    const GeneratorParams gen = new_photoreal_generator(tiny_spec(5));
    LatentCode z;
    z.values.assign(4, 0.0);
    REQUIRE_THROWS_AS(generate(gen, z), shape_error);
}

TEST_CASE("perturbation no-ops") {
    const GeneratorParams gen = new_photoreal_generator(tiny_spec(9));
    const GeneratorParams same_k = perturb_artistic(gen, 0, 0.5, 3);
    const GeneratorParams same_mag = perturb_artistic(gen, 2, 0.0, 3);
    for (std::size_t l = 0; l < gen.layer_count(); ++l) {
        REQUIRE(same_k.weights[l].data == gen.weights[l].data);
        REQUIRE(same_mag.weights[l].data == gen.weights[l].data);
    }
    REQUIRE_THROWS_AS(perturb_artistic(gen, 3, 0.1, 3), config_error);
}

TEST_CASE("perturbation touches exactly the last k layers") {
    const GeneratorParams gen = new_photoreal_generator(default_generator_spec(11));
    REQUIRE(gen.layer_count() == 8);
    const GeneratorParams art = perturb_artistic(gen, 6, 0.05, 21);
    for (std::size_t l = 0; l < 2; ++l) {
        REQUIRE(art.weights[l].data == gen.weights[l].data);
        REQUIRE(art.biases[l] == gen.biases[l]);
    }
    for (std::size_t l = 2; l < 8; ++l) REQUIRE(art.weights[l].data != gen.weights[l].data);
}

TEST_CASE("interpolation endpoints are bit-equal") {
    const GeneratorParams photo = new_photoreal_generator(default_generator_spec(31));
    const GeneratorParams art = perturb_artistic(photo, 6, 0.05, 32);
    const std::size_t fuse = default_fuse_from(photo.spec);
    const GeneratorParams at0 = interpolate(photo, art, 0.0, fuse);
    const GeneratorParams at1 = interpolate(photo, art, 1.0, fuse);
    for (std::size_t l = fuse; l < photo.layer_count(); ++l) {
        REQUIRE(at0.weights[l].data == photo.weights[l].data);
        REQUIRE(at1.weights[l].data == art.weights[l].data);
    }
}

TEST_CASE("interpolation is the plain weighted average") {
    GeneratorSpec spec = tiny_spec(0);
    GeneratorParams photo = new_photoreal_generator(spec);
    GeneratorParams art = photo;
    for (auto& w : photo.weights)
        for (double& v : w.data) v = 2.0;
    for (auto& w : art.weights)
        for (double& v : w.data) v = 4.0;
    const GeneratorParams mid = interpolate(photo, art, 0.5, 0);
    for (const auto& w : mid.weights)
        for (double v : w.data) REQUIRE(v == 3.0);
}

TEST_CASE("interpolation is affine in alpha and freezes early layers") {
    const GeneratorParams photo = new_photoreal_generator(default_generator_spec(41));
    const GeneratorParams art = perturb_artistic(photo, 6, 0.08, 42);
    const std::size_t fuse = default_fuse_from(photo.spec);
    for (double alpha : {0.0, 0.1, 0.3, 0.5, 0.77, 0.9, 1.0}) {
        const GeneratorParams mid = interpolate(photo, art, alpha, fuse);
        for (std::size_t l = 0; l < fuse; ++l) {
            REQUIRE(mid.weights[l].data == photo.weights[l].data);
            REQUIRE(mid.biases[l] == photo.biases[l]);
        }
        for (std::size_t l = fuse; l < photo.layer_count(); ++l)
            for (std::size_t k = 0; k < mid.weights[l].data.size(); ++k) {
                const double expect = (1.0 - alpha) * photo.weights[l].data[k] +
                                      alpha * art.weights[l].data[k];
                REQUIRE(mid.weights[l].data[k] == expect);
            }
    }
}

TEST_CASE("interpolation validates its inputs") {
    const GeneratorParams photo = new_photoreal_generator(tiny_spec(1));
    const GeneratorParams art = perturb_artistic(photo, 1, 0.1, 2);
    REQUIRE_THROWS_AS(interpolate(photo, art, -0.1, 0), config_error);
    REQUIRE_THROWS_AS(interpolate(photo, art, 1.1, 0), config_error);
    REQUIRE_THROWS_AS(interpolate(photo, art, 0.5, 2), config_error);
    const GeneratorParams other = new_photoreal_generator(default_generator_spec(1));
    REQUIRE_THROWS_AS(interpolate(photo, other, 0.5, 0), shape_error);
}

TEST_CASE("inversion with zero steps returns the seeded initial latent") {
    const GeneratorParams gen = new_photoreal_generator(tiny_spec(8));
    const ImageGrid target_a = generate(gen, random_latent(gen.spec, 100));
    const ImageGrid target_b = generate(gen, random_latent(gen.spec, 101));
    const LatentCode za = invert(gen, target_a, 0, 0.5, 7);
    const LatentCode zb = invert(gen, target_b, 0, 0.5, 7);
    REQUIRE(za.values == zb.values);  // the init is target-independent
    const LatentCode zc = invert(gen, target_a, 0, 0.5, 8);
    REQUIRE(za.values != zc.values);
}

TEST_CASE("inversion recovers a planted target") {
    const GeneratorParams gen = new_photoreal_generator(default_generator_spec(55));
    const LatentCode z_true = random_latent(gen.spec, 500);
    const ImageGrid target = generate(gen, z_true);
    const LatentCode z_hat = invert(gen, target, 1500, 8.0, 501);
    REQUIRE(reconstruction_mse(gen, z_hat, target) < 1e-3);
}

TEST_CASE("inversion never ends worse than its start") {
    const GeneratorParams gen = new_photoreal_generator(tiny_spec(3));
    const ImageGrid target = generate(gen, random_latent(gen.spec, 77));
    for (std::uint64_t seed : {11ull, 12ull}) {
        const LatentCode z0 = invert(gen, target, 0, 1.0, seed);
        const LatentCode z_final = invert(gen, target, 150, 1.0, seed);
        REQUIRE(reconstruction_mse(gen, z_final, target) <=
                reconstruction_mse(gen, z0, target));
    }
}

TEST_CASE("inversion rejects a wrong target shape") {
    const GeneratorParams gen = new_photoreal_generator(tiny_spec(3));
    ImageGrid bad(3, 2, 3);
    REQUIRE_THROWS_AS(invert(gen, bad, 1, 0.1, 0), shape_error);
}

TEST_CASE("freeze-early adaptation no-ops with zero steps") {
    const GeneratorParams gen = new_photoreal_generator(tiny_spec(6));
    StyleVector target;
    target.channels = 3;
    target.values.assign(9, 0.25);
    const GeneratorParams out = adapt_freeze_early(gen, target, 1, 0, 1e-2, 4);
    for (std::size_t l = 0; l < gen.layer_count(); ++l)
        REQUIRE(out.weights[l].data == gen.weights[l].data);
}

TEST_CASE("adaptation stays put when the target is already met") {
    const GeneratorParams gen = new_photoreal_generator(tiny_spec(6));
    const std::uint64_t seed = 9;
    const auto latents = adapt_latent_batch(gen.spec, seed);
    StyleVector target;
    target.channels = 3;
    target.values.assign(9, 0.0);
    for (const auto& z : latents) {
        const StyleVector sv = style_vector(generate(gen, z));
        for (std::size_t d = 0; d < 9; ++d) target.values[d] += sv.values[d];
    }
    for (double& v : target.values) v /= static_cast<double>(latents.size());

    const GeneratorParams out = adapt_freeze_early(gen, target, 1, 5, 1e-2, seed);
    double max_move = 0.0;
    for (std::size_t l = 0; l < gen.layer_count(); ++l)
        for (std::size_t k = 0; k < gen.weights[l].data.size(); ++k)
            max_move = std::max(max_move,
                                std::abs(out.weights[l].data[k] - gen.weights[l].data[k]));
    REQUIRE(max_move < 1e-6);
}

TEST_CASE("adaptation descends toward a random target and freezes early layers") {
    const GeneratorParams gen = new_photoreal_generator(tiny_spec(14));
    const std::uint64_t seed = 21;
    Rng rng(99);
    StyleVector target;
    target.channels = 3;
    target.values.resize(9);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            const double v = 0.2 * rng.uniform();
            target.values[i * 3 + j] = v;
            target.values[j * 3 + i] = v;
        }

    const auto latents = adapt_latent_batch(gen.spec, seed);
    const double before = style_loss_oracle(gen, latents, target.values);
    const GeneratorParams out = adapt_freeze_early(gen, target, 1, 200, 1e-2, seed);
    const double after = style_loss_oracle(out, latents, target.values);
    REQUIRE(after < before);
    REQUIRE(out.weights[0].data == gen.weights[0].data);  // frozen layer untouched
    REQUIRE(out.biases[0] == gen.biases[0]);
}

TEST_CASE("latent gradients match central finite differences") {
    const GeneratorParams gen = new_photoreal_generator(tiny_spec(17));
    const ImageGrid target = generate(gen, random_latent(gen.spec, 3));
    const LatentCode z = random_latent(gen.spec, 4);
    const double m = static_cast<double>(target.size());

    ForwardCache cache;
    generator_forward(gen, z.values, cache);
    std::vector<double> grad_out(target.size());
    for (std::size_t k = 0; k < target.size(); ++k)
        grad_out[k] = 2.0 * (cache.activations.back()[k] - target.values[k]) / m;
    const std::vector<double> analytic = generator_backward(gen, cache, grad_out);

    const double h = 1e-4;
    for (std::size_t d = 0; d < z.values.size(); ++d) {
        LatentCode zp = z, zm = z;
        zp.values[d] += h;
        zm.values[d] -= h;
        const double fd =
            (reconstruction_mse(gen, zp, target) - reconstruction_mse(gen, zm, target)) /
            (2 * h);
        REQUIRE(rel_err(analytic[d], fd) < 1e-5);
    }
}

TEST_CASE("style-objective weight gradients match central finite differences") {
    GeneratorParams gen = new_photoreal_generator(tiny_spec(23));
    const std::uint64_t seed = 5;
    const auto latents = adapt_latent_batch(gen.spec, seed);
    std::vector<double> target(9, 0.1);

    // Analytic gradient assembled exactly the way adapt_freeze_early does.
    const std::size_t c = gen.spec.channels;
    std::vector<double> mean(c * c, 0.0);
    std::vector<ForwardCache> caches(latents.size());
    for (std::size_t b = 0; b < latents.size(); ++b) {
        generator_forward(gen, latents[b].values, caches[b]);
        ImageGrid img(gen.spec.height, gen.spec.width, gen.spec.channels);
        img.values = caches[b].activations.back();
        const StyleVector sv = style_vector(img);
        for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += sv.values[d];
    }
    for (double& v : mean) v /= static_cast<double>(latents.size());
    Matrix grad_gram(c, c);
    for (std::size_t d = 0; d < c * c; ++d)
        grad_gram.data[d] = 2.0 * (mean[d] - target[d]) / static_cast<double>(latents.size());
    GeneratorGrads grads = GeneratorGrads::zeros_like(gen);
    for (std::size_t b = 0; b < latents.size(); ++b) {
        ImageGrid img(gen.spec.height, gen.spec.width, gen.spec.channels);
        img.values = caches[b].activations.back();
        std::vector<double> grad_image;
        gram_backward(img, grad_gram, grad_image);
        generator_backward(gen, caches[b], grad_image, &grads, 0);
    }

    const double h = 1e-4;
    Rng pick(77);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t l = pick.below(gen.layer_count());
        const std::size_t k = pick.below(gen.weights[l].data.size());
        const double saved = gen.weights[l].data[k];
        gen.weights[l].data[k] = saved + h;
        const double lp = style_loss_oracle(gen, latents, target);
        gen.weights[l].data[k] = saved - h;
        const double lm = style_loss_oracle(gen, latents, target);
        gen.weights[l].data[k] = saved;
        const double fd = (lp - lm) / (2 * h);
        REQUIRE(rel_err(grads.weights[l].data[k], fd) < 1e-5);
    }
}
