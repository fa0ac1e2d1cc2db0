#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "artscore/core.hpp"
#include "artscore/model_zoo.hpp"
#include "artscore/ranker.hpp"
#include "artscore/serial.hpp"

namespace artscore {

// Parameter files use the shared ARSC container. Block 0 is a descriptor
// whose first value tags the section kind; shapes and tags are small
// integers, exactly representable as f32. Layer blocks follow pairwise:
// weights (row-major), then bias.

inline constexpr float kArscKindGenerator = 1.0f;
inline constexpr float kArscKindScorer = 2.0f;

inline std::vector<unsigned char> encode_generator(const GeneratorParams& gen) {
    gen.validate();
    ArscBlocks file;
    std::vector<float> desc;
    desc.push_back(kArscKindGenerator);
    desc.push_back(static_cast<float>(gen.spec.latent_dim));
    desc.push_back(static_cast<float>(gen.spec.height));
    desc.push_back(static_cast<float>(gen.spec.width));
    desc.push_back(static_cast<float>(gen.spec.channels));
    desc.push_back(static_cast<float>(gen.spec.layer_count()));
    for (std::size_t w : gen.spec.layer_widths) desc.push_back(static_cast<float>(w));
    for (Activation a : gen.spec.activations)
        desc.push_back(static_cast<float>(static_cast<int>(a)));
    push_seed_chunks(desc, gen.spec.seed);
    file.blocks.push_back(std::move(desc));
    for (std::size_t i = 0; i < gen.layer_count(); ++i) {
        file.blocks.emplace_back(gen.weights[i].data.begin(), gen.weights[i].data.end());
        file.blocks.emplace_back(gen.biases[i].begin(), gen.biases[i].end());
    }
    return arsc_encode(file);
}

inline GeneratorParams decode_generator(const std::vector<unsigned char>& bytes) {
    const ArscBlocks file = arsc_decode(bytes);
    if (file.blocks.empty() || file.blocks[0].empty() ||
        file.blocks[0][0] != kArscKindGenerator)
        throw io_error("checkpoint does not hold a generator section");
    const auto& desc = file.blocks[0];
    std::size_t pos = 1;
    auto next = [&]() -> std::size_t {
        if (pos >= desc.size()) throw io_error("generator descriptor truncated");
        return static_cast<std::size_t>(desc[pos++]);
    };
    GeneratorSpec spec;
    spec.latent_dim = next();
    spec.height = next();
    spec.width = next();
    spec.channels = next();
    const std::size_t layers = next();
    spec.layer_widths.resize(layers + 1);
    for (auto& w : spec.layer_widths) w = next();
    spec.activations.resize(layers);
    for (auto& a : spec.activations) a = static_cast<Activation>(next());
    spec.seed = pop_seed_chunks(desc, pos);

    if (file.blocks.size() != 1 + 2 * layers)
        throw io_error("generator checkpoint has the wrong block count");
    GeneratorParams gen;
    gen.spec = spec;
    for (std::size_t i = 0; i < layers; ++i) {
        const auto& wb = file.blocks[1 + 2 * i];
        const auto& bb = file.blocks[2 + 2 * i];
        Matrix w(spec.layer_widths[i + 1], spec.layer_widths[i]);
        if (wb.size() != w.size() || bb.size() != spec.layer_widths[i + 1])
            throw io_error("generator layer block size mismatch at layer " +
                           std::to_string(i));
        for (std::size_t k = 0; k < wb.size(); ++k) w.data[k] = static_cast<double>(wb[k]);
        gen.weights.push_back(std::move(w));
        gen.biases.emplace_back(bb.begin(), bb.end());
    }
    gen.validate();
    return gen;
}

inline std::vector<unsigned char> encode_scorer(const ScorerParams& scorer) {
    scorer.validate();
    ArscBlocks file;
    std::vector<float> desc;
    desc.push_back(kArscKindScorer);
    desc.push_back(static_cast<float>(scorer.input_dim()));
    desc.push_back(static_cast<float>(scorer.hidden_dim()));
    desc.push_back(static_cast<float>(scorer.dropout_rate));
    file.blocks.push_back(std::move(desc));
    for (std::size_t i = 0; i < scorer.weights.size(); ++i) {
        file.blocks.emplace_back(scorer.weights[i].data.begin(), scorer.weights[i].data.end());
        file.blocks.emplace_back(scorer.biases[i].begin(), scorer.biases[i].end());
    }
    return arsc_encode(file);
}

inline ScorerParams decode_scorer(const std::vector<unsigned char>& bytes) {
    const ArscBlocks file = arsc_decode(bytes);
    if (file.blocks.empty() || file.blocks[0].size() < 4 ||
        file.blocks[0][0] != kArscKindScorer)
        throw io_error("checkpoint does not hold a scorer section");
    const auto& desc = file.blocks[0];
    const std::size_t input_dim = static_cast<std::size_t>(desc[1]);
    const std::size_t hidden = static_cast<std::size_t>(desc[2]);
    const double dropout = static_cast<double>(desc[3]);
    if (file.blocks.size() != 7) throw io_error("scorer checkpoint has the wrong block count");

    ScorerParams scorer;
    scorer.dropout_rate = dropout;
    const std::size_t dims[4] = {input_dim, hidden, hidden, 1};
    for (std::size_t l = 0; l < 3; ++l) {
        const auto& wb = file.blocks[1 + 2 * l];
        const auto& bb = file.blocks[2 + 2 * l];
        Matrix w(dims[l + 1], dims[l]);
        if (wb.size() != w.size() || bb.size() != dims[l + 1])
            throw io_error("scorer layer block size mismatch at layer " + std::to_string(l));
        for (std::size_t k = 0; k < wb.size(); ++k) w.data[k] = static_cast<double>(wb[k]);
        scorer.weights.push_back(std::move(w));
        scorer.biases.emplace_back(bb.begin(), bb.end());
    }
    scorer.validate();
    return scorer;
}

inline void save_generator(const std::filesystem::path& path, const GeneratorParams& gen) {
    write_file_bytes(path, encode_generator(gen));
}

inline GeneratorParams load_generator(const std::filesystem::path& path) {
    return decode_generator(read_file_bytes(path));
}

inline void save_scorer(const std::filesystem::path& path, const ScorerParams& scorer) {
    write_file_bytes(path, encode_scorer(scorer));
}

inline ScorerParams load_scorer(const std::filesystem::path& path) {
    return decode_scorer(read_file_bytes(path));
}

}  // namespace artscore
