#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "artscore/clustering.hpp"
#include "artscore/core.hpp"
#include "artscore/image.hpp"
#include "artscore/model_zoo.hpp"
#include "artscore/serial.hpp"
#include "artscore/style.hpp"

namespace artscore {

enum class Anchor : std::uint8_t { None = 0, Photo = 1, Painting = 2 };

inline std::string anchor_name(Anchor a) {
    switch (a) {
        case Anchor::Photo: return "photo";
        case Anchor::Painting: return "painting";
        default: return "none";
    }
}

inline Anchor anchor_from_name(const std::string& s) {
    if (s == "photo") return Anchor::Photo;
    if (s == "painting") return Anchor::Painting;
    if (s == "none") return Anchor::None;
    throw config_error("unknown anchor tag: " + s);
}

// One latent's images across the alpha grid, stored in rank order
// (rank 0 = least artistic). A real-endpoint image, when attached, sits at
// the extreme rank on its anchor side, adjacent to the reconstruction.
struct RankedSequence {
    std::vector<ImageGrid> images;
    std::vector<std::size_t> ranks;  // permutation of 0..n-1; identity at build time
    std::vector<double> alphas;
    std::string domain_tag;
    std::uint64_t latent_seed = 0;
    Anchor anchor = Anchor::None;

    std::size_t size() const { return images.size(); }

    void validate() const {
        if (images.empty()) throw shape_error("RankedSequence: empty");
        if (ranks.size() != images.size())
            throw shape_error("RankedSequence: rank count mismatch");
        const std::size_t expected =
            alphas.size() + (anchor == Anchor::None ? 0 : 1);
        if (images.size() != expected)
            throw shape_error("RankedSequence: item count does not match alpha grid");
        std::vector<bool> seen(ranks.size(), false);
        for (std::size_t r : ranks) {
            if (r >= ranks.size() || seen[r])
                throw shape_error("RankedSequence: ranks are not a permutation");
            seen[r] = true;
        }
        for (std::size_t i = 1; i < images.size(); ++i)
            if (!images[i].same_shape(images[0]))
                throw shape_error("RankedSequence: images differ in shape");
    }
};

inline void check_alpha_grid(const std::vector<double>& alphas) {
    if (alphas.empty()) throw config_error("alpha grid must be non-empty");
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        if (!(alphas[i] >= 0.0 && alphas[i] <= 1.0))
            throw config_error("alpha grid values must lie in [0, 1]");
        if (i > 0 && !(alphas[i] > alphas[i - 1]))
            throw config_error("alpha grid must be strictly ascending");
    }
}

// Pre-blends one interpolated generator per grid alpha so that sequence
// synthesis is a plain forward pass per image.
class InterpolatedFamily {
  public:
    InterpolatedFamily(const GeneratorParams& photo, const GeneratorParams& art,
                       std::vector<double> alphas, std::size_t fuse_from)
        : alphas_(std::move(alphas)) {
        check_alpha_grid(alphas_);
        models_.reserve(alphas_.size());
        for (double a : alphas_) models_.push_back(interpolate(photo, art, a, fuse_from));
    }

    const std::vector<double>& alphas() const { return alphas_; }
    const GeneratorParams& model(std::size_t i) const { return models_[i]; }

    RankedSequence sequence(const LatentCode& z) const {
        RankedSequence seq;
        seq.alphas = alphas_;
        seq.images.reserve(alphas_.size());
        for (const auto& gen : models_) seq.images.push_back(generate(gen, z));
        seq.ranks.resize(seq.images.size());
        std::iota(seq.ranks.begin(), seq.ranks.end(), 0);
        return seq;
    }

  private:
    std::vector<double> alphas_;
    std::vector<GeneratorParams> models_;
};

// Photo-anchored targets become rank 0 (least artistic); painting-anchored
// targets become rank n-1. Grid ranks shift to stay adjacent and distinct.
inline void attach_real_endpoint(RankedSequence& seq, ImageGrid real, Anchor anchor) {
    if (anchor == Anchor::None)
        throw config_error("attach_real_endpoint: anchor must be photo or painting");
    if (seq.anchor != Anchor::None)
        throw config_error("attach_real_endpoint: sequence already anchored");
    if (!seq.images.empty() && !real.same_shape(seq.images.front()))
        throw shape_error("attach_real_endpoint: shape mismatch");
    seq.anchor = anchor;
    if (anchor == Anchor::Photo) {
        seq.images.insert(seq.images.begin(), std::move(real));
    } else {
        seq.images.push_back(std::move(real));
    }
    seq.ranks.resize(seq.images.size());
    std::iota(seq.ranks.begin(), seq.ranks.end(), 0);
}

// One image per grid alpha via interpolate + generate; pseudo-ranks follow
// the alpha order. An optional real endpoint is attached at the extreme rank.
inline RankedSequence build_sequence(const GeneratorParams& photo, const GeneratorParams& art,
                                     const LatentCode& z, const std::vector<double>& alphas,
                                     std::size_t fuse_from, const ImageGrid* real = nullptr,
                                     Anchor anchor = Anchor::None) {
    InterpolatedFamily family(photo, art, alphas, fuse_from);
    RankedSequence seq = family.sequence(z);
    if (real != nullptr) attach_real_endpoint(seq, *real, anchor);
    return seq;
}

// ---------------------------------------------------------------------------
// Dataset configuration and manifest
// ---------------------------------------------------------------------------

enum class ArtRoute : std::uint8_t { Perturb = 0, Adapt = 1 };
enum class EndpointMode : std::uint8_t { None = 0, Inverted = 1 };

struct DatasetConfig {
    std::vector<std::string> domains = {"face", "horse", "landscape"};
    std::size_t sequences_per_domain = 100;
    std::vector<double> alphas;  // empty -> 0.0..1.0 in steps of 0.1
    std::size_t fuse_from = 2;
    std::uint64_t seed = 0;
    std::array<double, 3> split_ratios = {0.8, 0.1, 0.1};

    ArtRoute art_route = ArtRoute::Perturb;
    std::size_t perturb_layers = 6;
    double perturb_magnitude = 0.08;

    // Few-shot style-adaptation route. Twenty style clusters with ten
    // representatives each by default; desk-scale runs usually shrink both.
    std::size_t adapt_clusters = 20;
    std::size_t adapt_representatives = 10;
    std::size_t adapt_corpus = 200;
    std::size_t adapt_steps = 120;
    double adapt_lr = 0.05;

    EndpointMode real_endpoints = EndpointMode::None;
    std::size_t invert_steps = 300;
    double invert_lr = 8.0;

    std::vector<double> effective_alphas() const {
        if (!alphas.empty()) return alphas;
        std::vector<double> grid(11);
        for (int i = 0; i <= 10; ++i) grid[i] = static_cast<double>(i) / 10.0;
        return grid;
    }

    void validate() const {
        if (domains.empty()) throw config_error("dataset config: no domains");
        for (const auto& d : domains)
            if (d.empty()) throw config_error("dataset config: empty domain tag");
        if (sequences_per_domain == 0)
            throw config_error("dataset config: sequences_per_domain must be positive");
        check_alpha_grid(effective_alphas());
        double sum = split_ratios[0] + split_ratios[1] + split_ratios[2];
        if (std::abs(sum - 1.0) > 1e-9)
            throw config_error("dataset config: split ratios must sum to 1");
        for (double r : split_ratios)
            if (r < 0.0) throw config_error("dataset config: negative split ratio");
    }

    static DatasetConfig from_kv(const KvFile& kv) {
        DatasetConfig cfg;
        if (kv.has("domains")) cfg.domains = kv.get_strings("domains");
        cfg.sequences_per_domain = kv.get_size("sequences_per_domain", cfg.sequences_per_domain);
        if (kv.has("alphas")) {
            cfg.alphas = kv.get_doubles("alphas");
        } else if (kv.has("alpha_count")) {
            const std::size_t n = kv.get_size("alpha_count", 11);
            if (n < 2) throw config_error("alpha_count must be >= 2");
            cfg.alphas.resize(n);
            for (std::size_t i = 0; i < n; ++i)
                cfg.alphas[i] = static_cast<double>(i) / static_cast<double>(n - 1);
        }
        cfg.fuse_from = kv.get_size("fuse_from", cfg.fuse_from);
        cfg.seed = kv.get_u64("seed", cfg.seed);
        if (kv.has("split_ratios")) {
            const auto r = kv.get_doubles("split_ratios");
            if (r.size() != 3) throw config_error("split_ratios needs three values");
            cfg.split_ratios = {r[0], r[1], r[2]};
        }
        const std::string route = kv.get_or("art_route", "perturb");
        if (route == "perturb") {
            cfg.art_route = ArtRoute::Perturb;
        } else if (route == "adapt") {
            cfg.art_route = ArtRoute::Adapt;
        } else {
            throw config_error("art_route must be perturb or adapt");
        }
        cfg.perturb_layers = kv.get_size("perturb_layers", cfg.perturb_layers);
        cfg.perturb_magnitude = kv.get_double("perturb_magnitude", cfg.perturb_magnitude);
        cfg.adapt_clusters = kv.get_size("adapt_clusters", cfg.adapt_clusters);
        cfg.adapt_representatives =
            kv.get_size("adapt_representatives", cfg.adapt_representatives);
        cfg.adapt_corpus = kv.get_size("adapt_corpus", cfg.adapt_corpus);
        cfg.adapt_steps = kv.get_size("adapt_steps", cfg.adapt_steps);
        cfg.adapt_lr = kv.get_double("adapt_lr", cfg.adapt_lr);
        const std::string ep = kv.get_or("real_endpoints", "none");
        if (ep == "none") {
            cfg.real_endpoints = EndpointMode::None;
        } else if (ep == "inverted") {
            cfg.real_endpoints = EndpointMode::Inverted;
        } else {
            throw config_error("real_endpoints must be none or inverted");
        }
        cfg.invert_steps = kv.get_size("invert_steps", cfg.invert_steps);
        cfg.invert_lr = kv.get_double("invert_lr", cfg.invert_lr);
        cfg.validate();
        return cfg;
    }
};

struct SequenceRecord {
    std::uint64_t id = 0;
    std::string domain;
    std::uint64_t latent_seed = 0;
    Anchor anchor = Anchor::None;
    std::size_t item_count = 0;
    std::string shard_file;
    std::uint64_t offset = 0;  // byte offset of the first image in the shard
    std::string split;         // train / val / test
};

struct DatasetManifest {
    std::uint64_t seed = 0;
    std::vector<std::string> domains;
    std::vector<double> alphas;
    std::size_t fuse_from = 0;
    std::size_t height = 0, width = 0, channels = 0;
    std::array<double, 3> split_ratios = {1.0, 0.0, 0.0};
    std::vector<std::pair<std::string, std::string>> spec_hashes;  // label -> hex
    std::vector<SequenceRecord> sequences;

    std::size_t count_in_split(const std::string& split) const {
        std::size_t n = 0;
        for (const auto& s : sequences) n += (s.split == split) ? 1 : 0;
        return n;
    }

    std::size_t count_in(const std::string& domain, const std::string& split) const {
        std::size_t n = 0;
        for (const auto& s : sequences) n += (s.domain == domain && s.split == split) ? 1 : 0;
        return n;
    }
};

// ---------------------------------------------------------------------------
// Split: seeded shuffle, contiguous partition at floor boundaries, remainder
// to training. Sequences never straddle splits.
// ---------------------------------------------------------------------------

struct SplitPlan {
    std::vector<std::uint64_t> train, val, test;
    bool degenerate = false;  // some split came out empty
};

inline SplitPlan plan_split(std::vector<std::uint64_t> ids, const std::array<double, 3>& ratios,
                            std::uint64_t seed) {
    double sum = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(sum - 1.0) > 1e-9) throw config_error("split ratios must sum to 1");
    for (double r : ratios)
        if (r < 0.0) throw config_error("split ratios must be non-negative");

    Rng rng(seed);
    for (std::size_t i = ids.size(); i > 1; --i)
        std::swap(ids[i - 1], ids[rng.below(i)]);

    const std::size_t n = ids.size();
    const std::size_t n_val = static_cast<std::size_t>(ratios[1] * static_cast<double>(n));
    const std::size_t n_test = static_cast<std::size_t>(ratios[2] * static_cast<double>(n));
    const std::size_t n_train = n - n_val - n_test;

    SplitPlan plan;
    plan.train.assign(ids.begin(), ids.begin() + n_train);
    plan.val.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
    plan.test.assign(ids.begin() + n_train + n_val, ids.end());
    plan.degenerate = (n_train == 0 || n_val == 0 || n_test == 0);
    return plan;
}

struct SplitManifests {
    DatasetManifest train, val, test;
    bool degenerate = false;
};

inline SplitManifests split_manifest(const DatasetManifest& manifest,
                                     const std::array<double, 3>& ratios, std::uint64_t seed) {
    std::vector<std::uint64_t> ids;
    ids.reserve(manifest.sequences.size());
    for (const auto& s : manifest.sequences) ids.push_back(s.id);
    const SplitPlan plan = plan_split(std::move(ids), ratios, seed);

    auto subset = [&](const std::vector<std::uint64_t>& keep, const char* name) {
        DatasetManifest out = manifest;
        out.sequences.clear();
        for (const auto& s : manifest.sequences) {
            if (std::find(keep.begin(), keep.end(), s.id) != keep.end()) {
                SequenceRecord r = s;
                r.split = name;
                out.sequences.push_back(std::move(r));
            }
        }
        return out;
    };

    SplitManifests out{subset(plan.train, "train"), subset(plan.val, "val"),
                       subset(plan.test, "test"), plan.degenerate};
    return out;
}

// ---------------------------------------------------------------------------
// Synthesis
// ---------------------------------------------------------------------------

namespace detail {

struct DomainModels {
    GeneratorParams photo;
    std::vector<GeneratorParams> arts;  // one per style cluster (perturb: exactly one)
    GeneratorParams world_photo;        // reference generators providing "real" endpoints
    GeneratorParams world_art;
};

inline DomainModels make_domain_models(const DatasetConfig& cfg, const std::string& tag) {
    const std::uint64_t domain_seed = mix_seed(cfg.seed, fnv1a64(tag));
    DomainModels dm{new_photoreal_generator(default_generator_spec(mix_seed(domain_seed, 1))),
                    {},
                    new_photoreal_generator(default_generator_spec(mix_seed(domain_seed, 7))),
                    {}};
    dm.world_art = perturb_artistic(dm.world_photo, cfg.perturb_layers, cfg.perturb_magnitude,
                                    mix_seed(domain_seed, 8));

    if (cfg.art_route == ArtRoute::Perturb) {
        dm.arts.push_back(perturb_artistic(dm.photo, cfg.perturb_layers, cfg.perturb_magnitude,
                                           mix_seed(domain_seed, 2)));
        return dm;
    }

    // Few-shot route: cluster a corpus of painting analogs by style, pick the
    // members closest to each centroid, and adapt the photo model toward the
    // mean style of each cluster's representatives.
    const GeneratorParams corpus_gen = perturb_artistic(
        dm.photo, cfg.perturb_layers, cfg.perturb_magnitude, mix_seed(domain_seed, 3));
    std::vector<std::vector<double>> styles;
    styles.reserve(cfg.adapt_corpus);
    for (std::size_t i = 0; i < cfg.adapt_corpus; ++i) {
        const LatentCode z =
            random_latent(corpus_gen.spec, mix_seed(domain_seed, 0x10000 + i));
        styles.push_back(style_vector(generate(corpus_gen, z)).values);
    }
    const KMeansResult km =
        kmeans(styles, std::min(cfg.adapt_clusters, styles.size()), mix_seed(domain_seed, 5));
    const RepresentativeSelection sel = select_representatives(
        styles, km.assignments, km.centroids, cfg.adapt_representatives);
    for (std::size_t c = 0; c < sel.indices.size(); ++c) {
        if (sel.indices[c].empty()) continue;
        StyleVector target;
        target.channels = corpus_gen.spec.channels;
        target.values.assign(styles.front().size(), 0.0);
        for (std::size_t idx : sel.indices[c])
            for (std::size_t d = 0; d < target.values.size(); ++d)
                target.values[d] += styles[idx][d];
        for (double& v : target.values) v /= static_cast<double>(sel.indices[c].size());
        dm.arts.push_back(adapt_freeze_early(dm.photo, target, cfg.fuse_from, cfg.adapt_steps,
                                             cfg.adapt_lr,
                                             mix_seed(domain_seed, 0x20000 + c)));
    }
    if (dm.arts.empty()) throw config_error("adapt route produced no artistic models");
    return dm;
}

}  // namespace detail

struct SynthesizedDataset {
    DatasetManifest manifest;
    std::vector<RankedSequence> sequences;  // aligned with manifest.sequences
};

// Deterministic function of the config (and only the config). Records carry
// shard names and offsets so persisting does not reshuffle anything.
inline SynthesizedDataset synthesize_dataset(const DatasetConfig& cfg) {
    cfg.validate();
    const std::vector<double> grid = cfg.effective_alphas();
    const GeneratorSpec probe = default_generator_spec(0);
    if (cfg.fuse_from >= probe.layer_count())
        throw config_error("dataset config: fuse_from out of range");

    SynthesizedDataset out;
    DatasetManifest& man = out.manifest;
    man.seed = cfg.seed;
    man.domains = cfg.domains;
    man.alphas = grid;
    man.fuse_from = cfg.fuse_from;
    man.height = probe.height;
    man.width = probe.width;
    man.channels = probe.channels;
    man.split_ratios = cfg.split_ratios;

    std::uint64_t next_id = 0;
    for (const auto& tag : cfg.domains) {
        const std::uint64_t domain_seed = mix_seed(cfg.seed, fnv1a64(tag));
        const detail::DomainModels dm = detail::make_domain_models(cfg, tag);

        auto params_hash = [](const GeneratorParams& g) {
            ArscBlocks blocks;
            for (std::size_t i = 0; i < g.layer_count(); ++i) {
                blocks.blocks.emplace_back(g.weights[i].data.begin(), g.weights[i].data.end());
                blocks.blocks.emplace_back(g.biases[i].begin(), g.biases[i].end());
            }
            const auto bytes = arsc_encode(blocks);
            char hex[17];
            std::snprintf(hex, sizeof hex, "%016llx",
                          static_cast<unsigned long long>(
                              fnv1a64(reinterpret_cast<const char*>(bytes.data()), bytes.size())));
            return std::string(hex);
        };
        man.spec_hashes.emplace_back("spec_hash." + tag + ".photo", params_hash(dm.photo));
        for (std::size_t c = 0; c < dm.arts.size(); ++c)
            man.spec_hashes.emplace_back(
                "spec_hash." + tag + ".art" + std::to_string(c), params_hash(dm.arts[c]));

        std::vector<InterpolatedFamily> families;
        families.reserve(dm.arts.size());
        for (const auto& art : dm.arts)
            families.emplace_back(dm.photo, art, grid, cfg.fuse_from);

        const std::size_t image_floats = probe.output_dim();
        std::uint64_t shard_offset = 0;
        for (std::size_t s = 0; s < cfg.sequences_per_domain; ++s) {
            const std::uint64_t latent_seed = mix_seed(domain_seed, 0x100 + s);
            const std::size_t family_idx = s % families.size();
            RankedSequence seq;
            if (cfg.real_endpoints == EndpointMode::None) {
                seq = families[family_idx].sequence(random_latent(probe, latent_seed));
            } else {
                const Anchor anchor = (s % 2 == 0) ? Anchor::Photo : Anchor::Painting;
                const LatentCode z_world = random_latent(probe, mix_seed(latent_seed, 1));
                const ImageGrid target = (anchor == Anchor::Photo)
                                             ? generate(dm.world_photo, z_world)
                                             : generate(dm.world_art, z_world);
                const GeneratorParams& inverter =
                    (anchor == Anchor::Photo) ? dm.photo : dm.arts[family_idx];
                const LatentCode z = invert(inverter, target, cfg.invert_steps, cfg.invert_lr,
                                            mix_seed(latent_seed, 2));
                seq = families[family_idx].sequence(z);
                attach_real_endpoint(seq, target, anchor);
            }
            seq.domain_tag = tag;
            seq.latent_seed = latent_seed;
            for (const auto& img : seq.images)
                if (!all_finite(img.values))
                    throw divergence_error("non-finite image in domain " + tag +
                                           ", sequence " + std::to_string(s));

            SequenceRecord rec;
            rec.id = next_id++;
            rec.domain = tag;
            rec.latent_seed = latent_seed;
            rec.anchor = seq.anchor;
            rec.item_count = seq.size();
            rec.shard_file = tag + ".bin";
            rec.offset = shard_offset;
            shard_offset += rec.item_count * image_floats * 4;
            man.sequences.push_back(std::move(rec));
            out.sequences.push_back(std::move(seq));
        }
    }

    // Stamp split tags; sequences never straddle splits.
    std::vector<std::uint64_t> ids(man.sequences.size());
    std::iota(ids.begin(), ids.end(), 0);
    const SplitPlan plan = plan_split(ids, cfg.split_ratios, mix_seed(cfg.seed, 0x5114));
    for (std::uint64_t id : plan.train) man.sequences[id].split = "train";
    for (std::uint64_t id : plan.val) man.sequences[id].split = "val";
    for (std::uint64_t id : plan.test) man.sequences[id].split = "test";
    return out;
}

// ---------------------------------------------------------------------------
// Persistence: manifest as line-oriented key=value text; one shard per
// domain holding little-endian f32 images in rank order per sequence.
// ---------------------------------------------------------------------------

inline std::string manifest_to_text(const DatasetManifest& man) {
    KvFile kv;
    kv.set("format", "artscore-dataset");
    kv.set("version", "1");
    kv.set("seed", std::to_string(man.seed));
    {
        std::string joined;
        for (std::size_t i = 0; i < man.domains.size(); ++i)
            joined += (i ? "," : "") + man.domains[i];
        kv.set("domains", joined);
    }
    {
        std::string joined;
        for (std::size_t i = 0; i < man.alphas.size(); ++i)
            joined += (i ? "," : "") + format_double(man.alphas[i]);
        kv.set("alphas", joined);
    }
    kv.set("fuse_from", std::to_string(man.fuse_from));
    kv.set("image_height", std::to_string(man.height));
    kv.set("image_width", std::to_string(man.width));
    kv.set("image_channels", std::to_string(man.channels));
    kv.set("split_ratios", format_double(man.split_ratios[0]) + "," +
                               format_double(man.split_ratios[1]) + "," +
                               format_double(man.split_ratios[2]));
    for (const auto& [k, v] : man.spec_hashes) kv.set(k, v);
    kv.set("sequence_count", std::to_string(man.sequences.size()));
    for (const char* split : {"train", "val", "test"})
        kv.set(std::string("count.") + split, std::to_string(man.count_in_split(split)));
    for (const auto& d : man.domains)
        for (const char* split : {"train", "val", "test"})
            kv.set("count." + d + "." + split, std::to_string(man.count_in(d, split)));
    for (const auto& s : man.sequences) {
        kv.set("seq." + std::to_string(s.id),
               s.domain + "," + std::to_string(s.latent_seed) + "," + anchor_name(s.anchor) +
                   "," + std::to_string(s.item_count) + "," + s.shard_file + "," +
                   std::to_string(s.offset) + "," + s.split);
    }
    return kv.to_string();
}

inline DatasetManifest manifest_from_text(const std::string& text) {
    const KvFile kv = KvFile::parse(text);
    if (kv.get_or("format", "") != "artscore-dataset")
        throw io_error("not a dataset manifest");
    DatasetManifest man;
    man.seed = kv.get_u64("seed", 0);
    man.domains = kv.get_strings("domains");
    man.alphas = kv.get_doubles("alphas");
    man.fuse_from = kv.get_size("fuse_from", 0);
    man.height = kv.get_size("image_height", 0);
    man.width = kv.get_size("image_width", 0);
    man.channels = kv.get_size("image_channels", 0);
    const auto ratios = kv.get_doubles("split_ratios");
    if (ratios.size() == 3) man.split_ratios = {ratios[0], ratios[1], ratios[2]};
    for (const auto& [k, v] : kv.entries())
        if (k.rfind("spec_hash.", 0) == 0) man.spec_hashes.emplace_back(k, v);
    const std::size_t count = kv.get_size("sequence_count", 0);
    man.sequences.reserve(count);
    for (std::size_t id = 0; id < count; ++id) {
        const std::string line = kv.require("seq." + std::to_string(id));
        const auto f = split(line, ',');
        if (f.size() != 7) throw io_error("malformed sequence record " + std::to_string(id));
        SequenceRecord rec;
        rec.id = id;
        rec.domain = f[0];
        rec.latent_seed = parse_u64(f[1]);
        rec.anchor = anchor_from_name(f[2]);
        rec.item_count = static_cast<std::size_t>(parse_u64(f[3]));
        rec.shard_file = f[4];
        rec.offset = parse_u64(f[5]);
        rec.split = f[6];
        man.sequences.push_back(std::move(rec));
    }
    return man;
}

// Builds, persists, and returns the manifest. Byte-identical output for a
// fixed config; shard writes are serialized per file.
inline DatasetManifest build_dataset(const DatasetConfig& cfg,
                                     const std::filesystem::path& out_dir) {
    const SynthesizedDataset ds = synthesize_dataset(cfg);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw io_error("cannot create dataset directory: " + out_dir.string());

    for (const auto& tag : ds.manifest.domains) {
        std::vector<unsigned char> bytes;
        for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
            if (ds.manifest.sequences[i].domain != tag) continue;
            for (const auto& img : ds.sequences[i].images)
                for (double v : img.values) le::put_f32(bytes, static_cast<float>(v));
        }
        write_file_bytes(out_dir / (tag + ".bin"), bytes);
    }
    write_file_text(out_dir / "manifest.txt", manifest_to_text(ds.manifest));
    return ds.manifest;
}

inline DatasetManifest load_manifest(const std::filesystem::path& dataset_dir) {
    return manifest_from_text(read_file_text(dataset_dir / "manifest.txt"));
}

// Loads the sequences of one split ("" loads everything). Image values are
// the f32 shard values widened back to double.
inline std::vector<RankedSequence> load_split(const std::filesystem::path& dataset_dir,
                                              const DatasetManifest& man,
                                              const std::string& split) {
    std::vector<RankedSequence> out;
    std::unordered_map<std::string, std::vector<unsigned char>> shards;
    for (const auto& rec : man.sequences) {
        if (!split.empty() && rec.split != split) continue;
        auto it = shards.find(rec.shard_file);
        if (it == shards.end())
            it = shards.emplace(rec.shard_file, read_file_bytes(dataset_dir / rec.shard_file))
                     .first;
        const auto& bytes = it->second;
        const std::size_t image_floats = man.height * man.width * man.channels;
        const std::size_t need = rec.offset + rec.item_count * image_floats * 4;
        if (bytes.size() < need)
            throw io_error("shard " + rec.shard_file + " shorter than manifest expects");

        RankedSequence seq;
        seq.domain_tag = rec.domain;
        seq.latent_seed = rec.latent_seed;
        seq.anchor = rec.anchor;
        seq.alphas = man.alphas;
        le::Reader r{bytes.data() + rec.offset, bytes.data() + bytes.size()};
        for (std::size_t i = 0; i < rec.item_count; ++i) {
            ImageGrid img(man.height, man.width, man.channels);
            for (auto& v : img.values) v = static_cast<double>(r.f32());
            seq.images.push_back(std::move(img));
        }
        seq.ranks.resize(rec.item_count);
        std::iota(seq.ranks.begin(), seq.ranks.end(), 0);
        seq.validate();
        out.push_back(std::move(seq));
    }
    return out;
}

}  // namespace artscore
