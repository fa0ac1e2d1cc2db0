#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <set>

#include "artscore/clustering.hpp"
#include "artscore/dataset.hpp"
#include "artscore/style.hpp"

using namespace artscore;

namespace {

std::filesystem::path temp_dir(const std::string& tag) {
    const auto dir = std::filesystem::temp_directory_path() / ("artscore_test_" + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

GeneratorSpec tiny_spec(std::uint64_t seed) {
    GeneratorSpec spec;
    spec.latent_dim = 3;
    spec.layer_widths = {3, 6, 12};
    spec.activations = {Activation::Tanh, Activation::Tanh};
    spec.height = 2;
    spec.width = 2;
    spec.channels = 3;
    spec.seed = seed;
    return spec;
}

DatasetConfig quick_config() {
    DatasetConfig cfg;
    cfg.domains = {"face", "horse", "landscape"};
    cfg.sequences_per_domain = 4;
    cfg.alphas = {0.0, 0.5, 1.0};
    cfg.fuse_from = 2;
    cfg.seed = 2024;
    cfg.perturb_magnitude = 0.05;
    return cfg;
}

}  // namespace

// --------------------------------------------------------------------------
// Gram matrix / style vector
// --------------------------------------------------------------------------

TEST_CASE("gram matrix hand value") {
    Matrix f(1, 3);
    f.data = {1.0, 2.0, 2.0};
    const Matrix g = gram_matrix(f);
    REQUIRE(g.rows == 1);
    REQUIRE(g.at(0, 0) == Catch::Approx(3.0).epsilon(1e-12));  // (1+4+4)/3
}

TEST_CASE("gram of the zero matrix is zero") {
    Matrix f(3, 4);
    const Matrix g = gram_matrix(f);
    for (double v : g.data) REQUIRE(v == 0.0);
}

TEST_CASE("gram is symmetric positive semidefinite") {
    Rng rng(5);
    Matrix f(4, 9);
    for (double& v : f.data) v = rng.normal();
    const Matrix g = gram_matrix(f);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) REQUIRE(g.at(i, j) == g.at(j, i));
    // Quadratic-form oracle: x^T G x >= -1e-9 for random probes.
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x(4);
        for (double& v : x) v = rng.normal();
        double quad = 0.0;
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j) quad += x[i] * g.at(i, j) * x[j];
        REQUIRE(quad >= -1e-9);
    }
}

TEST_CASE("gram rejects empty features") {
    Matrix f(0, 0);
    REQUIRE_THROWS_AS(gram_matrix(f), shape_error);
}

TEST_CASE("style vector of a constant image is v squared everywhere") {
    ImageGrid img(2, 2, 3);
    for (double& v : img.values) v = 0.5;
    const StyleVector sv = style_vector(img);
    REQUIRE(sv.values.size() == 9);
    for (double v : sv.values) REQUIRE(v == Catch::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("style vector is symmetric in the channel pair") {
    Rng rng(8);
    ImageGrid img(4, 4, 3);
    for (double& v : img.values) v = rng.uniform() * 2 - 1;
    const StyleVector sv = style_vector(img);
    REQUIRE(sv.values.size() == 9);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            REQUIRE(sv.values[i * 3 + j] == sv.values[j * 3 + i]);
}

TEST_CASE("style vector is invariant to spatial pixel permutations") {
    Rng rng(9);
    ImageGrid img(4, 4, 3);
    for (double& v : img.values) v = rng.uniform() * 2 - 1;
    const StyleVector base = style_vector(img);

    for (int trial = 0; trial < 10; ++trial) {
        std::vector<std::size_t> perm(16);
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = perm.size(); i > 1; --i)
            std::swap(perm[i - 1], perm[rng.below(i)]);
        ImageGrid shuffled(4, 4, 3);
        for (std::size_t p = 0; p < 16; ++p)
            for (std::size_t c = 0; c < 3; ++c)
                shuffled.values[perm[p] * 3 + c] = img.values[p * 3 + c];
        const StyleVector sv = style_vector(shuffled);
        for (std::size_t d = 0; d < 9; ++d)
            REQUIRE(sv.values[d] == Catch::Approx(base.values[d]).margin(1e-12));
    }
}

// --------------------------------------------------------------------------
// K-Means
// --------------------------------------------------------------------------

TEST_CASE("kmeans recovers two well-separated blobs") {
    Rng rng(13);
    std::vector<std::vector<double>> points;
    for (int i = 0; i < 20; ++i)
        points.push_back({rng.normal() * 0.2, rng.normal() * 0.2});
    for (int i = 0; i < 20; ++i)
        points.push_back({10.0 + rng.normal() * 0.2, 10.0 + rng.normal() * 0.2});

    const KMeansResult res = kmeans(points, 2, 99);
    const std::size_t first = res.assignments[0];
    for (int i = 0; i < 20; ++i) REQUIRE(res.assignments[i] == first);
    for (int i = 20; i < 40; ++i) REQUIRE(res.assignments[i] == 1 - first);
}

TEST_CASE("kmeans with k equal to point count has zero inertia") {
    std::vector<std::vector<double>> points = {{0, 0}, {1, 0}, {5, 5}, {-3, 2}};
    const KMeansResult res = kmeans(points, points.size(), 7);
    REQUIRE(res.inertia == Catch::Approx(0.0).margin(1e-18));
    std::set<std::size_t> used(res.assignments.begin(), res.assignments.end());
    REQUIRE(used.size() == points.size());
}

TEST_CASE("kmeans converged inertia never exceeds one iteration") {
    Rng rng(31);
    std::vector<std::vector<double>> points;
    for (int i = 0; i < 60; ++i) points.push_back({rng.normal(), rng.normal(), rng.normal()});
    for (std::uint64_t seed : {0ull, 1ull, 2ull}) {
        const KMeansResult one = kmeans(points, 4, seed, 1);
        const KMeansResult full = kmeans(points, 4, seed, 300);
        REQUIRE(full.inertia <= one.inertia + 1e-12);
    }
}

TEST_CASE("kmeans inertia trace is non-increasing for every seed") {
    Rng rng(32);
    std::vector<std::vector<double>> points;
    for (int i = 0; i < 50; ++i) points.push_back({rng.uniform(), rng.uniform()});
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const KMeansResult res = kmeans(points, 5, seed);
        for (std::size_t i = 1; i < res.inertia_trace.size(); ++i)
            REQUIRE(res.inertia_trace[i] <= res.inertia_trace[i - 1] + 1e-12);
    }
}

TEST_CASE("kmeans rejects k larger than the point count") {
    std::vector<std::vector<double>> points = {{0.0}, {1.0}};
    REQUIRE_THROWS_AS(kmeans(points, 3, 0), config_error);
}

TEST_CASE("kmeans survives fully degenerate duplicate points") {
    // Every point identical: clusters empty out and the re-seed policy fires.
    std::vector<std::vector<double>> points(6, {2.0, -1.0});
    const KMeansResult res = kmeans(points, 3, 11);
    REQUIRE(res.inertia == 0.0);
    for (std::size_t i = 1; i < res.inertia_trace.size(); ++i)
        REQUIRE(res.inertia_trace[i] <= res.inertia_trace[i - 1] + 1e-12);
}

// --------------------------------------------------------------------------
// Representative selection
// --------------------------------------------------------------------------

TEST_CASE("selecting m equal to the cluster size returns the whole cluster") {
    std::vector<std::vector<double>> points = {{0}, {1}, {2}};
    std::vector<std::size_t> assign = {0, 0, 0};
    std::vector<std::vector<double>> centroids = {{1.0}};
    const auto sel = select_representatives(points, assign, centroids, 3);
    REQUIRE(sel.indices[0].size() == 3);
    REQUIRE_FALSE(sel.short_cluster[0]);
}

TEST_CASE("selecting one representative matches a linear scan") {
    Rng rng(44);
    std::vector<std::vector<double>> points;
    for (int i = 0; i < 30; ++i) points.push_back({rng.normal(), rng.normal()});
    const KMeansResult km = kmeans(points, 3, 17);
    const auto sel = select_representatives(points, km.assignments, km.centroids, 1);
    for (std::size_t c = 0; c < km.centroids.size(); ++c) {
        // Oracle: direct scan for the nearest member.
        double best = 1e300;
        std::size_t arg = points.size();
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (km.assignments[i] != c) continue;
            double d = 0;
            for (std::size_t k = 0; k < 2; ++k) {
                const double diff = points[i][k] - km.centroids[c][k];
                d += diff * diff;
            }
            if (d < best) {
                best = d;
                arg = i;
            }
        }
        REQUIRE(sel.indices[c].size() == 1);
        REQUIRE(sel.indices[c][0] == arg);
    }
}

TEST_CASE("equidistant representatives break ties toward the lower index") {
    std::vector<std::vector<double>> points = {{-1.0}, {1.0}, {5.0}};
    std::vector<std::size_t> assign = {0, 0, 0};
    std::vector<std::vector<double>> centroids = {{0.0}};
    const auto sel = select_representatives(points, assign, centroids, 1);
    REQUIRE(sel.indices[0][0] == 0);
}

TEST_CASE("short clusters are returned whole and flagged") {
    std::vector<std::vector<double>> points = {{0.0}, {4.0}};
    std::vector<std::size_t> assign = {0, 1};
    std::vector<std::vector<double>> centroids = {{0.0}, {4.0}};
    const auto sel = select_representatives(points, assign, centroids, 5);
    REQUIRE(sel.indices[0] == std::vector<std::size_t>{0});
    REQUIRE(sel.short_cluster[0]);
    REQUIRE(sel.short_cluster[1]);
}

// --------------------------------------------------------------------------
// Sequence building
// --------------------------------------------------------------------------

TEST_CASE("the paper grid plus a real endpoint yields twelve ranked items") {
    const GeneratorParams photo = new_photoreal_generator(tiny_spec(1));
    const GeneratorParams art = perturb_artistic(photo, 1, 0.05, 2);
    std::vector<double> grid(11);
    for (int i = 0; i <= 10; ++i) grid[i] = i / 10.0;
    const LatentCode z = random_latent(photo.spec, 3);
    const ImageGrid real = generate(photo, random_latent(photo.spec, 4));
    const RankedSequence seq = build_sequence(photo, art, z, grid, 1, &real, Anchor::Photo);
    REQUIRE(seq.size() == 12);
    for (std::size_t i = 0; i < 12; ++i) REQUIRE(seq.ranks[i] == i);
    seq.validate();
    // Photo anchor sits at rank 0.
    REQUIRE(seq.images[0].values == real.values);
}

TEST_CASE("painting anchors land at the top rank") {
    const GeneratorParams photo = new_photoreal_generator(tiny_spec(1));
    const GeneratorParams art = perturb_artistic(photo, 1, 0.05, 2);
    const LatentCode z = random_latent(photo.spec, 3);
    const ImageGrid real = generate(art, random_latent(photo.spec, 4));
    const RankedSequence seq =
        build_sequence(photo, art, z, {0.0, 0.5, 1.0}, 1, &real, Anchor::Painting);
    REQUIRE(seq.size() == 4);
    REQUIRE(seq.images.back().values == real.values);
}

TEST_CASE("a single alpha produces one image with rank zero") {
    const GeneratorParams photo = new_photoreal_generator(tiny_spec(1));
    const GeneratorParams art = perturb_artistic(photo, 1, 0.05, 2);
    const RankedSequence seq =
        build_sequence(photo, art, random_latent(photo.spec, 5), {0.0}, 1);
    REQUIRE(seq.size() == 1);
    REQUIRE(seq.ranks == std::vector<std::size_t>{0});
}

TEST_CASE("sequence building is deterministic") {
    const GeneratorParams photo = new_photoreal_generator(tiny_spec(1));
    const GeneratorParams art = perturb_artistic(photo, 1, 0.05, 2);
    const LatentCode z = random_latent(photo.spec, 6);
    const RankedSequence a = build_sequence(photo, art, z, {0.0, 0.25, 1.0}, 1);
    const RankedSequence b = build_sequence(photo, art, z, {0.0, 0.25, 1.0}, 1);
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a.images[i].values == b.images[i].values);
}

TEST_CASE("alpha grids must ascend strictly within range") {
    const GeneratorParams photo = new_photoreal_generator(tiny_spec(1));
    const GeneratorParams art = perturb_artistic(photo, 1, 0.05, 2);
    const LatentCode z = random_latent(photo.spec, 6);
    REQUIRE_THROWS_AS(build_sequence(photo, art, z, {0.5, 0.5}, 1), config_error);
    REQUIRE_THROWS_AS(build_sequence(photo, art, z, {0.0, 1.5}, 1), config_error);
    REQUIRE_THROWS_AS(build_sequence(photo, art, z, {}, 1), config_error);
}

// --------------------------------------------------------------------------
// Splits
// --------------------------------------------------------------------------

TEST_CASE("ratio (1,0,0) puts everything in training") {
    std::vector<std::uint64_t> ids(10);
    std::iota(ids.begin(), ids.end(), 0);
    const SplitPlan plan = plan_split(ids, {1.0, 0.0, 0.0}, 5);
    REQUIRE(plan.train.size() == 10);
    REQUIRE(plan.val.empty());
    REQUIRE(plan.test.empty());
    REQUIRE(plan.degenerate);
}

TEST_CASE("floor rule: ten sequences split 8/1/1") {
    std::vector<std::uint64_t> ids(10);
    std::iota(ids.begin(), ids.end(), 0);
    const SplitPlan plan = plan_split(ids, {0.8, 0.1, 0.1}, 5);
    REQUIRE(plan.train.size() == 8);
    REQUIRE(plan.val.size() == 1);
    REQUIRE(plan.test.size() == 1);
}

TEST_CASE("splits are disjoint and complete across random configurations") {
    Rng rng(61);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 1 + rng.below(200);
        double a = 0.1 + rng.uniform() * 0.8;
        double b = (1.0 - a) * rng.uniform();
        double c = 1.0 - a - b;
        std::vector<std::uint64_t> ids(n);
        std::iota(ids.begin(), ids.end(), 0);
        const SplitPlan plan = plan_split(ids, {a, b, c}, rng.next_u64());
        std::set<std::uint64_t> seen;
        for (const auto* part : {&plan.train, &plan.val, &plan.test})
            for (std::uint64_t id : *part) REQUIRE(seen.insert(id).second);
        REQUIRE(seen.size() == n);
    }
}

TEST_CASE("split ratios must sum to one") {
    std::vector<std::uint64_t> ids = {0, 1, 2};
    REQUIRE_THROWS_AS(plan_split(ids, {0.5, 0.1, 0.1}, 0), config_error);
}

TEST_CASE("split_manifest produces three consistent views") {
    DatasetManifest man;
    man.domains = {"d"};
    for (std::uint64_t i = 0; i < 20; ++i) {
        SequenceRecord rec;
        rec.id = i;
        rec.domain = "d";
        rec.item_count = 3;
        rec.shard_file = "d.bin";
        man.sequences.push_back(rec);
    }
    const SplitManifests views = split_manifest(man, {0.8, 0.1, 0.1}, 3);
    REQUIRE(views.train.sequences.size() == 16);
    REQUIRE(views.val.sequences.size() == 2);
    REQUIRE(views.test.sequences.size() == 2);
    for (const auto& s : views.val.sequences) REQUIRE(s.split == "val");
}

// --------------------------------------------------------------------------
// Dataset build and persistence
// --------------------------------------------------------------------------

TEST_CASE("a 3x4 build totals 12 sequences with the paper split rule") {
    DatasetConfig cfg = quick_config();
    cfg.sequences_per_domain = 10;
    const SynthesizedDataset ds = synthesize_dataset(cfg);
    REQUIRE(ds.manifest.sequences.size() == 30);
    REQUIRE(ds.manifest.count_in_split("train") == 24);
    REQUIRE(ds.manifest.count_in_split("val") == 3);
    REQUIRE(ds.manifest.count_in_split("test") == 3);
}

TEST_CASE("pseudo-rank is monotone in alpha within fresh sequences") {
    const SynthesizedDataset ds = synthesize_dataset(quick_config());
    for (const auto& seq : ds.sequences) {
        REQUIRE(seq.size() == seq.alphas.size());
        for (std::size_t i = 0; i < seq.size(); ++i) REQUIRE(seq.ranks[i] == i);
        for (std::size_t i = 1; i < seq.alphas.size(); ++i)
            REQUIRE(seq.alphas[i] > seq.alphas[i - 1]);
    }
}

TEST_CASE("dataset builds are byte-reproducible from config and seed") {
    const auto dir_a = temp_dir("ds_a");
    const auto dir_b = temp_dir("ds_b");
    const DatasetConfig cfg = quick_config();
    build_dataset(cfg, dir_a);
    build_dataset(cfg, dir_b);
    for (const char* name : {"manifest.txt", "face.bin", "horse.bin", "landscape.bin"}) {
        const auto a = read_file_bytes(dir_a / name);
        const auto b = read_file_bytes(dir_b / name);
        REQUIRE_FALSE(a.empty());
        REQUIRE(a == b);
    }
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
}

TEST_CASE("manifests round-trip through text") {
    const SynthesizedDataset ds = synthesize_dataset(quick_config());
    const DatasetManifest back = manifest_from_text(manifest_to_text(ds.manifest));
    REQUIRE(back.sequences.size() == ds.manifest.sequences.size());
    REQUIRE(back.alphas == ds.manifest.alphas);
    REQUIRE(back.domains == ds.manifest.domains);
    for (std::size_t i = 0; i < back.sequences.size(); ++i) {
        REQUIRE(back.sequences[i].domain == ds.manifest.sequences[i].domain);
        REQUIRE(back.sequences[i].offset == ds.manifest.sequences[i].offset);
        REQUIRE(back.sequences[i].split == ds.manifest.sequences[i].split);
        REQUIRE(back.sequences[i].item_count == ds.manifest.sequences[i].item_count);
    }
}

TEST_CASE("loaded shards carry f32-rounded image values in rank order") {
    const auto dir = temp_dir("ds_load");
    const DatasetConfig cfg = quick_config();
    const DatasetManifest man = build_dataset(cfg, dir);
    const SynthesizedDataset ds = synthesize_dataset(cfg);
    const auto all = load_split(dir, man, "");
    REQUIRE(all.size() == ds.sequences.size());
    for (std::size_t s = 0; s < all.size(); ++s) {
        REQUIRE(all[s].domain_tag == ds.sequences[s].domain_tag);
        REQUIRE(all[s].size() == ds.sequences[s].size());
        for (std::size_t i = 0; i < all[s].size(); ++i)
            for (std::size_t k = 0; k < all[s].images[i].size(); ++k)
                REQUIRE(all[s].images[i].values[k] ==
                        static_cast<double>(
                            static_cast<float>(ds.sequences[s].images[i].values[k])));
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("adapt route produces per-cluster artistic models") {
    DatasetConfig cfg = quick_config();
    cfg.domains = {"face"};
    cfg.sequences_per_domain = 3;
    cfg.art_route = ArtRoute::Adapt;
    cfg.adapt_corpus = 12;
    cfg.adapt_clusters = 2;
    cfg.adapt_representatives = 3;
    cfg.adapt_steps = 10;
    const SynthesizedDataset ds = synthesize_dataset(cfg);
    REQUIRE(ds.manifest.sequences.size() == 3);
    std::size_t art_hashes = 0;
    for (const auto& [k, v] : ds.manifest.spec_hashes)
        if (k.find(".art") != std::string::npos) ++art_hashes;
    REQUIRE(art_hashes == 2);
}

TEST_CASE("inverted endpoints extend sequences by one anchored item") {
    DatasetConfig cfg = quick_config();
    cfg.domains = {"face"};
    cfg.sequences_per_domain = 2;
    cfg.real_endpoints = EndpointMode::Inverted;
    cfg.invert_steps = 10;
    const SynthesizedDataset ds = synthesize_dataset(cfg);
    REQUIRE(ds.sequences[0].anchor == Anchor::Photo);
    REQUIRE(ds.sequences[1].anchor == Anchor::Painting);
    for (const auto& seq : ds.sequences) {
        REQUIRE(seq.size() == cfg.alphas.size() + 1);
        seq.validate();
    }
}

TEST_CASE("dataset config parsing validates keys") {
    KvFile kv;
    kv.set("domains", "a,b");
    kv.set("sequences_per_domain", "5");
    kv.set("alpha_count", "4");
    kv.set("split_ratios", "0.5,0.25,0.25");
    const DatasetConfig cfg = DatasetConfig::from_kv(kv);
    REQUIRE(cfg.domains.size() == 2);
    REQUIRE(cfg.alphas == std::vector<double>{0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0});

    KvFile bad;
    bad.set("split_ratios", "0.9,0.2,0.1");
    REQUIRE_THROWS_AS(DatasetConfig::from_kv(bad), config_error);
}
