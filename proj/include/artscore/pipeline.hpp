#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "artscore/checkpoint.hpp"
#include "artscore/core.hpp"
#include "artscore/dataset.hpp"
#include "artscore/evaluation.hpp"
#include "artscore/ranker.hpp"
#include "artscore/serial.hpp"

namespace artscore {

// ---------------------------------------------------------------------------
// Scorer evaluation on held-out sequences: mean NDCG, within-sequence pair
// accuracy (pairs at least `within_gap` rank positions apart), and accuracy
// on sampled cross-sequence pairs (ranks at least `cross_gap` apart).
// ---------------------------------------------------------------------------

struct ScorerEvaluation {
    double mean_ndcg = 0.0;
    double within_accuracy = 0.0;
    std::size_t within_pairs = 0;
    double cross_accuracy = 0.0;
    std::size_t cross_pairs = 0;
};

inline ScorerEvaluation evaluate_scorer(const ScorerParams& params,
                                        const std::vector<RankedSequence>& sequences,
                                        std::size_t within_gap = 2, std::size_t cross_gap = 3,
                                        std::size_t cross_budget = 2000,
                                        std::uint64_t seed = 0) {
    if (sequences.empty()) throw config_error("evaluate_scorer: no sequences");
    ScorerEvaluation out;

    std::vector<std::vector<double>> all_scores(sequences.size());
    double ndcg_sum = 0.0;
    double within_correct = 0.0;
    std::size_t within_total = 0;
    for (std::size_t s = 0; s < sequences.size(); ++s) {
        const auto& seq = sequences[s];
        auto& scores = all_scores[s];
        scores.resize(seq.size());
        std::vector<double> relevance(seq.size());
        for (std::size_t i = 0; i < seq.size(); ++i) {
            scores[i] = score(params, seq.images[i], ScoreMode::Eval);
            relevance[i] = static_cast<double>(seq.ranks[i]);
        }
        ndcg_sum += ndcg(scores, relevance);
        for (std::size_t i = 0; i < seq.size(); ++i) {
            for (std::size_t j = i + 1; j < seq.size(); ++j) {
                const std::size_t ri = seq.ranks[i], rj = seq.ranks[j];
                const std::size_t gap = ri > rj ? ri - rj : rj - ri;
                if (gap < within_gap) continue;
                ++within_total;
                const bool truth_i = ri > rj;
                if (scores[i] == scores[j]) {
                    within_correct += 0.5;
                } else if ((scores[i] > scores[j]) == truth_i) {
                    within_correct += 1.0;
                }
            }
        }
    }
    out.mean_ndcg = ndcg_sum / static_cast<double>(sequences.size());
    out.within_pairs = within_total;
    out.within_accuracy = within_total ? within_correct / static_cast<double>(within_total) : 0.0;

    if (sequences.size() >= 2 && cross_budget > 0) {
        Rng rng(mix_seed(seed, 0xC805));
        double correct = 0.0;
        std::size_t total = 0;
        std::size_t attempts = 0;
        const std::size_t max_attempts = cross_budget * 16;
        while (total < cross_budget && attempts < max_attempts) {
            ++attempts;
            const std::size_t sa = static_cast<std::size_t>(rng.below(sequences.size()));
            std::size_t sb = static_cast<std::size_t>(rng.below(sequences.size() - 1));
            if (sb >= sa) ++sb;
            const auto& qa = sequences[sa];
            const auto& qb = sequences[sb];
            const std::size_t ia = static_cast<std::size_t>(rng.below(qa.size()));
            const std::size_t ib = static_cast<std::size_t>(rng.below(qb.size()));
            const std::size_t ra = qa.ranks[ia], rb = qb.ranks[ib];
            const std::size_t gap = ra > rb ? ra - rb : rb - ra;
            if (gap < cross_gap) continue;
            ++total;
            const double da = all_scores[sa][ia];
            const double db = all_scores[sb][ib];
            if (da == db) {
                correct += 0.5;
            } else if ((da > db) == (ra > rb)) {
                correct += 1.0;
            }
        }
        out.cross_pairs = total;
        out.cross_accuracy = total ? correct / static_cast<double>(total) : 0.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Experiment configuration: paths to the stage configs plus ablation
// switches. The master seed overrides the per-stage seeds so one value pins
// the whole run.
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    DatasetConfig dataset;
    TrainConfig training;
    std::filesystem::path out_dir;
    std::uint64_t seed = 0;
    std::optional<std::string> domain_filter;
    std::optional<LossKind> loss_override;
    std::optional<bool> swap_override;
    std::string digest;  // hex digest over all referenced config bytes

    static ExperimentConfig load(const std::filesystem::path& path,
                                 const std::optional<std::filesystem::path>& out_override =
                                     std::nullopt) {
        if (!std::filesystem::exists(path))
            throw config_error("experiment config not found: " + path.string());
        const std::string text = read_file_text(path);
        const KvFile kv = KvFile::parse(text);
        const auto base = path.parent_path();

        auto resolve = [&](const std::string& key) {
            std::filesystem::path p = kv.require(key);
            if (p.is_relative()) p = base / p;
            if (!std::filesystem::exists(p))
                throw config_error(key + " does not exist: " + p.string());
            return p;
        };

        ExperimentConfig cfg;
        const auto dataset_path = resolve("dataset_config");
        const auto train_path = resolve("train_config");
        const std::string dataset_text = read_file_text(dataset_path);
        const std::string train_text = read_file_text(train_path);
        cfg.dataset = DatasetConfig::from_kv(KvFile::parse(dataset_text));
        cfg.training = TrainConfig::from_kv(KvFile::parse(train_text));
        cfg.seed = kv.get_u64("seed", 0);
        if (out_override) {
            cfg.out_dir = *out_override;
        } else {
            cfg.out_dir = kv.get_or("out_dir", "out");
            if (cfg.out_dir.is_relative()) cfg.out_dir = base / cfg.out_dir;
        }
        if (kv.has("domain_filter")) {
            cfg.domain_filter = kv.require("domain_filter");
            if (std::find(cfg.dataset.domains.begin(), cfg.dataset.domains.end(),
                          *cfg.domain_filter) == cfg.dataset.domains.end())
                throw config_error("domain_filter names an unknown domain: " +
                                   *cfg.domain_filter);
        }
        if (kv.has("loss")) cfg.loss_override = loss_kind_from_name(kv.require("loss"));
        if (kv.has("swap")) cfg.swap_override = kv.get_bool("swap", true);

        char hex[17];
        const std::uint64_t digest =
            fnv1a64(text) ^ (fnv1a64(dataset_text) * 3) ^ (fnv1a64(train_text) * 5);
        std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(digest));
        cfg.digest = hex;

        // The master seed pins both stages.
        cfg.dataset.seed = mix_seed(cfg.seed, 1);
        cfg.training.seed = mix_seed(cfg.seed, 2);
        return cfg;
    }
};

struct PipelineResult {
    DatasetManifest manifest;
    TrainReport report;
    ScorerEvaluation test_eval;
    std::filesystem::path checkpoint;
    std::filesystem::path summary;
};

namespace detail {

inline std::vector<RankedSequence> filter_domain(std::vector<RankedSequence> seqs,
                                                 const std::optional<std::string>& domain) {
    if (!domain) return seqs;
    std::vector<RankedSequence> out;
    for (auto& s : seqs)
        if (s.domain_tag == *domain) out.push_back(std::move(s));
    if (out.empty()) throw config_error("domain filter left no sequences: " + *domain);
    return out;
}

inline TrainConfig effective_train_config(const ExperimentConfig& cfg) {
    TrainConfig tc = cfg.training;
    if (cfg.loss_override) tc.loss_kind = *cfg.loss_override;
    if (cfg.swap_override && !*cfg.swap_override) tc.swap_probability = 0.0;
    return tc;
}

template <typename Fn>
auto run_stage(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const config_error& e) {
        throw config_error(std::string("stage ") + name + ": " + e.what());
    } catch (const shape_error& e) {
        throw shape_error(std::string("stage ") + name + ": " + e.what());
    } catch (const divergence_error& e) {
        throw divergence_error(std::string("stage ") + name + ": " + e.what());
    } catch (const io_error& e) {
        throw io_error(std::string("stage ") + name + ": " + e.what());
    }
}

}  // namespace detail

// build-dataset -> train -> eval, in order. Emits manifest, checkpoint,
// train report, and an evaluation summary (text plus CSV). A `.stale` marker
// exists while a run is in flight, so partial artifacts are recognizable.
// Byte-identical outputs for identical (config, seed).
inline PipelineResult run_pipeline(const ExperimentConfig& cfg) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) throw io_error("cannot create output directory: " + cfg.out_dir.string());
    const auto stale_marker = cfg.out_dir / ".stale";
    write_file_text(stale_marker, "run in flight\n");

    PipelineResult result;
    const auto dataset_dir = cfg.out_dir / "dataset";
    result.manifest = detail::run_stage(
        "build-dataset", [&] { return build_dataset(cfg.dataset, dataset_dir); });

    const TrainConfig tc = detail::effective_train_config(cfg);
    TrainResult trained = detail::run_stage("train", [&] {
        auto train_seqs = detail::filter_domain(
            load_split(dataset_dir, result.manifest, "train"), cfg.domain_filter);
        const auto val_seqs = load_split(dataset_dir, result.manifest, "val");
        return train(train_seqs, val_seqs, tc);
    });
    result.checkpoint = cfg.out_dir / "scorer.arsc";
    save_scorer(result.checkpoint, trained.params);
    trained.report.checkpoint_path = "scorer.arsc";
    // Pipeline outputs embed the master seed and the config digest.
    write_file_text(cfg.out_dir / "train_report.txt",
                    "seed=" + std::to_string(cfg.seed) + "\nconfig_digest=" + cfg.digest +
                        "\n" + trained.report.to_text());
    result.report = trained.report;

    result.test_eval = detail::run_stage("eval", [&] {
        // Evaluate the persisted parameters so the summary reflects exactly
        // what the checkpoint will reproduce.
        const ScorerParams persisted = load_scorer(result.checkpoint);
        const auto test_seqs = load_split(dataset_dir, result.manifest, "test");
        return evaluate_scorer(persisted, test_seqs, 2, 3, 2000, cfg.seed);
    });

    KvFile summary;
    summary.set("seed", std::to_string(cfg.seed));
    summary.set("config_digest", cfg.digest);
    summary.set("sequences", std::to_string(result.manifest.sequences.size()));
    summary.set("train_sequences", std::to_string(result.manifest.count_in_split("train")));
    summary.set("val_sequences", std::to_string(result.manifest.count_in_split("val")));
    summary.set("test_sequences", std::to_string(result.manifest.count_in_split("test")));
    summary.set("loss", loss_kind_name(tc.loss_kind));
    summary.set("swap_probability", format_double(tc.swap_probability));
    if (cfg.domain_filter) summary.set("domain_filter", *cfg.domain_filter);
    summary.set("best_epoch", std::to_string(result.report.best_epoch));
    summary.set("best_val_loss", format_double(result.report.val_loss[result.report.best_epoch]));
    summary.set("test_ndcg", format_double(result.test_eval.mean_ndcg));
    summary.set("test_pairwise_accuracy", format_double(result.test_eval.within_accuracy));
    summary.set("test_pairwise_pairs", std::to_string(result.test_eval.within_pairs));
    summary.set("test_cross_accuracy", format_double(result.test_eval.cross_accuracy));
    summary.set("test_cross_pairs", std::to_string(result.test_eval.cross_pairs));
    result.summary = cfg.out_dir / "summary.txt";
    summary.save(result.summary);
    {
        std::string csv = "key,value\n";
        for (const auto& [k, v] : summary.entries()) csv += k + "," + v + "\n";
        write_file_text(cfg.out_dir / "summary.csv", csv);
    }

    std::filesystem::remove(stale_marker, ec);
    return result;
}

// ---------------------------------------------------------------------------
// Ablation grid: full model, one variant per single training domain, the MSE
// objective, and no-swap, all trained against one shared dataset and seed and
// judged on the shared held-out test split.
// ---------------------------------------------------------------------------

struct AblationRow {
    std::string variant;
    std::string loss;
    bool swap = true;
    std::string domains;
    ScorerEvaluation eval;
    bool failed = false;
    std::string error;
};

struct AblationReport {
    std::vector<AblationRow> rows;

    // Directional expectation, reported rather than asserted: the full model
    // should not trail any single-domain variant in pairwise accuracy on the
    // shared held-out set.
    std::string soft_summary() const {
        const AblationRow* full = nullptr;
        for (const auto& r : rows)
            if (r.variant == "full" && !r.failed) full = &r;
        if (!full) return "";
        std::string out;
        for (const auto& r : rows) {
            if (r.failed || r.variant.rfind("only_", 0) != 0) continue;
            const bool met = full->eval.within_accuracy >= r.eval.within_accuracy;
            char line[160];
            std::snprintf(line, sizeof line,
                          "soft-check full >= %s pairwise accuracy: %s (%.6f vs %.6f)\n",
                          r.variant.c_str(), met ? "met" : "not met",
                          full->eval.within_accuracy, r.eval.within_accuracy);
            out += line;
        }
        return out;
    }

    std::string to_text() const {
        std::string out =
            "variant            loss     swap  domains     ndcg      within    cross\n";
        for (const auto& r : rows) {
            char line[256];
            if (r.failed) {
                std::snprintf(line, sizeof line, "%-18s FAILED: %s\n", r.variant.c_str(),
                              r.error.c_str());
            } else {
                std::snprintf(line, sizeof line, "%-18s %-8s %-5s %-11s %.6f  %.6f  %.6f\n",
                              r.variant.c_str(), r.loss.c_str(), r.swap ? "on" : "off",
                              r.domains.c_str(), r.eval.mean_ndcg, r.eval.within_accuracy,
                              r.eval.cross_accuracy);
            }
            out += line;
        }
        out += soft_summary();
        return out;
    }
    std::string to_csv() const {
        std::string out = "variant,loss,swap,domains,ndcg,within_accuracy,cross_accuracy,error\n";
        for (const auto& r : rows) {
            out += r.variant + "," + r.loss + "," + (r.swap ? "on" : "off") + "," + r.domains +
                   ",";
            if (r.failed) {
                out += ",,," + r.error + "\n";
            } else {
                out += format_double(r.eval.mean_ndcg) + "," +
                       format_double(r.eval.within_accuracy) + "," +
                       format_double(r.eval.cross_accuracy) + ",\n";
            }
        }
        return out;
    }
};

inline AblationReport run_ablation_grid(const ExperimentConfig& cfg) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) throw io_error("cannot create output directory: " + cfg.out_dir.string());

    const auto dataset_dir = cfg.out_dir / "dataset";
    const DatasetManifest manifest = build_dataset(cfg.dataset, dataset_dir);
    const auto train_all = load_split(dataset_dir, manifest, "train");
    const auto val_seqs = load_split(dataset_dir, manifest, "val");
    const auto test_seqs = load_split(dataset_dir, manifest, "test");

    struct Variant {
        std::string name;
        std::optional<std::string> domain;
        LossKind loss;
        bool swap;
    };
    std::vector<Variant> variants;
    variants.push_back({"full", std::nullopt, cfg.training.loss_kind, true});
    for (const auto& d : cfg.dataset.domains)
        variants.push_back({"only_" + d, d, cfg.training.loss_kind, true});
    variants.push_back({"mse_loss", std::nullopt, LossKind::Mse, true});
    variants.push_back({"no_swap", std::nullopt, cfg.training.loss_kind, false});

    AblationReport report;
    for (const auto& v : variants) {
        AblationRow row;
        row.variant = v.name;
        row.loss = loss_kind_name(v.loss);
        row.swap = v.swap;
        row.domains = v.domain ? *v.domain : "all";
        try {
            TrainConfig tc = cfg.training;  // shared seed across variants
            tc.loss_kind = v.loss;
            if (!v.swap) tc.swap_probability = 0.0;
            std::vector<RankedSequence> train_seqs =
                detail::filter_domain(train_all, v.domain);
            const TrainResult trained = train(train_seqs, val_seqs, tc);
            row.eval = evaluate_scorer(trained.params, test_seqs, 2, 3, 2000, cfg.seed);
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
        }
        report.rows.push_back(std::move(row));
    }

    const std::string stamp =
        "# seed=" + std::to_string(cfg.seed) + "\n# config_digest=" + cfg.digest + "\n";
    write_file_text(cfg.out_dir / "ablation.txt", stamp + report.to_text());
    write_file_text(cfg.out_dir / "ablation.csv", stamp + report.to_csv());
    return report;
}

// ---------------------------------------------------------------------------
// Reference-free scoring of stored images: per-image raw and sigmoid scores
// plus the sigmoid-mean aggregate.
// ---------------------------------------------------------------------------

struct ScoreRow {
    std::string id;
    double raw = 0.0;
    double sig = 0.0;
    bool flagged = false;
};

struct ScoreImagesResult {
    std::vector<ScoreRow> rows;
    double aggregate = 0.0;  // mean of the sigmoid column over unflagged rows
    std::string to_csv() const {
        std::string out = "image,raw_score,sigmoid_score\n";
        for (const auto& r : rows) {
            if (r.flagged) {
                out += r.id + ",shape_mismatch,\n";
            } else {
                out += r.id + "," + format_double(r.raw) + "," + format_double(r.sig) + "\n";
            }
        }
        out += "aggregate," + format_double(aggregate) + ",\n";
        return out;
    }
};

inline ScoreImagesResult score_images(const ScorerParams& scorer,
                                      const std::filesystem::path& dataset_dir,
                                      const std::string& split = "") {
    const DatasetManifest manifest = load_manifest(dataset_dir);
    const auto sequences = load_split(dataset_dir, manifest, split);
    if (sequences.empty()) throw config_error("score_images: no images selected");

    ScoreImagesResult out;
    std::vector<double> sigs;
    std::size_t seq_index = 0;
    for (const auto& rec : manifest.sequences) {
        if (!split.empty() && rec.split != split) continue;
        const auto& seq = sequences[seq_index++];
        for (std::size_t i = 0; i < seq.size(); ++i) {
            ScoreRow row;
            row.id = std::to_string(rec.id) + "/" + std::to_string(seq.ranks[i]);
            if (seq.images[i].size() != scorer.input_dim()) {
                row.flagged = true;  // record and continue with the rest
            } else {
                row.raw = score(scorer, seq.images[i], ScoreMode::Eval);
                row.sig = sigmoid(row.raw);
                sigs.push_back(row.sig);
            }
            out.rows.push_back(std::move(row));
        }
    }
    if (sigs.empty()) throw config_error("score_images: every image was flagged");
    out.aggregate = artscore_of_algorithm([&] {
        std::vector<double> raws;
        for (const auto& r : out.rows)
            if (!r.flagged) raws.push_back(r.raw);
        return raws;
    }());
    return out;
}

}  // namespace artscore
