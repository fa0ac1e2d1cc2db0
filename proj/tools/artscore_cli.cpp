// Command-line surface for the artness scoring pipeline.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime/divergence,
// 4 I/O failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "artscore/artscore.hpp"

namespace {

using namespace artscore;

std::optional<std::filesystem::path> opt_path(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return std::filesystem::path(s);
}

double oriented_goodness(double value, Orientation o) {
    return o == Orientation::LargerBetter ? value : -value;
}

// Aligns the human reference column to the metric table's algorithm order.
std::vector<double> human_goodness_for(const MetricTable& metrics, const MetricTable& human) {
    if (human.cols() < 1) throw config_error("reference table has no score column");
    std::vector<double> out;
    out.reserve(metrics.rows());
    for (const auto& algo : metrics.algorithms) {
        const auto it = std::find(human.algorithms.begin(), human.algorithms.end(), algo);
        if (it == human.algorithms.end())
            throw config_error("algorithm missing from reference table: " + algo);
        const std::size_t row = static_cast<std::size_t>(it - human.algorithms.begin());
        out.push_back(oriented_goodness(human.values[row][0], human.orientations[0]));
    }
    return out;
}

int run(int argc, char** argv) {
    CLI::App app{"artness scoring pipeline"};
    app.require_subcommand(1);

    // build-dataset
    auto* build = app.add_subcommand("build-dataset", "synthesize a pseudo-ranked dataset");
    std::string build_config, build_out;
    build->add_option("--config", build_config, "dataset config (key=value)")->required();
    build->add_option("--out", build_out, "output directory")->required();
    build->callback([&] {
        const auto cfg = DatasetConfig::from_kv(KvFile::load(build_config));
        const DatasetManifest man = build_dataset(cfg, build_out);
        std::cout << "sequences=" << man.sequences.size() << "\n"
                  << "train=" << man.count_in_split("train") << "\n"
                  << "val=" << man.count_in_split("val") << "\n"
                  << "test=" << man.count_in_split("test") << "\n";
    });

    // train
    auto* tr = app.add_subcommand("train", "train the artness scorer");
    std::string train_data, train_config, train_out;
    tr->add_option("--data", train_data, "dataset directory")->required();
    tr->add_option("--config", train_config, "train config (key=value)")->required();
    tr->add_option("--out", train_out, "checkpoint path")->required();
    tr->callback([&] {
        const TrainConfig cfg = TrainConfig::from_kv(KvFile::load(train_config));
        const DatasetManifest man = load_manifest(train_data);
        const auto train_seqs = load_split(train_data, man, "train");
        const auto val_seqs = load_split(train_data, man, "val");
        TrainResult result = train(train_seqs, val_seqs, cfg);
        save_scorer(train_out, result.params);
        result.report.checkpoint_path = std::filesystem::path(train_out).filename().string();
        const std::string report = result.report.to_text();
        write_file_text(train_out + ".report.txt", report);
        std::cout << report;
    });

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a scorer on a dataset split");
    std::string eval_data, eval_ckpt, eval_split = "test";
    std::size_t eval_gap = 2;
    ev->add_option("--data", eval_data, "dataset directory")->required();
    ev->add_option("--ckpt", eval_ckpt, "scorer checkpoint")->required();
    ev->add_option("--split", eval_split, "split to evaluate (default test)");
    ev->add_option("--min-gap", eval_gap, "minimum rank gap for pair accuracy");
    ev->callback([&] {
        const ScorerParams scorer = load_scorer(eval_ckpt);
        const DatasetManifest man = load_manifest(eval_data);
        const auto seqs = load_split(eval_data, man, eval_split);
        const ScorerEvaluation e = evaluate_scorer(scorer, seqs, eval_gap);
        std::cout << "split=" << eval_split << "\n"
                  << "sequences=" << seqs.size() << "\n"
                  << "ndcg=" << format_double(e.mean_ndcg) << "\n"
                  << "pairwise_accuracy=" << format_double(e.within_accuracy) << "\n"
                  << "pairwise_pairs=" << e.within_pairs << "\n"
                  << "cross_accuracy=" << format_double(e.cross_accuracy) << "\n"
                  << "cross_pairs=" << e.cross_pairs << "\n";
    });

    // score
    auto* sc = app.add_subcommand("score", "score stored images with a checkpoint");
    std::string score_ckpt, score_data, score_split, score_out;
    sc->add_option("--ckpt", score_ckpt, "scorer checkpoint")->required();
    sc->add_option("--data", score_data, "dataset directory")->required();
    sc->add_option("--split", score_split, "restrict to one split (default: all)");
    sc->add_option("--out", score_out, "CSV output path (default: stdout)");
    sc->callback([&] {
        const ScorerParams scorer = load_scorer(score_ckpt);
        const ScoreImagesResult res = score_images(scorer, score_data, score_split);
        const std::string csv = res.to_csv();
        if (score_out.empty()) {
            std::cout << csv;
        } else {
            write_file_text(score_out, csv);
            std::cout << "aggregate=" << format_double(res.aggregate) << "\n";
        }
    });

    // aggregate
    auto* ag = app.add_subcommand("aggregate", "aggregate a metric table");
    std::string agg_table, agg_method = "rank", agg_out;
    ag->add_option("--table", agg_table, "metric CSV")->required();
    ag->add_option("--method", agg_method, "rank|add|multiply")->required();
    ag->add_option("--out", agg_out, "CSV output path (default: stdout)");
    ag->callback([&] {
        const MetricTable table = metric_table_from_csv(read_file_text(agg_table));
        std::vector<double> scores;
        if (agg_method == "rank") {
            scores = aggregate_rank(table);
        } else if (agg_method == "add") {
            scores = aggregate_add(table);
        } else if (agg_method == "multiply") {
            scores = aggregate_multiply(table);
        } else {
            throw config_error("method must be rank, add, or multiply");
        }
        std::string csv = "algorithm," + agg_method + ":smaller\n";
        for (std::size_t i = 0; i < table.rows(); ++i)
            csv += table.algorithms[i] + "," + format_double(scores[i]) + "\n";
        if (agg_out.empty()) {
            std::cout << csv;
        } else {
            write_file_text(agg_out, csv);
        }
    });

    // correlate
    auto* co = app.add_subcommand("correlate",
                                  "Spearman correlation of metrics against a reference");
    std::string cor_table, cor_against;
    co->add_option("--table", cor_table, "metric CSV")->required();
    co->add_option("--against", cor_against, "reference CSV (first column used)")->required();
    co->callback([&] {
        const MetricTable table = metric_table_from_csv(read_file_text(cor_table));
        const MetricTable human = metric_table_from_csv(read_file_text(cor_against));
        const std::vector<double> ref = human_goodness_for(table, human);
        std::cout << "metric,spearman_rho,p_value\n";
        for (std::size_t j = 0; j < table.cols(); ++j) {
            std::vector<double> goodness(table.rows());
            for (std::size_t i = 0; i < table.rows(); ++i)
                goodness[i] = oriented_goodness(table.values[i][j], table.orientations[j]);
            const StatResult r = spearman(goodness, ref);
            std::cout << table.metrics[j] << "," << format_double(r.statistic) << ","
                      << format_double(r.p_value) << "\n";
        }
        if (table.cols() >= 2) {
            const auto emit = [&](const char* name, std::vector<double> agg) {
                for (double& v : agg) v = -v;  // aggregates are smaller-better
                const StatResult r = spearman(agg, ref);
                std::cout << name << "," << format_double(r.statistic) << ","
                          << format_double(r.p_value) << "\n";
            };
            emit("aggregate_rank", aggregate_rank(table));
            emit("aggregate_add", aggregate_add(table));
            emit("aggregate_multiply", aggregate_multiply(table));
        }
    });

    // mcnemar
    auto* mc = app.add_subcommand("mcnemar", "McNemar test on discordant counts");
    std::uint64_t mc_b = 0, mc_c = 0;
    bool mc_corrected = false;
    mc->add_option("--b", mc_b, "count: first metric right, second wrong")->required();
    mc->add_option("--c", mc_c, "count: second metric right, first wrong")->required();
    mc->add_flag("--corrected", mc_corrected, "apply the continuity correction");
    mc->callback([&] {
        const StatResult r = mcnemar(mc_b, mc_c, mc_corrected);
        std::cout << "chi2=" << format_double(r.statistic) << "\n"
                  << "p_value=" << format_double(r.p_value) << "\n"
                  << "method=" << r.method << "\n";
    });

    // ablate
    auto* ab = app.add_subcommand("ablate", "run the ablation grid");
    std::string abl_config, abl_out;
    ab->add_option("--config", abl_config, "experiment config")->required();
    ab->add_option("--out", abl_out, "output directory (overrides config)");
    ab->callback([&] {
        const ExperimentConfig cfg = ExperimentConfig::load(abl_config, opt_path(abl_out));
        const AblationReport report = run_ablation_grid(cfg);
        std::cout << report.to_text();
    });

    // pipeline
    auto* pl = app.add_subcommand("pipeline", "build-dataset, train, and eval in one run");
    std::string pipe_config, pipe_out;
    pl->add_option("--config", pipe_config, "experiment config")->required();
    pl->add_option("--out", pipe_out, "output directory (overrides config)");
    pl->callback([&] {
        const ExperimentConfig cfg = ExperimentConfig::load(pipe_config, opt_path(pipe_out));
        const PipelineResult result = run_pipeline(cfg);
        std::cout << read_file_text(result.summary);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const artscore::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const artscore::shape_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const artscore::io_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 4;
    } catch (const artscore::divergence_error& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 3;
    }
}
