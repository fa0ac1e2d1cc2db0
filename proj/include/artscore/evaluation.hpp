#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "artscore/core.hpp"
#include "artscore/serial.hpp"

namespace artscore {

enum class Orientation : std::uint8_t { SmallerBetter = 0, LargerBetter = 1 };

inline std::string orientation_name(Orientation o) {
    return o == Orientation::SmallerBetter ? "smaller" : "larger";
}

// Algorithms x metrics matrix. Every column declares whether smaller or
// larger values mean better quality; ingestion refuses to guess.
struct MetricTable {
    std::vector<std::string> algorithms;
    std::vector<std::string> metrics;
    std::vector<Orientation> orientations;
    std::vector<std::vector<double>> values;  // [algorithm][metric]

    std::size_t rows() const { return algorithms.size(); }
    std::size_t cols() const { return metrics.size(); }

    void validate() const {
        if (metrics.size() != orientations.size())
            throw config_error("MetricTable: orientation missing for some column");
        if (values.size() != algorithms.size())
            throw shape_error("MetricTable: row count mismatch");
        for (const auto& row : values) {
            if (row.size() != metrics.size()) throw shape_error("MetricTable: missing cell");
            if (!all_finite(row)) throw shape_error("MetricTable: non-finite value");
        }
    }

    std::vector<double> column(std::size_t j) const {
        std::vector<double> out(rows());
        for (std::size_t i = 0; i < rows(); ++i) out[i] = values[i][j];
        return out;
    }
};

struct StatResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::string method;
};

// ---------------------------------------------------------------------------
// Algorithm-level artness score: mean of the logistic sigmoid of each
// per-image raw score, so the aggregate lands in (0, 1).
// ---------------------------------------------------------------------------

inline double artscore_of_algorithm(const std::vector<double>& raw_scores) {
    if (raw_scores.empty())
        throw config_error("artscore_of_algorithm: empty score list");
    double acc = 0.0;
    for (double s : raw_scores) acc += sigmoid(s);
    return acc / static_cast<double>(raw_scores.size());
}

// ---------------------------------------------------------------------------
// Normalization and the three aggregation rules.
// ---------------------------------------------------------------------------

struct NormalizedTable {
    MetricTable table;  // all columns smaller-better, values in [0, 1]
    std::vector<bool> constant_column;
};

inline NormalizedTable normalize_metrics(const MetricTable& table) {
    table.validate();
    NormalizedTable out;
    out.table = table;
    out.constant_column.assign(table.cols(), false);
    for (std::size_t j = 0; j < table.cols(); ++j) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < table.rows(); ++i) {
            lo = std::min(lo, table.values[i][j]);
            hi = std::max(hi, table.values[i][j]);
        }
        if (hi == lo) {
            out.constant_column[j] = true;
            for (std::size_t i = 0; i < table.rows(); ++i) out.table.values[i][j] = 0.0;
        } else {
            for (std::size_t i = 0; i < table.rows(); ++i) {
                double v = (table.values[i][j] - lo) / (hi - lo);
                if (table.orientations[j] == Orientation::LargerBetter) v = 1.0 - v;
                out.table.values[i][j] = v;
            }
        }
        out.table.orientations[j] = Orientation::SmallerBetter;
    }
    return out;
}

// Average ranks with 1 as the best position; ties share the mean rank.
// `ascending` ranks smaller values first.
inline std::vector<double> average_ranks(const std::vector<double>& v, bool ascending = true) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return ascending ? v[a] < v[b] : v[a] > v[b];
    });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double shared = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
        i = j + 1;
    }
    return ranks;
}

// Rank aggregation: per metric, rank algorithms with 1 = best under the
// declared orientation (ties get average ranks); sum over metrics. Smaller
// totals are better.
inline std::vector<double> aggregate_rank(const MetricTable& table) {
    table.validate();
    if (table.cols() == 0) throw config_error("aggregate_rank: no metrics");
    std::vector<double> total(table.rows(), 0.0);
    for (std::size_t j = 0; j < table.cols(); ++j) {
        const auto ranks = average_ranks(
            table.column(j), table.orientations[j] == Orientation::SmallerBetter);
        for (std::size_t i = 0; i < table.rows(); ++i) total[i] += ranks[i];
    }
    return total;
}

// Additive aggregation over normalized (smaller-better) metrics.
inline std::vector<double> aggregate_add(const MetricTable& table) {
    const NormalizedTable norm = normalize_metrics(table);
    std::vector<double> total(table.rows(), 0.0);
    for (std::size_t i = 0; i < table.rows(); ++i)
        for (std::size_t j = 0; j < table.cols(); ++j) total[i] += norm.table.values[i][j];
    return total;
}

// Multiplicative aggregation: product of (1 + normalized metric), the same
// combination rule ArtFID uses for its two factors.
inline std::vector<double> aggregate_multiply(const MetricTable& table) {
    const NormalizedTable norm = normalize_metrics(table);
    std::vector<double> total(table.rows(), 1.0);
    for (std::size_t i = 0; i < table.rows(); ++i)
        for (std::size_t j = 0; j < table.cols(); ++j)
            total[i] *= 1.0 + norm.table.values[i][j];
    return total;
}

// ---------------------------------------------------------------------------
// Statistics: regularized incomplete beta (Lentz continued fraction), the
// Student-t two-sided tail, Spearman's rho, and the McNemar test.
// ---------------------------------------------------------------------------

namespace stats {

inline double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 400;
    constexpr double kEps = 1e-12;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    throw divergence_error("betacf: continued fraction did not converge");
}

// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

inline double student_t_two_sided_p(double t, double dof) {
    if (dof <= 0.0) throw config_error("student_t_two_sided_p: dof must be positive");
    const double x = dof / (dof + t * t);
    return incomplete_beta(dof / 2.0, 0.5, x);
}

inline double chi_squared_1df_p(double chi2) {
    return std::erfc(std::sqrt(chi2 / 2.0));
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0)
        throw config_error("correlation undefined for a constant vector");
    return sab / std::sqrt(saa * sbb);
}

}  // namespace stats

// Spearman's rho as the Pearson correlation of average-rank-transformed
// vectors (exact under ties), with the two-sided Student-t p-value on n-2
// degrees of freedom. |rho| = 1 maps to p = 0.
inline StatResult spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw shape_error("spearman: length mismatch");
    if (a.size() < 3) throw config_error("spearman: need n >= 3");
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    double rho = stats::pearson(ra, rb);
    rho = std::clamp(rho, -1.0, 1.0);

    StatResult res;
    res.statistic = rho;
    res.method = "spearman-t";
    if (std::abs(rho) >= 1.0 - 1e-12) {
        res.p_value = 0.0;
        return res;
    }
    const double n = static_cast<double>(a.size());
    const double t = rho * std::sqrt((n - 2.0) / (1.0 - rho * rho));
    res.p_value = stats::student_t_two_sided_p(t, n - 2.0);
    return res;
}

// McNemar test on discordant counts. Default is the uncorrected statistic
// (b-c)^2/(b+c); the flag switches to the continuity-corrected form.
inline StatResult mcnemar(std::uint64_t b, std::uint64_t c, bool corrected = false) {
    if (b + c == 0) throw config_error("mcnemar: b + c must be at least 1");
    const double diff = std::abs(static_cast<double>(b) - static_cast<double>(c));
    const double num = corrected ? std::max(diff - 1.0, 0.0) : diff;
    const double chi2 = num * num / static_cast<double>(b + c);
    StatResult res;
    res.statistic = chi2;
    res.p_value = stats::chi_squared_1df_p(chi2);
    res.method = corrected ? "mcnemar-corrected" : "mcnemar";
    return res;
}

// ---------------------------------------------------------------------------
// Pairwise comparison accuracy against a reference judgment. Ties count 0.5.
// ---------------------------------------------------------------------------

struct ScorePair {
    double score_a = 0.0;
    double score_b = 0.0;
    bool truth_is_a = true;  // which side the reference judged better
};

inline double pairwise_accuracy(const std::vector<ScorePair>& pairs) {
    if (pairs.empty()) throw config_error("pairwise_accuracy: no pairs");
    double correct = 0.0;
    for (const auto& p : pairs) {
        if (p.score_a == p.score_b) {
            correct += 0.5;
        } else if ((p.score_a > p.score_b) == p.truth_is_a) {
            correct += 1.0;
        }
    }
    return correct / static_cast<double>(pairs.size());
}

// ---------------------------------------------------------------------------
// CSV ingestion. Header: first column names the algorithm column; every
// metric column carries a `:smaller` or `:larger` orientation suffix.
// ---------------------------------------------------------------------------

inline MetricTable metric_table_from_csv(const std::string& csv) {
    MetricTable table;
    std::vector<std::string> lines;
    for (const auto& line : split(csv, '\n')) {
        const std::string t = trim(line);
        if (!t.empty()) lines.push_back(t);
    }
    if (lines.empty()) throw config_error("metric CSV: empty file");
    const auto header = split(lines.front(), ',');
    if (header.size() < 2) throw config_error("metric CSV: need at least one metric column");
    for (std::size_t j = 1; j < header.size(); ++j) {
        const auto parts = split(trim(header[j]), ':');
        if (parts.size() != 2)
            throw config_error("metric CSV: column '" + header[j] +
                               "' must declare :smaller or :larger");
        if (parts[1] == "smaller") {
            table.orientations.push_back(Orientation::SmallerBetter);
        } else if (parts[1] == "larger") {
            table.orientations.push_back(Orientation::LargerBetter);
        } else {
            throw config_error("metric CSV: unknown orientation '" + parts[1] + "'");
        }
        table.metrics.push_back(parts[0]);
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cells = split(lines[i], ',');
        if (cells.size() != header.size())
            throw config_error("metric CSV: row " + std::to_string(i) +
                               " has the wrong number of cells");
        table.algorithms.push_back(trim(cells[0]));
        std::vector<double> row;
        for (std::size_t j = 1; j < cells.size(); ++j)
            row.push_back(parse_double(trim(cells[j])));
        table.values.push_back(std::move(row));
    }
    table.validate();
    return table;
}

inline std::string metric_table_to_csv(const MetricTable& table) {
    table.validate();
    std::string out = "algorithm";
    for (std::size_t j = 0; j < table.cols(); ++j)
        out += "," + table.metrics[j] + ":" + orientation_name(table.orientations[j]);
    out += "\n";
    for (std::size_t i = 0; i < table.rows(); ++i) {
        out += table.algorithms[i];
        for (std::size_t j = 0; j < table.cols(); ++j)
            out += "," + format_double(table.values[i][j]);
        out += "\n";
    }
    return out;
}

}  // namespace artscore
