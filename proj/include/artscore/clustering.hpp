#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "artscore/core.hpp"

namespace artscore {

struct KMeansResult {
    std::vector<std::size_t> assignments;
    std::vector<std::vector<double>> centroids;
    double inertia = 0.0;
    std::size_t iterations = 0;
    // Within-cluster sum of squares after each assignment pass; non-increasing.
    std::vector<double> inertia_trace;
};

namespace detail {

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace detail

// Lloyd's algorithm with seeded k-means++ initialization. Runs until the
// assignment fixpoint or max_iter. An emptied cluster is re-seeded from the
// point farthest from its current centroid.
inline KMeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k,
                           std::uint64_t seed, std::size_t max_iter = 300) {
    if (k == 0) throw config_error("kmeans: k must be positive");
    if (k > points.size())
        throw config_error("kmeans: k exceeds the number of points");
    const std::size_t dim = points.front().size();
    for (const auto& p : points)
        if (p.size() != dim) throw shape_error("kmeans: inconsistent point dimensions");

    Rng rng(seed);
    KMeansResult res;
    res.centroids.reserve(k);

    // k-means++ seeding: first centroid uniform, then each next point with
    // probability proportional to its squared distance to the closest centroid.
    res.centroids.push_back(points[rng.below(points.size())]);
    std::vector<double> d2(points.size());
    while (res.centroids.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : res.centroids)
                best = std::min(best, detail::sq_dist(points[i], c));
            d2[i] = best;
            total += best;
        }
        std::size_t chosen = 0;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            chosen = points.size() - 1;
            for (std::size_t i = 0; i < points.size(); ++i) {
                acc += d2[i];
                if (acc >= target) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = rng.below(points.size());  // all points coincide
        }
        res.centroids.push_back(points[chosen]);
    }

    res.assignments.assign(points.size(), 0);
    auto assign_pass = [&]() {
        bool changed = false;
        double inertia = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t arg = 0;
            for (std::size_t c = 0; c < k; ++c) {
                const double d = detail::sq_dist(points[i], res.centroids[c]);
                if (d < best) {
                    best = d;
                    arg = c;
                }
            }
            if (res.assignments[i] != arg) {
                res.assignments[i] = arg;
                changed = true;
            }
            inertia += best;
        }
        res.inertia = inertia;
        res.inertia_trace.push_back(inertia);
        return changed;
    };

    assign_pass();
    for (std::size_t it = 0; it < max_iter; ++it) {
        // Update step: centroid = mean of members.
        std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            const std::size_t c = res.assignments[i];
            ++counts[c];
            for (std::size_t d = 0; d < dim; ++d) sums[c][d] += points[i][d];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // Re-seed from the point farthest from its assigned centroid.
                double worst = -1.0;
                std::size_t arg = 0;
                for (std::size_t i = 0; i < points.size(); ++i) {
                    const double d =
                        detail::sq_dist(points[i], res.centroids[res.assignments[i]]);
                    if (d > worst) {
                        worst = d;
                        arg = i;
                    }
                }
                res.centroids[c] = points[arg];
                continue;
            }
            for (std::size_t d = 0; d < dim; ++d)
                res.centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
        }
        res.iterations = it + 1;
        if (!assign_pass()) break;
    }
    return res;
}

struct RepresentativeSelection {
    // Per cluster: member indices ordered by ascending distance to the
    // centroid, ties broken by lower index; at most m entries.
    std::vector<std::vector<std::size_t>> indices;
    // True where the cluster had fewer than m members and was returned whole.
    std::vector<bool> short_cluster;
};

inline RepresentativeSelection select_representatives(
    const std::vector<std::vector<double>>& points, const std::vector<std::size_t>& assignments,
    const std::vector<std::vector<double>>& centroids, std::size_t m) {
    if (m == 0) throw config_error("select_representatives: m must be >= 1");
    if (assignments.size() != points.size())
        throw shape_error("select_representatives: assignment count mismatch");

    RepresentativeSelection sel;
    sel.indices.resize(centroids.size());
    sel.short_cluster.assign(centroids.size(), false);
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        std::vector<std::pair<double, std::size_t>> members;
        for (std::size_t i = 0; i < points.size(); ++i)
            if (assignments[i] == c)
                members.emplace_back(detail::sq_dist(points[i], centroids[c]), i);
        std::sort(members.begin(), members.end());  // distance, then lower index
        if (members.size() < m) sel.short_cluster[c] = true;
        const std::size_t take = std::min<std::size_t>(m, members.size());
        sel.indices[c].reserve(take);
        for (std::size_t j = 0; j < take; ++j) sel.indices[c].push_back(members[j].second);
    }
    return sel;
}

}  // namespace artscore
