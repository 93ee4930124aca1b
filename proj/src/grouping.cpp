// SPDX-License-Identifier: Apache-2.0

#include "dcq/grouping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "dcq/error.hpp"
#include "dcq/random.hpp"

namespace dcq {
namespace {

using Point = std::array<double, 2>;

double sq_dist(const Point& a, const Point& b) noexcept {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    return dx * dx + dy * dy;
}

struct Clustering {
    std::vector<std::uint32_t> assignments;
    std::vector<Point> centroids;
    std::vector<double> trace;
};

std::vector<Point> seed_centroids(std::span<const Point> points, std::size_t k, std::uint64_t seed) {
    const std::size_t n = points.size();
    Rng rng(seed);
    std::vector<Point> centroids;
    std::vector<bool> chosen(n, false);
    std::size_t first = rng.index(n);
    centroids.push_back(points[first]);
    chosen[first] = true;
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(points[i], points[first]);

    while (centroids.size() < k) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t pick = n;
        if (total > 0.0) {
            const double r = rng.uniform01() * total;
            double cum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (d2[i] <= 0.0) continue;
                cum += d2[i];
                pick = i;
                if (cum > r) break;
            }
        } else {
            // Every point coincides with a centroid; take the lowest unused index.
            for (std::size_t i = 0; i < n && pick == n; ++i)
                if (!chosen[i]) pick = i;
        }
        chosen[pick] = true;
        centroids.push_back(points[pick]);
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(points[i], points[pick]));
    }
    return centroids;
}

/// Hartigan-style refinement after Lloyd: moves single points between groups
/// while that strictly lowers the objective, counting the shift of both means.
void transfer_pass(std::span<const Point> points, Clustering& c, std::vector<std::size_t>& counts,
                   std::size_t max_rounds) {
    const std::size_t n = points.size();
    const std::size_t k = c.centroids.size();
    bool any = false;
    for (std::size_t round = 0; round < max_rounds; ++round) {
        bool moved = false;
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint32_t from = c.assignments[i];
            if (counts[from] < 2) continue;
            const double nf = static_cast<double>(counts[from]);
            const double removal = nf / (nf - 1.0) * sq_dist(points[i], c.centroids[from]);
            double best = removal * (1.0 - 1e-12);
            std::uint32_t to = from;
            for (std::size_t g = 0; g < k; ++g) {
                if (g == from) continue;
                const double ng = static_cast<double>(counts[g]);
                const double add = ng / (ng + 1.0) * sq_dist(points[i], c.centroids[g]);
                if (add < best) {
                    best = add;
                    to = static_cast<std::uint32_t>(g);
                }
            }
            if (to == from) continue;
            const double nt = static_cast<double>(counts[to]);
            auto& cf = c.centroids[from];
            auto& ct = c.centroids[to];
            for (int d = 0; d < 2; ++d) {
                cf[d] = (cf[d] * nf - points[i][d]) / (nf - 1.0);
                ct[d] = (ct[d] * nt + points[i][d]) / (nt + 1.0);
            }
            --counts[from];
            ++counts[to];
            c.assignments[i] = to;
            moved = any = true;
        }
        if (!moved) break;
    }
    if (!any) return;
    std::vector<Point> sums(k, Point{0.0, 0.0});
    for (std::size_t i = 0; i < n; ++i) {
        sums[c.assignments[i]][0] += points[i][0];
        sums[c.assignments[i]][1] += points[i][1];
    }
    for (std::size_t g = 0; g < k; ++g) {
        const double cnt = static_cast<double>(counts[g]);
        c.centroids[g] = {sums[g][0] / cnt, sums[g][1] / cnt};
    }
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) obj += sq_dist(points[i], c.centroids[c.assignments[i]]);
    c.trace.push_back(obj);
}

Clustering lloyd(std::span<const Point> points, std::vector<Point> initial, std::size_t max_iters) {
    const std::size_t n = points.size();
    const std::size_t k = initial.size();
    Clustering c;
    c.centroids = std::move(initial);
    c.assignments.assign(n, std::numeric_limits<std::uint32_t>::max());
    std::vector<std::uint32_t> next(n);
    std::vector<std::size_t> counts(k);

    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            std::uint32_t best = 0;
            double best_d = sq_dist(points[i], c.centroids[0]);
            for (std::size_t g = 1; g < k; ++g) {
                const double d = sq_dist(points[i], c.centroids[g]);
                if (d < best_d) {
                    best_d = d;
                    best = static_cast<std::uint32_t>(g);
                }
            }
            next[i] = best;
            ++counts[best];
        }
        for (std::size_t g = 0; g < k; ++g) {
            if (counts[g] != 0) continue;
            std::size_t victim = n;
            double worst = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[next[i]] < 2) continue;
                const double d = sq_dist(points[i], c.centroids[next[i]]);
                if (d > worst) {
                    worst = d;
                    victim = i;
                }
            }
            --counts[next[victim]];
            next[victim] = static_cast<std::uint32_t>(g);
            counts[g] = 1;
            c.centroids[g] = points[victim];
        }

        const bool changed = next != c.assignments;
        c.assignments = next;

        std::vector<Point> sums(k, Point{0.0, 0.0});
        for (std::size_t i = 0; i < n; ++i) {
            sums[c.assignments[i]][0] += points[i][0];
            sums[c.assignments[i]][1] += points[i][1];
        }
        for (std::size_t g = 0; g < k; ++g) {
            const double cnt = static_cast<double>(counts[g]);
            c.centroids[g] = {sums[g][0] / cnt, sums[g][1] / cnt};
        }
        double obj = 0.0;
        for (std::size_t i = 0; i < n; ++i) obj += sq_dist(points[i], c.centroids[c.assignments[i]]);
        c.trace.push_back(obj);
        if (!changed) break;
    }
    transfer_pass(points, c, counts, max_iters);
    return c;
}

/// True when C(n, k) <= limit.
bool binomial_at_most(std::size_t n, std::size_t k, std::size_t limit) {
    k = std::min(k, n - k);
    double c = 1.0;
    for (std::size_t i = 1; i <= k; ++i) {
        c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
        if (c > static_cast<double>(limit) + 0.5) return false;
    }
    return true;
}

}  // namespace

std::size_t GroupedValues::total_size() const noexcept {
    std::size_t total = 0;
    for (const auto& s : symbols) total += s.size();
    return total;
}

ParamNormalization fit_normalization(std::span<const QuantParams> params) {
    ParamNormalization norm;
    if (params.empty()) return norm;
    const double n = static_cast<double>(params.size());
    double sa = 0.0, sz = 0.0;
    for (const auto& p : params) {
        sa += p.scale;
        sz += p.zero_point;
    }
    norm.scale_mean = sa / n;
    norm.zero_mean = sz / n;
    double va = 0.0, vz = 0.0;
    for (const auto& p : params) {
        va += (p.scale - norm.scale_mean) * (p.scale - norm.scale_mean);
        vz += (p.zero_point - norm.zero_mean) * (p.zero_point - norm.zero_mean);
    }
    norm.scale_std = std::sqrt(va / n);
    norm.zero_std = std::sqrt(vz / n);
    if (!(norm.scale_std > 0.0)) norm.scale_std = 1.0;
    if (!(norm.zero_std > 0.0)) norm.zero_std = 1.0;
    return norm;
}

double kmeans_objective(std::span<const std::array<double, 2>> points, std::span<const std::uint32_t> assignments,
                        std::size_t group_count) {
    std::vector<Point> sums(group_count, Point{0.0, 0.0});
    std::vector<std::size_t> counts(group_count, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        sums[assignments[i]][0] += points[i][0];
        sums[assignments[i]][1] += points[i][1];
        ++counts[assignments[i]];
    }
    for (std::size_t g = 0; g < group_count; ++g) {
        if (counts[g] == 0) continue;
        sums[g][0] /= static_cast<double>(counts[g]);
        sums[g][1] /= static_cast<double>(counts[g]);
    }
    double obj = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) obj += sq_dist(points[i], sums[assignments[i]]);
    return obj;
}

GroupModel kmeans_group(std::span<const QuantParams> params, std::size_t group_count, std::uint64_t seed,
                        const KMeansOptions& options) {
    const std::size_t n = params.size();
    if (group_count == 0 || group_count > n)
        throw GroupCountError("group count " + std::to_string(group_count) + " must be in [1, " + std::to_string(n) +
                              "]");
    if (options.max_iters == 0) throw InvalidArgument("k-means max_iters must be at least 1");

    GroupModel model;
    model.group_count = group_count;
    model.normalization = fit_normalization(params);
    std::vector<Point> points;
    points.reserve(n);
    for (const auto& p : params) points.push_back(model.normalization.apply(p));

    Clustering best;
    if (group_count == n) {
        best.assignments.resize(n);
        std::iota(best.assignments.begin(), best.assignments.end(), 0u);
        best.centroids = points;
        best.trace = {0.0};
    } else {
        bool have = false;
        auto consider = [&](Clustering c) {
            if (!have || c.trace.back() < best.trace.back()) best = std::move(c);
            have = true;
        };
        const std::size_t restarts = std::max<std::size_t>(1, options.restarts);
        for (std::size_t r = 0; r < restarts; ++r)
            consider(lloyd(points, seed_centroids(points, group_count, derive_seed(seed, r)), options.max_iters));

        // Small inputs: also start from every set of G distinct points.
        std::vector<Point> distinct;
        for (const auto& p : points)
            if (std::find(distinct.begin(), distinct.end(), p) == distinct.end()) distinct.push_back(p);
        if (distinct.size() >= group_count && binomial_at_most(distinct.size(), group_count, options.exhaustive_seeding)) {
            std::vector<std::size_t> pick(group_count);
            std::iota(pick.begin(), pick.end(), 0);
            for (;;) {
                std::vector<Point> init;
                for (auto i : pick) init.push_back(distinct[i]);
                consider(lloyd(points, std::move(init), options.max_iters));
                std::size_t j = group_count;
                while (j > 0 && pick[j - 1] == distinct.size() - group_count + j - 1) --j;
                if (j == 0) break;
                ++pick[j - 1];
                for (std::size_t t = j; t < group_count; ++t) pick[t] = pick[t - 1] + 1;
            }
        }
    }

    // Relabel groups by first appearance along the patch index.
    std::vector<std::uint32_t> relabel(group_count, std::numeric_limits<std::uint32_t>::max());
    std::uint32_t next_label = 0;
    for (auto g : best.assignments)
        if (relabel[g] == std::numeric_limits<std::uint32_t>::max()) relabel[g] = next_label++;
    model.assignments.reserve(n);
    for (auto g : best.assignments) model.assignments.push_back(relabel[g]);
    model.centroids.resize(group_count);
    for (std::size_t g = 0; g < group_count; ++g) model.centroids[relabel[g]] = best.centroids[g];
    model.objective_trace = std::move(best.trace);
    return model;
}

std::vector<QuantParams> recalibrate_groups(std::span<const Patch> patches, std::span<const std::uint32_t> assignments,
                                            std::size_t group_count, int bits) {
    if (patches.size() != assignments.size()) throw InvalidArgument("assignment count does not match patch count");
    std::vector<std::vector<float>> flat(group_count);
    for (std::size_t i = 0; i < patches.size(); ++i) {
        if (assignments[i] >= group_count) throw InvalidArgument("assignment out of range");
        auto& dst = flat[assignments[i]];
        dst.insert(dst.end(), patches[i].values.begin(), patches[i].values.end());
    }
    std::vector<QuantParams> out;
    out.reserve(group_count);
    for (std::size_t g = 0; g < group_count; ++g) {
        if (flat[g].empty()) throw InvalidArgument("group " + std::to_string(g) + " has no members");
        out.push_back(calibrate(flat[g], bits));
    }
    return out;
}

GroupedValues quantize_with_groups(std::span<const Patch> patches, std::span<const std::uint32_t> assignments,
                                   std::span<const QuantParams> group_params) {
    if (patches.size() != assignments.size()) throw InvalidArgument("assignment count does not match patch count");
    const std::size_t G = group_params.size();
    GroupedValues out;
    out.flat.resize(G);
    for (std::size_t i = 0; i < patches.size(); ++i) {
        if (assignments[i] >= G) throw InvalidArgument("assignment out of range");
        auto& dst = out.flat[assignments[i]];
        dst.insert(dst.end(), patches[i].values.begin(), patches[i].values.end());
    }
    out.symbols.reserve(G);
    for (std::size_t g = 0; g < G; ++g) out.symbols.push_back(quantize(out.flat[g], group_params[g]));
    return out;
}

GaqResult gaq_quantize(const DatasetBundle& bundle, const PatchGeometry& geom, int bits, std::size_t group_count,
                       std::uint64_t seed, const KMeansOptions& options) {
    check_bits(bits);
    const auto patches = split_bundle(bundle, geom);
    std::vector<QuantParams> patch_params;
    patch_params.reserve(patches.size());
    for (const auto& p : patches) patch_params.push_back(calibrate(p.values, bits));

    GaqResult result;
    result.model = kmeans_group(patch_params, group_count, seed, options);
    result.model.params = recalibrate_groups(patches, result.model.assignments, group_count, bits);
    result.grouped = quantize_with_groups(patches, result.model.assignments, result.model.params);
    return result;
}

std::vector<std::size_t> group_value_counts(std::span<const std::uint32_t> assignments, std::size_t group_count,
                                            const ImageShape& shape, const PatchGeometry& geom) {
    const auto layout = patch_layout(shape, geom);
    if (layout.empty() || assignments.size() % layout.size() != 0)
        throw FormatError("assignment count is not a multiple of the per-image patch count");
    std::vector<std::size_t> counts(group_count, 0);
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        if (assignments[i] >= group_count) throw FormatError("group index out of range");
        const auto& e = layout[i % layout.size()];
        counts[assignments[i]] += e.rows * e.cols * shape.channels;
    }
    return counts;
}

std::vector<ImageTensor> reconstruct_images(std::span<const std::uint32_t> assignments,
                                            std::span<const QuantParams> group_params,
                                            std::span<const std::vector<std::uint8_t>> group_symbols,
                                            const PatchGeometry& geom, const ImageShape& shape,
                                            std::size_t image_count) {
    const auto layout = patch_layout(shape, geom);
    const std::size_t G = group_params.size();
    if (group_symbols.size() != G) throw FormatError("group stream count does not match group count");
    if (assignments.size() != layout.size() * image_count)
        throw FormatError("assignment count does not match patch count");
    const auto expected = group_value_counts(assignments, G, shape, geom);
    for (std::size_t g = 0; g < G; ++g)
        if (group_symbols[g].size() != expected[g])
            throw FormatError("group " + std::to_string(g) + " holds " + std::to_string(group_symbols[g].size()) +
                              " symbols, expected " + std::to_string(expected[g]));

    std::vector<std::size_t> cursor(G, 0);
    std::vector<ImageTensor> images;
    images.reserve(image_count);
    for (std::size_t m = 0; m < image_count; ++m) {
        ImageTensor img(shape);
        for (std::size_t p = 0; p < layout.size(); ++p) {
            const auto g = assignments[m * layout.size() + p];
            const auto& e = layout[p];
            const auto& stream = group_symbols[g];
            std::size_t& pos = cursor[g];
            for (std::size_t r = 0; r < e.rows; ++r)
                for (std::size_t c = 0; c < e.cols; ++c)
                    for (std::size_t ch = 0; ch < shape.channels; ++ch)
                        img.at(e.origin_row + r, e.origin_col + c, ch) = dequantize_value(stream[pos++], group_params[g]);
        }
        images.push_back(std::move(img));
    }
    return images;
}

DatasetBundle gaq_dequantize(const GroupModel& model, const GroupedValues& grouped, const PatchGeometry& geom,
                             const ImageShape& shape, std::size_t image_count, std::span<const std::uint32_t> labels) {
    std::vector<std::vector<std::uint8_t>> streams;
    streams.reserve(grouped.symbols.size());
    for (const auto& block : grouped.symbols) streams.push_back(block.symbols);
    auto images = reconstruct_images(model.assignments, model.params, streams, geom, shape, image_count);
    std::vector<std::uint32_t> lab(labels.begin(), labels.end());
    if (lab.empty()) lab.assign(image_count, 0);
    return DatasetBundle(std::move(images), std::move(lab));
}

}  // namespace dcq
