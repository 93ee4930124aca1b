// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "dcq/error.hpp"
#include "dcq/grouping.hpp"
#include "dcq/random.hpp"
#include "oracles/partition_oracle.hpp"
#include "support.hpp"

using namespace dcq;

namespace {

std::vector<QuantParams> make_params(std::initializer_list<std::pair<float, int>> list) {
    std::vector<QuantParams> out;
    for (auto [a, z] : list) out.push_back({a, z, 2});
    return out;
}

std::vector<std::array<double, 2>> normalized(const GroupModel& m, const std::vector<QuantParams>& params) {
    std::vector<std::array<double, 2>> pts;
    for (const auto& p : params) pts.push_back(m.normalization.apply(p));
    return pts;
}

std::vector<QuantParams> random_params(Rng& rng, std::size_t n) {
    std::vector<QuantParams> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back({static_cast<float>(rng.uniform(0.01, 0.5)), static_cast<std::int32_t>(rng.index(4)), 2});
    return out;
}

}  // namespace

TEST_CASE("four-point instance splits into the obvious pairs") {
    const auto params = make_params({{0.10f, 0}, {0.11f, 0}, {0.50f, 3}, {0.52f, 3}});
    const auto m = kmeans_group(params, 2, 7);
    CHECK(m.assignments == std::vector<std::uint32_t>{0, 0, 1, 1});
    const auto pts = normalized(m, params);
    for (int g = 0; g < 2; ++g) {
        CHECK(m.centroids[g][0] == doctest::Approx((pts[2 * g][0] + pts[2 * g + 1][0]) / 2));
        CHECK(m.centroids[g][1] == doctest::Approx((pts[2 * g][1] + pts[2 * g + 1][1]) / 2));
    }
    std::vector<oracle::RawParam> raw;
    for (const auto& p : params) raw.push_back({p.scale, double(p.zero_point)});
    const auto best = oracle::brute_force_kmeans(oracle::normalize(raw), 2);
    CHECK(kmeans_objective(pts, m.assignments, 2) == doctest::Approx(best.cost));
}

TEST_CASE("degenerate group counts") {
    Rng rng(1);
    const auto params = random_params(rng, 9);
    const auto all = kmeans_group(params, 9, 0);
    for (std::size_t i = 0; i < 9; ++i) CHECK(all.assignments[i] == i);
    CHECK(all.objective_trace.back() == 0.0);

    const auto one = kmeans_group(params, 1, 0);
    for (auto g : one.assignments) CHECK(g == 0);
    const auto pts = normalized(one, params);
    double mx = 0, my = 0;
    for (const auto& p : pts) {
        mx += p[0];
        my += p[1];
    }
    CHECK(one.centroids[0][0] == doctest::Approx(mx / 9).epsilon(1e-12));
    CHECK(one.centroids[0][1] == doctest::Approx(my / 9).epsilon(1e-12));

    CHECK_THROWS_AS(kmeans_group(params, 0, 0), GroupCountError);
    CHECK_THROWS_AS(kmeans_group(params, 10, 0), GroupCountError);
}

TEST_CASE("objective never increases and the result is a local optimum") {
    Rng rng(2);
    for (int t = 0; t < 20; ++t) {
        const auto params = random_params(rng, 60);
        const std::size_t G = 2 + rng.index(8);
        const auto m = kmeans_group(params, G, static_cast<std::uint64_t>(t));
        for (std::size_t i = 1; i < m.objective_trace.size(); ++i)
            CHECK(m.objective_trace[i] <= m.objective_trace[i - 1] + 1e-12);
        const auto pts = normalized(m, params);
        std::vector<std::size_t> count(G, 0);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            ++count[m.assignments[i]];
            const auto& own = m.centroids[m.assignments[i]];
            const double d_own = std::pow(pts[i][0] - own[0], 2) + std::pow(pts[i][1] - own[1], 2);
            for (const auto& c : m.centroids)
                CHECK(d_own <= std::pow(pts[i][0] - c[0], 2) + std::pow(pts[i][1] - c[1], 2) + 1e-12);
        }
        for (auto c : count) CHECK(c > 0);
    }
}

TEST_CASE("exact optimum on tiny instances") {
    Rng rng(3);
    for (std::size_t n : {4u, 5u, 6u, 7u, 8u}) {
        for (int t = 0; t < 10; ++t) {
            const auto params = random_params(rng, n);
            std::vector<oracle::RawParam> raw;
            for (const auto& p : params) raw.push_back({p.scale, double(p.zero_point)});
            const auto pts = oracle::normalize(raw);
            for (int G = 1; G <= 3; ++G) {
                const auto m = kmeans_group(params, static_cast<std::size_t>(G), static_cast<std::uint64_t>(t));
                const auto best = oracle::brute_force_kmeans(pts, G);
                CHECK(kmeans_objective(pts, m.assignments, static_cast<std::size_t>(G)) ==
                      doctest::Approx(best.cost).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("labels follow first appearance and runs are deterministic") {
    Rng rng(4);
    const auto params = random_params(rng, 50);
    const auto a = kmeans_group(params, 5, 11);
    const auto b = kmeans_group(params, 5, 11);
    CHECK(a.assignments == b.assignments);
    CHECK(a.objective_trace == b.objective_trace);
    std::uint32_t next = 0;
    for (auto g : a.assignments) {
        CHECK(g <= next);
        if (g == next) ++next;
    }
}

TEST_CASE("recalibration uses the union of member values") {
    Patch p0, p1;
    p0.values = {0.0f, 0.25f, 0.5f};
    p1.values = {0.5f, 0.75f, 1.0f};
    const std::vector<Patch> patches{p0, p1};
    const std::vector<std::uint32_t> same{0, 0};
    const auto params = recalibrate_groups(patches, same, 1, 2);
    CHECK(params[0].scale == 1.0f / 3.0f);
    CHECK(params[0].zero_point == 0);

    const std::vector<std::uint32_t> apart{0, 1};
    const auto single = recalibrate_groups(patches, apart, 2, 2);
    CHECK(single[0] == calibrate(p0.values, 2));
    CHECK(single[1] == calibrate(p1.values, 2));

    CHECK_THROWS_AS(recalibrate_groups(patches, apart, 3, 2), InvalidArgument);
}

TEST_CASE("GAQ degenerates to global AQ and to PAQ") {
    const auto bundle = testing::random_bundle(4, {12, 12, 3}, 5);
    const PatchGeometry geom{5, 5};
    const auto patches = split_bundle(bundle, geom);
    const std::size_t N = patches.size();

    const auto one = gaq_quantize(bundle, geom, 2, 1, 0);
    std::vector<float> all;
    for (const auto& img : bundle.images()) all.insert(all.end(), img.values().begin(), img.values().end());
    CHECK(one.model.params[0] == calibrate(all, 2));
    const auto rec1 = gaq_dequantize(one.model, one.grouped, geom, bundle.shape(), bundle.size());
    const auto p1 = calibrate(all, 2);
    for (std::size_t i = 0; i < bundle.size(); ++i) {
        const auto v = bundle.images()[i].values();
        const auto r = rec1.images()[i].values();
        for (std::size_t k = 0; k < v.size(); ++k) REQUIRE(r[k] == dequantize_value(quantize_value(v[k], p1), p1));
    }

    const auto full = gaq_quantize(bundle, geom, 2, N, 0);
    const auto recN = gaq_dequantize(full.model, full.grouped, geom, bundle.shape(), bundle.size());
    for (std::size_t i = 0; i < bundle.size(); ++i) {
        auto ps = split_patches(bundle.images()[i], geom, i);
        for (auto& p : ps) p.values = fake_quantize(p.values, calibrate(p.values, 2));
        CHECK(merge_patches(ps, bundle.shape()) == recN.images()[i]);
    }
}

TEST_CASE("separated images form separate groups") {
    ImageTensor a({10, 10, 1}), b({10, 10, 1});
    Rng rng(6);
    for (auto& v : a.values()) v = static_cast<float>(rng.uniform(0.0, 0.1));
    for (auto& v : b.values()) v = static_cast<float>(rng.uniform(0.9, 1.0));
    const DatasetBundle bundle({a, b}, {0, 1});
    const auto r = gaq_quantize(bundle, {5, 5}, 2, 2, 3);
    CHECK(r.model.assignments == std::vector<std::uint32_t>{0, 0, 0, 0, 1, 1, 1, 1});
    for (const auto& p : r.model.params) CHECK(p.scale == doctest::Approx(0.1 / 3).epsilon(0.05));
}

TEST_CASE("group reconstruction error is within one group step") {
    const auto bundle = testing::random_bundle(3, {16, 16, 3}, 8);
    const PatchGeometry geom{5, 5};
    for (std::size_t G : {1u, 3u, 7u, 20u}) {
        const auto r = gaq_quantize(bundle, geom, 3, G, 1);
        const auto rec = gaq_dequantize(r.model, r.grouped, geom, bundle.shape(), bundle.size());
        const auto patches = split_bundle(bundle, geom);
        const auto rpatches = split_bundle(rec, geom);
        for (std::size_t i = 0; i < patches.size(); ++i) {
            const float step = r.model.params[r.model.assignments[i]].scale;
            for (std::size_t k = 0; k < patches[i].values.size(); ++k)
                REQUIRE(std::fabs(patches[i].values[k] - rpatches[i].values[k]) <= step);
        }
        CHECK(r.grouped.total_size() == 3 * 16 * 16 * 3);
    }
}

TEST_CASE("group streams concatenate in patch order") {
    const auto bundle = testing::random_bundle(2, {6, 6, 1}, 9);
    const auto r = gaq_quantize(bundle, {3, 3}, 2, 3, 2);
    const auto patches = split_bundle(bundle, {3, 3});
    std::vector<std::vector<float>> expect(3);
    for (std::size_t i = 0; i < patches.size(); ++i)
        expect[r.model.assignments[i]].insert(expect[r.model.assignments[i]].end(), patches[i].values.begin(),
                                              patches[i].values.end());
    CHECK(r.grouped.flat == expect);
    const auto counts = group_value_counts(r.model.assignments, 3, bundle.shape(), {3, 3});
    for (std::size_t g = 0; g < 3; ++g) CHECK(counts[g] == expect[g].size());
}

TEST_CASE("stream length mismatch is a format error") {
    const auto bundle = testing::random_bundle(2, {6, 6, 1}, 10);
    const auto r = gaq_quantize(bundle, {3, 3}, 2, 2, 0);
    std::vector<std::vector<std::uint8_t>> streams;
    for (const auto& s : r.grouped.symbols) streams.push_back(s.symbols);
    streams[0].pop_back();
    CHECK_THROWS_AS(reconstruct_images(r.model.assignments, r.model.params, streams, {3, 3}, bundle.shape(), 2),
                    FormatError);
}

TEST_CASE("gaq_quantize is deterministic") {
    const auto bundle = testing::random_bundle(3, {10, 10, 3}, 11);
    const auto a = gaq_quantize(bundle, {5, 5}, 2, 5, 99);
    const auto b = gaq_quantize(bundle, {5, 5}, 2, 5, 99);
    CHECK(a.model.assignments == b.model.assignments);
    CHECK(a.model.params == b.model.params);
    CHECK(a.grouped.flat == b.grouped.flat);
}
