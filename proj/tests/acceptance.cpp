// SPDX-License-Identifier: Apache-2.0
// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dcq/bytes.hpp"
#include "dcq/codec.hpp"
#include "dcq/container.hpp"
#include "dcq/corpus.hpp"
#include "dcq/entropy.hpp"
#include "dcq/error.hpp"
#include "dcq/eval.hpp"
#include "dcq/grouping.hpp"
#include "dcq/quantizer.hpp"
#include "dcq/random.hpp"
#include "dcq/refinement.hpp"
#include "oracles/partition_oracle.hpp"
#include "oracles/quant_oracle.hpp"
#include "support.hpp"

using namespace dcq;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

const PatchGeometry kGeom{5, 5};

DatasetBundle corpus(std::size_t count) {
    CorpusSpec spec;
    spec.count = count;
    return make_smooth_corpus(spec);
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

int cli(const std::string& args) {
    const int status = std::system((std::string(DCQ_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome quantizer_oracle() {
    Rng rng(1001);
    std::size_t mismatches = 0, values = 0;
    for (int bits : {2, 4, 8}) {
        for (int set = 0; set < 1000; ++set) {
            const std::size_t n = 1 + rng.index(64);
            const double lo = rng.uniform(-10, 10);
            const double span = set % 10 == 0 ? 0.0 : std::exp(rng.uniform(-8, 2));
            std::vector<float> v(n);
            for (auto& x : v) x = static_cast<float>(lo + span * rng.uniform01());
            const auto p = calibrate(v, bits);
            const auto o = oracle::calibrate(v, bits);
            if (p.scale != o.scale || p.zero_point != o.zero) ++mismatches;
            std::vector<float> probe = v;
            for (int k = 0; k < 8; ++k) probe.push_back(static_cast<float>(lo + span * rng.uniform(-0.5, 1.5)));
            for (float x : probe) {
                const auto q = quantize_value(x, p);
                ++values;
                if (q != oracle::quantize(x, o, bits) || dequantize_value(q, p) != oracle::dequantize(q, o)) ++mismatches;
            }
        }
    }
    return {mismatches == 0, std::to_string(mismatches) + " mismatches over 3000 sets, " + std::to_string(values) +
                                 " values"};
}

Outcome error_bound() {
    Rng rng(1002);
    std::size_t checked = 0, violations = 0;
    while (checked < 1000000) {
        const int bits = 2 + static_cast<int>(rng.index(7));
        const double lo = rng.uniform(-100, 100);
        const double span = std::exp(rng.uniform(-10, 4));
        std::vector<float> v(1000);
        for (auto& x : v) x = static_cast<float>(lo + span * rng.uniform01());
        const auto p = calibrate(v, bits);
        for (float x : v) {
            if (!in_quant_range(x, p)) continue;
            ++checked;
            const double err = std::fabs(double(x) - double(dequantize_value(quantize_value(x, p), p)));
            if (err > p.scale) ++violations;
        }
    }
    return {violations == 0, std::to_string(violations) + " violations over " + std::to_string(checked) + " values"};
}

Outcome degeneracy() {
    const auto bundle = corpus(10);
    const std::size_t PM = kGeom.patch_count(bundle.shape()) * bundle.size();
    std::size_t diffs = 0;

    std::vector<float> all;
    for (const auto& img : bundle.images()) all.insert(all.end(), img.values().begin(), img.values().end());
    const auto global = calibrate(all, 2);
    const auto one = encode_candidate(bundle, kGeom, 2, 1, 0);
    const auto rec1 = decompress(read_container(write_container(one.dataset)));
    if (!(one.dataset.group_params[0] == global)) ++diffs;
    for (std::size_t i = 0; i < bundle.size(); ++i) {
        const auto v = bundle.images()[i].values();
        const auto r = rec1.images()[i].values();
        for (std::size_t k = 0; k < v.size(); ++k)
            if (r[k] != dequantize_value(quantize_value(v[k], global), global)) ++diffs;
    }

    const auto full = encode_candidate(bundle, kGeom, 2, PM, 0);
    const auto recN = decompress(read_container(write_container(full.dataset)));
    for (std::size_t i = 0; i < bundle.size(); ++i) {
        auto patches = split_patches(bundle.images()[i], kGeom, i);
        for (auto& p : patches) p.values = fake_quantize(p.values, calibrate(p.values, 2));
        const auto expect = merge_patches(patches, bundle.shape());
        const auto e = expect.values();
        const auto r = recN.images()[i].values();
        for (std::size_t k = 0; k < e.size(); ++k)
            if (e[k] != r[k]) ++diffs;
    }
    return {diffs == 0, std::to_string(diffs) + " differing values (G=1 and G=" + std::to_string(PM) + ")"};
}

Outcome kmeans_exact() {
    Rng rng(1004);
    std::size_t instances = 0, misses = 0;
    for (std::size_t n = 1; n <= 8; ++n) {
        for (int t = 0; t < 60; ++t) {
            std::vector<QuantParams> params;
            for (std::size_t i = 0; i < n; ++i) {
                if (t % 2 == 0) {
                    params.push_back({static_cast<float>(rng.uniform(0.01, 0.5)),
                                      static_cast<std::int32_t>(rng.index(4)), 2});
                } else {
                    const auto img = testing::random_image({5, 5, 3}, rng.next(), static_cast<float>(rng.uniform(-1, 0)),
                                                           static_cast<float>(rng.uniform(0.1, 1)));
                    params.push_back(calibrate(img.values(), 2));
                }
            }
            std::vector<oracle::RawParam> raw;
            for (const auto& p : params) raw.push_back({p.scale, double(p.zero_point)});
            const auto pts = oracle::normalize(raw);
            for (std::size_t G = 1; G <= std::min<std::size_t>(3, n); ++G) {
                ++instances;
                const auto m = kmeans_group(params, G, static_cast<std::uint64_t>(t));
                const double got = kmeans_objective(pts, m.assignments, G);
                const double best = oracle::brute_force_kmeans(pts, static_cast<int>(G)).cost;
                if (std::fabs(got - best) > 1e-9 * std::max(1.0, best)) ++misses;
            }
        }
    }
    return {misses == 0, std::to_string(misses) + " non-optimal of " + std::to_string(instances) + " instances"};
}

Outcome bitwidth_trend() {
    const auto bundle = corpus(100);
    SweepOptions o;
    o.geom = kGeom;
    o.features.reset();
    const double whole2 = run_method(bundle, Method::WholeAQ, 2, 0, o).pixel_mse;
    const double mc2 = run_method(bundle, Method::MedianCut, 2, 0, o).pixel_mse;
    std::vector<double> paq;
    for (int b : {2, 3, 4, 8}) paq.push_back(run_method(bundle, Method::PAQ, b, 0, o).pixel_mse);
    bool ok = paq[0] < whole2 && mc2 > paq[0];
    for (std::size_t i = 1; i < paq.size(); ++i) ok = ok && paq[i] < paq[i - 1];
    std::string d = "whole@2=" + fmt("%.4g", whole2) + " mediancut@2=" + fmt("%.4g", mc2) + " paq@2,3,4,8=";
    for (double v : paq) d += fmt("%.4g ", v);
    return {ok, d};
}

Outcome group_trend() {
    const auto bundle = corpus(10);
    const std::size_t PM = kGeom.patch_count(bundle.shape()) * bundle.size();
    SweepOptions o;
    o.geom = kGeom;
    o.features.reset();
    const auto rows = sweep_groups(bundle, 2, doubling_ladder(PM), o);
    std::size_t trend_breaks = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].pixel_mse > rows[i - 1].pixel_mse) ++trend_breaks;
        if (rows[i].size_indices_bits < rows[i - 1].size_indices_bits) ++trend_breaks;
    }

    std::vector<std::uint64_t> totals(PM + 1, 0);
    for (std::size_t G = 1; G <= PM; ++G) totals[G] = encode_candidate(bundle, kGeom, 2, G, 0).storage.total;
    Rng rng(1006);
    std::size_t not_max = 0, over = 0;
    for (int t = 0; t < 20; ++t) {
        const auto budget = static_cast<std::uint64_t>(rng.uniform(double(totals[1]), double(totals[PM]) * 1.05));
        CompressOptions co;
        co.geom = kGeom;
        co.bits = 2;
        co.budget = BudgetSpec::from_bits(budget);
        const auto res = compress(bundle, co);
        std::size_t best = 0;
        for (std::size_t G = 1; G <= PM; ++G)
            if (totals[G] <= budget) best = G;
        if (res.dataset.group_count() != best) ++not_max;
        if (res.bytes.size() * 8 > budget || res.bytes.size() != res.storage.file_bytes()) ++over;
    }
    return {trend_breaks == 0 && not_max == 0 && over == 0,
            std::to_string(trend_breaks) + " trend breaks over " + std::to_string(rows.size()) + " ladder points; " +
                std::to_string(not_max) + "/20 budgets without the largest feasible G; " + std::to_string(over) +
                "/20 files over budget"};
}

Outcome entropy_roundtrip() {
    Rng rng(1007);
    std::size_t failures = 0, over = 0;
    for (int t = 0; t < 100000; ++t) {
        const int bits = 2 + static_cast<int>(rng.index(7));
        const std::size_t alphabet = std::size_t{1} << bits;
        const std::size_t n = rng.index(257);
        // random skew: a few symbols get most of the mass
        std::vector<double> w(alphabet);
        const double sharp = rng.uniform(0, 4);
        for (auto& x : w) x = std::pow(rng.uniform01(), sharp);
        double sum = 0;
        for (double x : w) sum += x;
        std::vector<std::uint8_t> s(n);
        for (auto& sym : s) {
            double u = rng.uniform01() * sum;
            std::size_t k = 0;
            while (k + 1 < alphabet && u >= w[k]) u -= w[k++];
            sym = static_cast<std::uint8_t>(k);
        }
        const auto p = ec_encode(s, alphabet);
        const auto bytes = serialize_payload(p);
        if (ec_decode(parse_payload(bytes)) != s) ++failures;
        if (8 * bytes.size() > raw_packed_bits(n, bits) + 8 * payload_header_bytes(p)) ++over;
    }
    return {failures == 0 && over == 0, std::to_string(failures) + " round-trip failures, " + std::to_string(over) +
                                            " streams above raw packing + header, of 100000"};
}

Outcome container_checks() {
    const auto dir = testing::scratch_dir("acceptance");
    std::size_t problems = 0, files = 0;
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const auto bundle = testing::random_bundle(2 + seed, {12 + seed, 10, 3}, 500 + seed);
        const std::size_t PM = kGeom.patch_count(bundle.shape()) * bundle.size();
        for (std::size_t G : {std::size_t{1}, std::size_t{3}, PM}) {
            for (int bits : {2, 5, 8}) {
                const auto c = encode_candidate(bundle, kGeom, bits, G, seed);
                const auto path = (dir / "c.dcqz").string();
                save_container(c.dataset, path);
                ++files;
                if (!(load_container(path) == c.dataset)) ++problems;
                if (std::filesystem::file_size(path) != c.storage.file_bytes()) ++problems;
                if (inspect_container(read_file_bytes(path)).storage != c.storage) ++problems;
            }
        }
    }

    const auto data = (dir / "in.dcqt").string();
    const auto good = (dir / "good.dcqz").string();
    if (cli("generate -o " + data + " --count 3 --height 16 --width 16 --channels 3") != 0) ++problems;
    if (cli("compress " + data + " -o " + good) != 0) ++problems;
    const auto bytes = read_file_bytes(good);
    std::size_t corrupt_runs = 0;
    for (std::size_t pos : {std::size_t{0}, std::size_t{5}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
        auto bad = bytes;
        bad[pos] ^= 0x5a;
        write_file_bytes((dir / "bad.dcqz").string(), bad);
        for (const char* cmd : {"decompress ", "inspect "}) {
            ++corrupt_runs;
            if (cli(cmd + (dir / "bad.dcqz").string()) != 3) ++problems;
        }
    }
    for (std::size_t len : {std::size_t{0}, std::size_t{3}, std::size_t{30}, bytes.size() / 2, bytes.size() - 1}) {
        write_file_bytes((dir / "cut.dcqz").string(), std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + len));
        for (const char* cmd : {"decompress ", "inspect "}) {
            ++corrupt_runs;
            if (cli(cmd + (dir / "cut.dcqz").string()) != 3) ++problems;
        }
    }
    return {problems == 0, std::to_string(problems) + " problems over " + std::to_string(files) + " files and " +
                               std::to_string(corrupt_runs) + " corrupted CLI runs"};
}

Outcome refinement_checks() {
    const auto bundle = corpus(100);
    FeatureNetSpec spec;
    spec.input_channels = 3;
    const FeatureNet net(spec);

    // gradient probes at random pixels of corpus images against a quantized target
    Rng rng(1009);
    const double h = 1e-4;
    std::size_t probes = 0, skipped = 0, bad = 0;
    double worst = 0;
    while (probes < 100 && skipped < 1000) {
        const auto& img = bundle.images()[rng.index(bundle.size())];
        const auto target = net.forward(fake_quant(img, QuantProvider::per_patch(kGeom), 2));
        const Planes x = to_planes(img);
        const std::size_t k = rng.index(x.data.size());
        Planes a = x, b = x;
        a.data[k] += h;
        b.data[k] -= h;
        const auto ta = net.trace(a);
        const auto tb = net.trace(b);
        bool kink = false;
        for (std::size_t l = 0; l < kFeatureLayers && !kink; ++l)
            for (std::size_t i = 0; i < ta.pre_activation[l].data.size(); ++i)
                if ((ta.pre_activation[l].data[i] > 0) != (tb.pre_activation[l].data[i] > 0)) {
                    kink = true;
                    break;
                }
        if (kink) {
            ++skipped;
            continue;
        }
        double la = 0, lb = 0;
        for (std::size_t j = 0; j < kFeatureWidth; ++j) {
            la += (ta.features[j] - target[j]) * (ta.features[j] - target[j]);
            lb += (tb.features[j] - target[j]) * (tb.features[j] - target[j]);
        }
        const double fd = (la - lb) / (2 * h);
        const double g = feature_loss_gradient(net, target, x).data[k];
        const double scale = std::max(std::fabs(fd), std::fabs(g));
        const double rel = scale > 0 ? std::fabs(fd - g) / scale : 0.0;
        worst = std::max(worst, rel);
        if (rel > 1e-4 && std::fabs(fd - g) > 1e-12) ++bad;
        ++probes;
    }

    RefineConfig cfg;
    cfg.iterations = 10;
    cfg.bits = 2;
    cfg.geom = kGeom;
    cfg.provider = ProviderMode::PerPatch;
    const auto out = refine_images(bundle, net, cfg);
    std::size_t rejected = 0;
    for (const auto& r : out.reports)
        if (r.final_loss > r.initial_loss) ++rejected;

    std::vector<ImageTensor> q0, q1;
    for (std::size_t i = 0; i < bundle.size(); ++i) {
        q0.push_back(fake_quant(bundle.images()[i], QuantProvider::per_patch(kGeom), 2));
        q1.push_back(fake_quant(out.bundle.images()[i], QuantProvider::per_patch(kGeom), 2));
    }
    const auto before = measure_distortion(bundle, DatasetBundle(q0, bundle.labels()), spec);
    const auto after = measure_distortion(bundle, DatasetBundle(q1, bundle.labels()), spec);
    return {probes == 100 && bad == 0 && rejected == 0 && after.feature_mse < before.feature_mse,
            std::to_string(probes) + " probes (" + std::to_string(skipped) + " kink-straddling redrawn), " +
                std::to_string(bad) + " above 1e-4, worst " + fmt("%.2e", worst) + "; " + std::to_string(rejected) +
                " contract violations; feature MSE " + fmt("%.4g", before.feature_mse) + " -> " +
                fmt("%.4g", after.feature_mse)};
}

Outcome ablation_checks() {
    const auto bundle = corpus(40);
    AblationOptions o;
    o.geom = kGeom;
    o.bits = 2;
    o.refine.iterations = 5;
    o.features.reset();
    const auto budget = BudgetSpec::ipc(1, bundle.shape());
    std::vector<AblationRow> rows;
    for (const auto& t : all_ablation_toggles()) rows.push_back(ablation_run(bundle, t, budget, o));
    auto find = [&](bool gaq, bool refine, bool ec) {
        for (const auto& r : rows)
            if (r.toggles.gaq == gaq && r.toggles.refine == refine && r.toggles.entropy_coding == ec) return r;
        throw std::logic_error("missing ablation row");
    };
    std::size_t ec_breaks = 0, gaq_breaks = 0, capped = 0, ec_gains = 0;
    for (bool gaq : {false, true})
        for (bool refine : {false, true}) {
            const auto off = find(gaq, refine, false), on = find(gaq, refine, true);
            if (on.images_fit < off.images_fit) ++ec_breaks;
            if (on.images_fit > off.images_fit) ++ec_gains;
        }
    for (bool refine : {false, true})
        for (bool ec : {false, true}) {
            const auto aq = find(false, refine, ec), g = find(true, refine, ec);
            if (g.images_fit != aq.images_fit || !(g.pixel_mse <= aq.pixel_mse)) ++gaq_breaks;
        }
    for (const auto& r : rows)
        if (r.images_fit == bundle.size() || r.images_fit == 0) ++capped;
    return {ec_breaks == 0 && gaq_breaks == 0 && capped == 0,
            "EC fit breaks " + std::to_string(ec_breaks) + " (gains " + std::to_string(ec_gains) +
                "/4), GAQ distortion breaks " + std::to_string(gaq_breaks) + ", images fit AQ/EC " +
                std::to_string(find(false, false, false).images_fit) + "/" +
                std::to_string(find(false, false, true).images_fit) + ", degenerate rows " + std::to_string(capped)};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"C1 quantizer matches reference", quantizer_oracle},
        {"C2 reconstruction error within one step", error_bound},
        {"C3 G=1 and G=P*m degenerate exactly", degeneracy},
        {"C4 k-means optimal on small instances", kmeans_exact},
        {"C5 bit-width distortion trend", bitwidth_trend},
        {"C6 group-count trend and budget solver", group_trend},
        {"C7 entropy coder round trip and size", entropy_roundtrip},
        {"C8 container round trip, accounting, corruption", container_checks},
        {"C9 refinement gradients and improvement", refinement_checks},
        {"C10 ablation structure", ablation_checks},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome r;
        try {
            r = check();
        } catch (const std::exception& e) {
            r = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %s: %s [%.1fs]\n", r.pass ? "PASS" : "FAIL", name.c_str(), r.detail.c_str(), secs);
        std::fflush(stdout);
        if (!r.pass) ++failed;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
