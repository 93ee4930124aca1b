// SPDX-License-Identifier: Apache-2.0

#include "dcq/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "dcq/container.hpp"
#include "dcq/entropy.hpp"
#include "dcq/error.hpp"
#include "dcq/parallel.hpp"
#include "dcq/quantizer.hpp"

namespace dcq {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t header_bits(std::size_t image_count) {
    return 8 * (kContainerFixedHeaderBytes + 4 * static_cast<std::uint64_t>(image_count) + kChecksumBytes);
}

/// Fills payload and totals of `row` from the concatenated symbol stream.
void account_payload(SweepRow& row, const std::vector<std::uint8_t>& symbols, int bits, std::size_t image_count) {
    const auto payload = ec_encode(symbols, std::size_t{1} << bits);
    row.size_payload_bits = 8 * serialize_payload(payload).size();
    const std::uint64_t fixed = header_bits(image_count) + row.size_indices_bits + row.size_params_bits;
    row.total_bits = fixed + row.size_payload_bits;
    row.raw_total_bits = fixed + 8 * (2 + 8) + raw_packed_bits(symbols.size(), bits);
}

void fill_distortion(SweepRow& row, const DatasetBundle& original, const DatasetBundle& recon,
                     const SweepOptions& options) {
    const auto d = measure_distortion(original, recon, options.features);
    row.pixel_mse = d.pixel_mse;
    row.feature_mse = d.feature_mse;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

DistortionReport measure_distortion(const DatasetBundle& original, const DatasetBundle& reconstructed,
                                    const std::optional<FeatureNetSpec>& features) {
    if (original.size() != reconstructed.size() || original.empty() || !(original.shape() == reconstructed.shape()))
        throw ShapeError("distortion needs two aligned, non-empty bundles");
    const std::size_t m = original.size();
    DistortionReport r;
    r.image_pixel_mse.assign(m, 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const auto a = original.images()[i].values();
        const auto b = reconstructed.images()[i].values();
        double s = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            const double d = static_cast<double>(a[k]) - static_cast<double>(b[k]);
            s += d * d;
        }
        sum += s;
        r.image_pixel_mse[i] = s / static_cast<double>(a.size());
    }
    r.pixel_mse = sum / static_cast<double>(m * original.shape().size());

    if (!features) {
        r.feature_mse = kNaN;
        return r;
    }
    FeatureNetSpec spec = *features;
    spec.input_channels = original.shape().channels;
    const FeatureNet net(spec);
    r.image_feature_mse.assign(m, 0.0);
    parallel_for(m, [&](std::size_t i) {
        const auto f0 = net.forward(original.images()[i]);
        const auto f1 = net.forward(reconstructed.images()[i]);
        double s = 0.0;
        for (std::size_t k = 0; k < f0.size(); ++k) s += (f0[k] - f1[k]) * (f0[k] - f1[k]);
        r.image_feature_mse[i] = s;
    });
    double fs = 0.0;
    for (double v : r.image_feature_mse) fs += v;
    r.feature_mse = fs / static_cast<double>(m);
    return r;
}

std::string_view method_name(Method m) noexcept {
    switch (m) {
        case Method::WholeAQ: return "WholeAQ";
        case Method::MedianCut: return "MedianCut";
        case Method::PAQ: return "PAQ";
        case Method::GAQ: return "GAQ";
    }
    return "?";
}

Method parse_method(std::string_view name) {
    for (auto m : {Method::WholeAQ, Method::MedianCut, Method::PAQ, Method::GAQ})
        if (method_name(m) == name) return m;
    throw InvalidArgument("unknown method '" + std::string(name) + "'");
}

SweepRow run_method(const DatasetBundle& bundle, Method method, int bits, std::size_t groups,
                    const SweepOptions& options) {
    check_bits(bits);
    if (bundle.empty()) throw InvalidArgument("cannot evaluate an empty bundle");
    const std::size_t m = bundle.size();
    const auto shape = bundle.shape();
    SweepRow row;
    row.method = std::string(method_name(method));
    row.bits = bits;

    std::vector<ImageTensor> recon;
    recon.reserve(m);
    std::vector<std::uint8_t> symbols;
    symbols.reserve(m * shape.size());

    switch (method) {
        case Method::WholeAQ: {
            for (const auto& img : bundle.images()) {
                const auto block = quantize_whole_image(img, bits);
                symbols.insert(symbols.end(), block.symbols.begin(), block.symbols.end());
                recon.emplace_back(shape, dequantize(block));
            }
            row.groups = m;
            row.size_params_bits = m * kGroupParamBits;
            break;
        }
        case Method::PAQ: {
            for (std::size_t i = 0; i < m; ++i) {
                auto patches = split_patches(bundle.images()[i], options.geom, i);
                for (auto& p : patches) {
                    const auto block = quantize(p.values, calibrate(p.values, bits));
                    symbols.insert(symbols.end(), block.symbols.begin(), block.symbols.end());
                    p.values = dequantize(block);
                }
                row.groups += patches.size();
                recon.push_back(merge_patches(patches, shape));
            }
            row.size_params_bits = row.groups * kGroupParamBits;
            break;
        }
        case Method::MedianCut: {
            for (const auto& img : bundle.images()) {
                const auto mc = median_cut_quantize(img, bits);
                symbols.insert(symbols.end(), mc.indices.begin(), mc.indices.end());
                row.size_params_bits += mc.palette.size() * 32;
                recon.push_back(mc.reconstruct(shape));
            }
            row.groups = m;
            break;
        }
        case Method::GAQ: {
            const std::size_t patch_total = options.geom.patch_count(shape) * m;
            const std::size_t G = std::clamp<std::size_t>(groups, 1, patch_total);
            const auto c = encode_candidate(bundle, options.geom, bits, G, options.seed, options.kmeans);
            row.groups = G;
            row.size_indices_bits = c.storage.size_indices;
            row.size_params_bits = c.storage.size_params;
            row.size_payload_bits = c.storage.size_payload;
            row.total_bits = c.storage.total;
            row.raw_total_bits = c.raw_storage.total;
            fill_distortion(row, bundle, decompress(c.dataset), options);
            return row;
        }
    }
    // Median Cut indices are palette slots; the palette never exceeds 2^bits entries.
    account_payload(row, symbols, bits, m);
    fill_distortion(row, bundle, DatasetBundle(std::move(recon), bundle.labels()), options);
    return row;
}

std::vector<SweepRow> sweep_bitwidth(const DatasetBundle& bundle, const std::vector<Method>& methods,
                                     std::vector<int> bits, std::size_t groups, const SweepOptions& options) {
    std::sort(bits.begin(), bits.end());
    bits.erase(std::unique(bits.begin(), bits.end()), bits.end());
    std::vector<SweepRow> rows;
    rows.reserve(methods.size() * bits.size());
    for (auto method : methods)
        for (int b : bits) rows.push_back(run_method(bundle, method, b, groups, options));
    return rows;
}

std::vector<SweepRow> sweep_groups(const DatasetBundle& bundle, int bits, const std::vector<std::size_t>& groups,
                                   const SweepOptions& options) {
    std::vector<SweepRow> rows;
    rows.reserve(groups.size());
    for (auto G : groups) {
        if (G == 0) throw GroupCountError("group count must be positive");
        rows.push_back(run_method(bundle, Method::GAQ, bits, G, options));
    }
    return rows;
}

std::vector<std::size_t> doubling_ladder(std::size_t patch_total) {
    std::vector<std::size_t> out;
    for (std::size_t g = 1; g < patch_total; g *= 2) out.push_back(g);
    if (patch_total > 0) out.push_back(patch_total);
    return out;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "method,bits,groups,pixel_mse,feature_mse,size_indices_bits,size_params_bits,size_payload_bits,total_bits\n";
    for (const auto& r : rows) {
        out << r.method << ',' << r.bits << ',' << r.groups << ',' << format_double(r.pixel_mse) << ','
            << format_double(r.feature_mse) << ',' << r.size_indices_bits << ',' << r.size_params_bits << ','
            << r.size_payload_bits << ',' << r.total_bits << '\n';
    }
}

AblationRow ablation_run(const DatasetBundle& bundle, const AblationToggles& toggles, const BudgetSpec& budget,
                         const AblationOptions& options) {
    if (bundle.empty()) throw InvalidArgument("cannot run an ablation on an empty bundle");
    AblationRow row;
    row.toggles = toggles;
    row.pixel_mse = kNaN;
    row.feature_mse = kNaN;

    DatasetBundle work = bundle;
    if (toggles.refine) {
        FeatureNetSpec spec = options.features.value_or(FeatureNetSpec{});
        spec.input_channels = bundle.shape().channels;
        const FeatureNet net(spec);
        RefineConfig cfg = options.refine;
        cfg.bits = options.bits;
        cfg.geom = options.geom;
        cfg.provider = ProviderMode::PerPatch;
        work = refine_images(bundle, net, cfg).bundle;
    }

    auto bits_of = [&](const Candidate& c) {
        return toggles.entropy_coding ? c.storage.total : c.raw_storage.total;
    };
    // Refinement is per image, so a prefix of the refined bundle is the refined prefix.
    std::optional<Candidate> fitted;
    for (std::size_t n = bundle.size(); n > 0; --n) {
        auto c = encode_candidate(work.prefix(n), options.geom, options.bits, 1, options.seed, options.kmeans);
        if (bits_of(c) <= budget.budget_bits) {
            row.images_fit = n;
            fitted = std::move(c);
            break;
        }
    }
    if (!fitted) return row;

    const auto prefix = work.prefix(row.images_fit);
    if (toggles.gaq) {
        SolverOptions so;
        so.entropy_coding = toggles.entropy_coding;
        so.kmeans = options.kmeans;
        fitted = solve_group_count(prefix, options.geom, options.bits, budget, options.seed, so).best;
    }
    row.groups = fitted->group_count;
    row.total_bits = bits_of(*fitted);
    const auto d = measure_distortion(bundle.prefix(row.images_fit), decompress(fitted->dataset), options.features);
    row.pixel_mse = d.pixel_mse;
    row.feature_mse = d.feature_mse;
    return row;
}

std::vector<AblationToggles> all_ablation_toggles() {
    std::vector<AblationToggles> out;
    for (int mask = 0; mask < 8; ++mask) out.push_back({(mask & 4) != 0, (mask & 2) != 0, (mask & 1) != 0});
    return out;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
    out << "gaq,refine,ec,images_fit,groups,pixel_mse,feature_mse,total_bits\n";
    for (const auto& r : rows) {
        out << int(r.toggles.gaq) << ',' << int(r.toggles.refine) << ',' << int(r.toggles.entropy_coding) << ','
            << r.images_fit << ',' << r.groups << ',' << format_double(r.pixel_mse) << ','
            << format_double(r.feature_mse) << ',' << r.total_bits << '\n';
    }
}

}  // namespace dcq
