// SPDX-License-Identifier: Apache-2.0

#include "dcq/codec.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "dcq/entropy.hpp"
#include "dcq/error.hpp"

namespace dcq {
namespace {

/// alphabet u16 + count u64 framing kept by the plain-packing alternative.
constexpr std::uint64_t kRawPayloadHeaderBits = 8 * (2 + 8);

Candidate encode_grouped(const DatasetBundle& bundle, const PatchGeometry& geom, int bits, GroupModel model,
                         const GroupedValues& grouped) {
    Candidate c;
    c.group_count = model.group_count;
    std::vector<std::uint8_t> stream;
    stream.reserve(grouped.total_size());
    for (const auto& block : grouped.symbols) stream.insert(stream.end(), block.symbols.begin(), block.symbols.end());

    auto& d = c.dataset;
    d.shape = bundle.shape();
    d.image_count = bundle.size();
    d.bits = bits;
    d.geom = geom;
    d.labels = bundle.labels();
    d.assignments = model.assignments;
    d.group_params = model.params;
    d.payload = ec_encode(stream, std::size_t{1} << bits);

    const std::size_t patch_total = d.assignments.size();
    c.storage = storage_breakdown(patch_total, d.group_count(), d.image_count, 8 * serialize_payload(d.payload).size());
    c.raw_storage = storage_breakdown(patch_total, d.group_count(), d.image_count,
                                      kRawPayloadHeaderBits + raw_packed_bits(stream.size(), bits));
    c.model = std::move(model);
    return c;
}

}  // namespace

BudgetSpec BudgetSpec::ipc(std::uint64_t images, const ImageShape& shape) {
    if (images == 0 || shape.size() == 0) throw InvalidArgument("budget must cover at least one non-empty image");
    return {images * shape.size() * 32};
}

BudgetSpec BudgetSpec::from_bits(std::uint64_t bits) {
    if (bits == 0) throw InvalidArgument("budget must be positive");
    return {bits};
}

Candidate encode_candidate(const DatasetBundle& bundle, const PatchGeometry& geom, int bits, std::size_t group_count,
                           std::uint64_t seed, const KMeansOptions& kmeans) {
    auto gaq = gaq_quantize(bundle, geom, bits, group_count, seed, kmeans);
    return encode_grouped(bundle, geom, bits, std::move(gaq.model), gaq.grouped);
}

Candidate encode_with_model(const DatasetBundle& bundle, const PatchGeometry& geom, int bits, const GroupModel& model) {
    check_bits(bits);
    const auto patches = split_bundle(bundle, geom);
    const auto grouped = quantize_with_groups(patches, model.assignments, model.params);
    return encode_grouped(bundle, geom, bits, model, grouped);
}

SolveResult solve_group_count(const DatasetBundle& bundle, const PatchGeometry& geom, int bits,
                              const BudgetSpec& budget, std::uint64_t seed, const SolverOptions& options) {
    if (bundle.empty()) throw InvalidArgument("cannot solve the group count of an empty bundle");
    const std::size_t patch_total = geom.patch_count(bundle.shape()) * bundle.size();

    SolveResult result;
    auto evaluate = [&](std::size_t G) {
        auto c = encode_candidate(bundle, geom, bits, G, seed, options.kmeans);
        const auto total = options.entropy_coding ? c.storage.total : c.raw_storage.total;
        result.evaluated.emplace_back(G, total);
        return std::make_pair(total <= budget.budget_bits, std::move(c));
    };

    auto [fits_one, one] = evaluate(1);
    if (!fits_one) {
        const auto total = options.entropy_coding ? one.storage.total : one.raw_storage.total;
        throw InfeasibleBudget(total, budget.budget_bits);
    }
    std::size_t lo = 1;
    std::size_t hi = 0;  // first infeasible grid point, 0 when none
    result.best = std::move(one);
    for (std::size_t g = 2; lo < patch_total; g *= 2) {
        const std::size_t G = std::min(g, patch_total);
        auto [fits, c] = evaluate(G);
        if (!fits) {
            hi = G;
            break;
        }
        lo = G;
        result.best = std::move(c);
    }
    while (hi != 0 && hi - lo > 1) {
        const std::size_t mid = lo + (hi - lo) / 2;
        auto [fits, c] = evaluate(mid);
        if (fits) {
            lo = mid;
            result.best = std::move(c);
        } else {
            hi = mid;
        }
    }
    // Coded size is not monotone in G, so look a short way past the boundary.
    for (std::size_t G = lo + 2; hi != 0 && G <= patch_total && G <= lo + options.upward_probe; ++G) {
        auto [fits, c] = evaluate(G);
        if (fits) {
            lo = G;
            result.best = std::move(c);
        }
    }
    result.group_count = lo;
    return result;
}

CompressResult compress(const DatasetBundle& bundle, const CompressOptions& options) {
    check_bits(options.bits);
    options.geom.validate(bundle.shape());
    CompressResult out{{}, {}, {}, bundle, {}, {}};
    std::optional<FeatureNet> net;
    if (options.refine) {
        FeatureNetSpec spec = options.feature_net;
        spec.input_channels = bundle.shape().channels;
        net.emplace(spec);
    }

    DatasetBundle current = bundle;
    if (options.refine == RefineStage::BeforeGrouping || options.refine == RefineStage::Both) {
        ScheduleConfig sc;
        sc.stage = RefineStage::BeforeGrouping;
        sc.before = options.refine_before;
        sc.geom = options.geom;
        sc.bits = options.bits;
        auto s = refine_schedule(current, *net, sc);
        current = std::move(s.bundle);
        out.before_reports = std::move(s.before_reports);
    }

    SolverOptions so;
    so.kmeans = options.kmeans;
    auto solved = solve_group_count(current, options.geom, options.bits, options.budget, options.seed, so);
    Candidate chosen = std::move(solved.best);

    const bool post = (options.refine == RefineStage::AfterGrouping || options.refine == RefineStage::Both) &&
                      options.refine_after.iterations > 0;
    if (post) {
        // Refining against frozen groups can grow the payload; back off G until it fits.
        std::size_t G = solved.group_count;
        for (;;) {
            ScheduleConfig sc;
            sc.stage = RefineStage::AfterGrouping;
            sc.after = options.refine_after;
            sc.geom = options.geom;
            sc.bits = options.bits;
            sc.group_count = G;
            sc.seed = options.seed;
            sc.kmeans = options.kmeans;
            auto s = refine_schedule(current, *net, sc);
            auto c = encode_with_model(s.bundle, options.geom, options.bits, *s.frozen_model);
            if (c.storage.total <= options.budget.budget_bits) {
                chosen = std::move(c);
                current = std::move(s.bundle);
                out.after_reports = std::move(s.after_reports);
                break;
            }
            if (G == 1) throw InfeasibleBudget(c.storage.total, options.budget.budget_bits);
            G -= std::max<std::size_t>(1, G / 16);
        }
    }

    out.bytes = write_container(chosen.dataset);
    if (out.bytes.size() != chosen.storage.file_bytes())
        throw std::logic_error("storage accounting disagrees with serialized size");
    out.dataset = std::move(chosen.dataset);
    out.storage = chosen.storage;
    out.encoded_input = std::move(current);
    return out;
}

DatasetBundle decompress(const CompressedDataset& data) {
    const auto symbols = ec_decode(data.payload);
    const auto counts = group_value_counts(data.assignments, data.group_count(), data.shape, data.geom);
    std::vector<std::vector<std::uint8_t>> streams(data.group_count());
    std::size_t pos = 0;
    for (std::size_t g = 0; g < streams.size(); ++g) {
        if (counts[g] > symbols.size() - pos) throw FormatError("payload shorter than the group layout requires");
        streams[g].assign(symbols.begin() + static_cast<std::ptrdiff_t>(pos),
                          symbols.begin() + static_cast<std::ptrdiff_t>(pos + counts[g]));
        pos += counts[g];
    }
    if (pos != symbols.size()) throw FormatError("payload longer than the group layout requires");
    auto images = reconstruct_images(data.assignments, data.group_params, streams, data.geom, data.shape,
                                     data.image_count);
    return DatasetBundle(std::move(images), data.labels);
}

DatasetBundle decompress(std::span<const std::uint8_t> bytes) { return decompress(read_container(bytes)); }

}  // namespace dcq
