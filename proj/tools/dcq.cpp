// SPDX-License-Identifier: Apache-2.0
//
// dcq: compress, decompress, refine, sweep and inspect condensed datasets.
// Exit codes: 0 ok, 1 usage or I/O, 2 infeasible budget, 3 corrupt input.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dcq/bytes.hpp"
#include "dcq/codec.hpp"
#include "dcq/container.hpp"
#include "dcq/corpus.hpp"
#include "dcq/error.hpp"
#include "dcq/eval.hpp"
#include "dcq/refinement.hpp"
#include "dcq/tensor.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitCorrupt = 3;

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Accumulates one `RESULT k=v ...` line.
class ResultLine {
public:
    explicit ResultLine(const std::string& command) { out_ << "RESULT command=" << command; }
    template <class T>
    ResultLine& add(const std::string& key, const T& value) {
        out_ << ' ' << key << '=' << value;
        return *this;
    }
    ResultLine& add(const std::string& key, double value) { return add(key, num(value)); }
    void emit() const { std::cout << out_.str() << std::endl; }

private:
    std::ostringstream out_;
};

void add_storage(ResultLine& r, const dcq::StorageBreakdown& s) {
    r.add("size_indices_bits", s.size_indices)
        .add("size_params_bits", s.size_params)
        .add("size_payload_bits", s.size_payload)
        .add("size_header_bits", s.size_header)
        .add("total_bits", s.total)
        .add("file_bytes", s.file_bytes());
}

dcq::PatchGeometry parse_patch(const std::string& text) {
    const auto x = text.find_first_of("xX*");
    std::size_t h = 0, w = 0;
    try {
        if (x == std::string::npos) {
            h = w = std::stoul(text);
        } else {
            h = std::stoul(text.substr(0, x));
            w = std::stoul(text.substr(x + 1));
        }
    } catch (const std::exception&) {
        throw CLI::ValidationError("--patch", "expected HxW, got '" + text + "'");
    }
    if (h == 0 || w == 0 || h > 0xffff || w > 0xffff)
        throw CLI::ValidationError("--patch", "patch sides must be in [1, 65535], got '" + text + "'");
    return {h, w};
}

std::vector<std::uint8_t> read_input(const std::string& path) { return dcq::read_file_bytes(path); }

struct Common {
    std::uint64_t seed = 0;
    int bits = 2;
    std::string patch = "5x5";
    std::size_t restarts = 4;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--seed", c.seed, "Random seed")->capture_default_str();
    app->add_option("--bits,-b", c.bits, "Bit-width")->check(CLI::Range(1, 8))->capture_default_str();
    app->add_option("--patch", c.patch, "Patch size HxW")->capture_default_str();
    app->add_option("--restarts", c.restarts, "k-means restarts")->check(CLI::PositiveNumber)->capture_default_str();
}

dcq::KMeansOptions kmeans_of(const Common& c) {
    dcq::KMeansOptions k;
    k.restarts = c.restarts;
    return k;
}

std::optional<dcq::RefineStage> parse_stage(const std::string& s) {
    if (s == "none") return std::nullopt;
    if (s == "before") return dcq::RefineStage::BeforeGrouping;
    if (s == "after") return dcq::RefineStage::AfterGrouping;
    return dcq::RefineStage::Both;
}

/// Expands `--config FILE` (key=value lines, # comments) into `--key=value`
/// tokens placed before the remaining arguments so explicit flags win.
std::vector<std::string> expand_config(std::vector<std::string> args, CLI::App& app) {
    if (args.empty()) return args;
    CLI::App* sub = nullptr;
    try {
        sub = app.get_subcommand(args.front());
    } catch (const CLI::OptionNotFound&) {
        return args;
    }
    std::vector<std::string> config_tokens;
    std::vector<std::string> rest;
    for (std::size_t i = 1; i < args.size(); ++i) {
        std::string path;
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
            continue;
        }
        std::ifstream in(path);
        if (!in) throw CLI::ValidationError("--config", "cannot open config file '" + path + "'");
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.resize(hash);
            const auto b = line.find_first_not_of(" \t\r");
            if (b == std::string::npos) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw CLI::ValidationError("--config", path + ":" + std::to_string(lineno) + ": expected key=value");
            auto trim = [](std::string s) {
                const auto l = s.find_first_not_of(" \t\r");
                const auto r = s.find_last_not_of(" \t\r");
                return l == std::string::npos ? std::string() : s.substr(l, r - l + 1);
            };
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (sub->get_option_no_throw("--" + key) == nullptr)
                throw CLI::ValidationError("--config", "unknown field '" + key + "' in " + path);
            config_tokens.push_back("--" + key + "=" + value);
        }
    }
    std::vector<std::string> out{args.front()};
    out.insert(out.end(), config_tokens.begin(), config_tokens.end());
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
}

int peek_version(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 6 || bytes[0] != 'D' || bytes[1] != 'C' || bytes[2] != 'Q' || bytes[3] != 'Z') return -1;
    return bytes[4] | (bytes[5] << 8);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Storage codec for condensed image datasets", "dcq"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    // generate
    auto* gen = app.add_subcommand("generate", "Write a seeded synthetic corpus");
    std::string gen_out;
    dcq::CorpusSpec corpus;
    gen->add_option("-o,--output", gen_out, "Output tensor file")->required();
    gen->add_option("--count", corpus.count, "Number of images")->check(CLI::PositiveNumber)->capture_default_str();
    gen->add_option("--height", corpus.shape.height)->check(CLI::PositiveNumber)->capture_default_str();
    gen->add_option("--width", corpus.shape.width)->check(CLI::PositiveNumber)->capture_default_str();
    gen->add_option("--channels", corpus.shape.channels)->check(CLI::PositiveNumber)->capture_default_str();
    gen->add_option("--seed", corpus.seed)->capture_default_str();

    // compress
    auto* comp = app.add_subcommand("compress", "Compress a tensor file into a budget");
    Common cc;
    std::string comp_in, comp_out, comp_refine = "none";
    std::uint64_t budget_ipc = 1;
    std::uint64_t budget_bits = 0;
    std::size_t iterations = 500;
    double step = 0.01;
    comp->add_option("input", comp_in, "Input tensor file")->required();
    comp->add_option("-o,--output", comp_out, "Output container")->required();
    comp->add_option("--budget-ipc", budget_ipc, "Budget in full-precision images")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    comp->add_option("--budget-bits", budget_bits, "Budget in bits (overrides --budget-ipc)");
    comp->add_option("--refine", comp_refine, "Refinement stage")
        ->check(CLI::IsMember({"none", "before", "after", "both"}))
        ->capture_default_str();
    comp->add_option("--iterations", iterations, "Refinement iterations per stage")->capture_default_str();
    comp->add_option("--step", step, "Refinement step size")->check(CLI::PositiveNumber)->capture_default_str();
    add_common(comp, cc);

    // decompress
    auto* dec = app.add_subcommand("decompress", "Decode a container to a tensor file");
    std::string dec_in, dec_out, dec_ref;
    bool dec_features = false;
    dec->add_option("input", dec_in, "Input container")->required();
    dec->add_option("-o,--output", dec_out, "Output tensor file");
    dec->add_option("--reference", dec_ref, "Original tensor file to measure distortion against");
    dec->add_flag("--features", dec_features, "Also report feature distortion");

    // refine
    auto* ref = app.add_subcommand("refine", "Refine images against their quantized versions");
    Common rc;
    std::string ref_in, ref_out, ref_provider = "patch";
    std::size_t ref_iters = 500;
    double ref_step = 0.01;
    ref->add_option("input", ref_in, "Input tensor file")->required();
    ref->add_option("-o,--output", ref_out, "Output tensor file")->required();
    ref->add_option("--iterations", ref_iters)->check(CLI::PositiveNumber)->capture_default_str();
    ref->add_option("--step", ref_step)->check(CLI::PositiveNumber)->capture_default_str();
    ref->add_option("--provider", ref_provider, "Parameter source")
        ->check(CLI::IsMember({"image", "patch"}))
        ->capture_default_str();
    add_common(ref, rc);

    // sweep
    auto* sw = app.add_subcommand("sweep", "Distortion and storage sweeps, CSV output");
    Common sc;
    std::string sw_in, sw_out, sw_mode = "bits";
    std::vector<int> sw_bits{2, 3, 4, 8};
    std::vector<std::string> sw_methods{"WholeAQ", "MedianCut", "PAQ", "GAQ"};
    std::vector<std::size_t> sw_groups;
    std::uint64_t sw_budget_ipc = 1;
    std::size_t sw_iters = 50;
    bool sw_no_features = false;
    sw->add_option("input", sw_in, "Input tensor file")->required();
    sw->add_option("-o,--output", sw_out, "Output CSV (stdout when omitted)");
    sw->add_option("--mode", sw_mode)->check(CLI::IsMember({"bits", "groups", "ablation"}))->capture_default_str();
    sw->add_option("--bit-list", sw_bits, "Bit-widths for --mode bits")->delimiter(',')->check(CLI::Range(1, 8));
    sw->add_option("--methods", sw_methods, "Methods for --mode bits")
        ->delimiter(',')
        ->check(CLI::IsMember({"WholeAQ", "MedianCut", "PAQ", "GAQ"}));
    sw->add_option("--groups", sw_groups, "Group counts (GAQ in --mode bits uses the first)")
        ->delimiter(',')
        ->check(CLI::PositiveNumber);
    sw->add_option("--budget-ipc", sw_budget_ipc, "Budget for --mode ablation")->check(CLI::PositiveNumber);
    sw->add_option("--refine-iterations", sw_iters, "Refinement iterations for --mode ablation")
        ->check(CLI::PositiveNumber);
    sw->add_flag("--no-features", sw_no_features, "Skip feature distortion");
    add_common(sw, sc);

    // inspect
    auto* ins = app.add_subcommand("inspect", "Print container header and storage breakdown");
    std::string ins_in;
    ins->add_option("input", ins_in, "Input container")->required();

    std::vector<std::string> args;
    for (int i = argc - 1; i >= 1; --i) args.emplace_back(argv[i]);
    try {
        std::vector<std::string> forward(args.rbegin(), args.rend());
        forward = expand_config(std::move(forward), app);
        args.assign(forward.rbegin(), forward.rend());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*gen) {
            const auto bundle = dcq::make_smooth_corpus(corpus);
            dcq::save_tensor_file(bundle, gen_out);
            ResultLine("generate")
                .add("images", bundle.size())
                .add("height", corpus.shape.height)
                .add("width", corpus.shape.width)
                .add("channels", corpus.shape.channels)
                .emit();
        } else if (*comp) {
            const auto bundle = dcq::load_tensor_file(comp_in);
            dcq::CompressOptions o;
            o.geom = parse_patch(cc.patch);
            o.bits = cc.bits;
            o.seed = cc.seed;
            o.kmeans = kmeans_of(cc);
            o.budget = budget_bits > 0 ? dcq::BudgetSpec::from_bits(budget_bits)
                                       : dcq::BudgetSpec::ipc(budget_ipc, bundle.shape());
            o.refine = parse_stage(comp_refine);
            for (auto* rcfg : {&o.refine_before, &o.refine_after}) {
                rcfg->iterations = iterations;
                rcfg->step_size = step;
                rcfg->bits = o.bits;
                rcfg->geom = o.geom;
            }
            if (o.refine && iterations == 0) throw dcq::InvalidArgument("--iterations must be positive with --refine");
            const auto res = dcq::compress(bundle, o);
            dcq::write_file_bytes(comp_out, res.bytes);
            ResultLine r("compress");
            r.add("version", dcq::kContainerVersion)
                .add("images", res.dataset.image_count)
                .add("bits", res.dataset.bits)
                .add("groups", res.dataset.group_count())
                .add("budget_bits", o.budget.budget_bits);
            add_storage(r, res.storage);
            r.emit();
        } else if (*dec) {
            const auto bytes = read_input(dec_in);
            const auto data = dcq::read_container(bytes);
            const auto bundle = dcq::decompress(data);
            if (!dec_out.empty()) dcq::save_tensor_file(bundle, dec_out);
            ResultLine r("decompress");
            r.add("images", bundle.size());
            if (!dec_ref.empty()) {
                const auto reference = dcq::load_tensor_file(dec_ref);
                const auto d = dcq::measure_distortion(
                    reference, bundle, dec_features ? std::optional<dcq::FeatureNetSpec>(dcq::FeatureNetSpec{})
                                                    : std::nullopt);
                r.add("pixel_mse", d.pixel_mse).add("feature_mse", d.feature_mse);
            }
            r.emit();
        } else if (*ref) {
            const auto bundle = dcq::load_tensor_file(ref_in);
            dcq::RefineConfig cfg;
            cfg.iterations = ref_iters;
            cfg.step_size = ref_step;
            cfg.bits = rc.bits;
            cfg.geom = parse_patch(rc.patch);
            cfg.provider = ref_provider == "image" ? dcq::ProviderMode::PerImage : dcq::ProviderMode::PerPatch;
            dcq::FeatureNetSpec spec;
            spec.input_channels = bundle.shape().channels;
            const dcq::FeatureNet net(spec);
            const auto out = dcq::refine_images(bundle, net, cfg);
            dcq::save_tensor_file(out.bundle, ref_out);
            double l0 = 0.0, l1 = 0.0;
            for (const auto& rep : out.reports) {
                l0 += rep.initial_loss;
                l1 += rep.final_loss;
            }
            const double n = static_cast<double>(out.reports.size());
            ResultLine("refine")
                .add("images", out.reports.size())
                .add("mean_initial_loss", l0 / n)
                .add("mean_final_loss", l1 / n)
                .emit();
        } else if (*sw) {
            const auto bundle = dcq::load_tensor_file(sw_in);
            std::ostringstream csv;
            const auto geom = parse_patch(sc.patch);
            geom.validate(bundle.shape());
            const std::optional<dcq::FeatureNetSpec> features =
                sw_no_features ? std::nullopt : std::optional<dcq::FeatureNetSpec>(dcq::FeatureNetSpec{});
            std::size_t rows = 0;
            if (sw_mode == "ablation") {
                dcq::AblationOptions ao;
                ao.geom = geom;
                ao.bits = sc.bits;
                ao.seed = sc.seed;
                ao.kmeans = kmeans_of(sc);
                ao.refine.iterations = sw_iters;
                ao.features = features;
                const auto budget = dcq::BudgetSpec::ipc(sw_budget_ipc, bundle.shape());
                std::vector<dcq::AblationRow> out;
                for (const auto& t : dcq::all_ablation_toggles()) out.push_back(dcq::ablation_run(bundle, t, budget, ao));
                dcq::write_ablation_csv(csv, out);
                rows = out.size();
            } else {
                dcq::SweepOptions so;
                so.geom = geom;
                so.seed = sc.seed;
                so.kmeans = kmeans_of(sc);
                so.features = features;
                std::vector<dcq::SweepRow> out;
                if (sw_mode == "bits") {
                    std::vector<dcq::Method> methods;
                    for (const auto& m : sw_methods) methods.push_back(dcq::parse_method(m));
                    const std::size_t G = sw_groups.empty() ? 16 : sw_groups.front();
                    out = dcq::sweep_bitwidth(bundle, methods, sw_bits, G, so);
                } else {
                    const auto groups = sw_groups.empty()
                                            ? dcq::doubling_ladder(geom.patch_count(bundle.shape()) * bundle.size())
                                            : sw_groups;
                    out = dcq::sweep_groups(bundle, sc.bits, groups, so);
                }
                dcq::write_sweep_csv(csv, out);
                rows = out.size();
            }
            if (sw_out.empty()) {
                std::cout << csv.str();
            } else {
                const auto text = csv.str();
                dcq::write_file_bytes(sw_out, std::vector<std::uint8_t>(text.begin(), text.end()));
            }
            ResultLine("sweep").add("mode", sw_mode).add("rows", rows).emit();
        } else if (*ins) {
            const auto bytes = read_input(ins_in);
            try {
                const auto s = dcq::inspect_container(bytes);
                ResultLine r("inspect");
                r.add("version", s.version)
                    .add("images", s.image_count)
                    .add("height", s.shape.height)
                    .add("width", s.shape.width)
                    .add("channels", s.shape.channels)
                    .add("bits", s.bits)
                    .add("patch", std::to_string(s.geom.patch_height) + "x" + std::to_string(s.geom.patch_width))
                    .add("groups", s.group_count);
                add_storage(r, s.storage);
                r.emit();
            } catch (const dcq::FormatError&) {
                const int v = peek_version(bytes);
                ResultLine r("inspect");
                r.add("status", "corrupt");
                if (v >= 0) r.add("version", v);
                r.emit();
                throw;
            }
        }
    } catch (const dcq::InfeasibleBudget& e) {
        std::cerr << "error: " << e.what() << '\n';
        ResultLine("error")
            .add("status", "infeasible")
            .add("required_bits", e.required_bits())
            .add("budget_bits", e.budget_bits())
            .add("deficit_bits", e.deficit_bits())
            .emit();
        return kExitInfeasible;
    } catch (const dcq::FormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitCorrupt;
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitOk;
}
