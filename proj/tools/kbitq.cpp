// SPDX-License-Identifier: Apache-2.0
// kbitq: k-bit weight quantization from the command line.
//
// Exit codes: 0 success, 1 runtime error, 2 usage error, 3 data-format error.
// stdout carries JSON or CSV only; diagnostics go to stderr.

#include "kbitq/accounting.hpp"
#include "kbitq/error.hpp"
#include "kbitq/kbq_format.hpp"
#include "kbitq/outlier.hpp"
#include "kbitq/quantizer.hpp"
#include "kbitq/safetensors.hpp"
#include "kbitq/scaling.hpp"
#include "kbitq/synthetic.hpp"

#include <CLI11.hpp>
#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>

namespace {

using Json = nlohmann::ordered_json;
using namespace kbitq;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitFormat = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InputFlags {
    std::string path;
    std::string synthetic;
    std::uint64_t seed = 0;
    std::uint64_t rows = 256;
    std::uint64_t cols = 256;
    std::uint64_t layers = 1;
    std::uint64_t planted = 0;
    double df = 2.0;
};

struct ConfigFlags {
    std::string dtype = "int";
    int bits = 4;
    int exponent_bits = 0;
    std::string block_size = "64";
    bool centered = false;
    double outlier_p = 0.0;
};

void add_input_flags(CLI::App* cmd, InputFlags& in, bool positional) {
    if (positional) {
        cmd->add_option("input", in.path, "safetensors file");
    } else {
        cmd->add_option("--input", in.path, "safetensors file");
    }
    cmd->add_option("--synthetic", in.synthetic, "generate tensors instead of reading a file")
        ->check(CLI::IsMember({"gaussian", "student-t", "uniform"}));
    cmd->add_option("--seed", in.seed, "generator seed");
    cmd->add_option("--rows", in.rows, "synthetic rows (input dims of the first layer)")->check(CLI::PositiveNumber);
    cmd->add_option("--cols", in.cols, "synthetic columns")->check(CLI::PositiveNumber);
    cmd->add_option("--layers", in.layers, "synthetic layer count")->check(CLI::PositiveNumber);
    cmd->add_option("--planted-outliers", in.planted, "hidden units per layer scaled 20x");
    cmd->add_option("--df", in.df, "Student-t degrees of freedom")->check(CLI::PositiveNumber);
}

void add_single_config_flags(CLI::App* cmd, ConfigFlags& c) {
    cmd->add_option("--dtype", c.dtype, "int | float | dynamic | quantile")
        ->check(CLI::IsMember({"int", "float", "dynamic", "quantile"}));
    cmd->add_option("--bits", c.bits, "bits per value")->check(CLI::Range(2, 8));
    cmd->add_option("--exponent-bits", c.exponent_bits, "float exponent bits")->check(CLI::PositiveNumber);
    cmd->add_option("--block-size", c.block_size, "elements per block or 'whole'");
    cmd->add_flag("--centered", c.centered, "subtract the block mean");
    cmd->add_option("--outlier-p", c.outlier_p, "fraction of input dims kept at 16 bits")->check(CLI::Range(0.0, 1.0));
}

std::optional<std::uint64_t> parse_block(const std::string& s) {
    if (s == "whole") return std::nullopt;
    std::uint64_t v = 0;
    std::size_t used = 0;
    try {
        v = std::stoull(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || v == 0 || s.empty() || s[0] == '-') {
        throw UsageError("--block-size must be a positive integer or 'whole', got '" + s + "'");
    }
    return v;
}

QuantConfig make_config(const std::string& dtype, int bits, int exponent_bits, const std::optional<std::uint64_t>& block,
                        bool centered, double p) {
    QuantConfig c;
    c.kind = parse_kind(dtype);
    c.bits = bits;
    c.exponent_bits = exponent_bits;
    c.block_size = block;
    c.centered = centered;
    c.outlier_fraction = p;
    try {
        c.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    return c;
}

QuantConfig make_config(const ConfigFlags& f) {
    if (f.exponent_bits != 0 && f.dtype != "float") {
        throw UsageError("--exponent-bits only applies to --dtype float");
    }
    return make_config(f.dtype, f.bits, f.exponent_bits, parse_block(f.block_size), f.centered, f.outlier_p);
}

std::vector<NamedTensor> load_inputs(const InputFlags& in) {
    if (in.path.empty() == in.synthetic.empty()) {
        throw UsageError("give exactly one of an input file or --synthetic");
    }
    std::vector<NamedTensor> out;
    if (!in.synthetic.empty()) {
        ChainSpec spec;
        spec.dims.push_back(in.rows);
        for (std::uint64_t i = 0; i < in.layers; ++i) spec.dims.push_back(in.cols);
        spec.planted = in.planted;
        spec.data = {parse_distribution(in.synthetic), in.seed, in.df};
        if (in.planted > in.cols) {
            throw UsageError("--planted-outliers exceeds --cols");
        }
        auto chain = planted_chain(spec);
        for (std::size_t i = 0; i < chain.chain.layers.size(); ++i) {
            out.push_back({fmt::format("layers.{}.weight", i), std::move(chain.chain.layers[i])});
        }
        return out;
    }
    const auto container = TensorContainer::open(in.path);
    for (const auto& e : container.entries()) {
        if (!e.is_float()) {
            fmt::print(stderr, "skipping non-float tensor '{}' ({})\n", e.name, e.dtype);
            continue;
        }
        out.push_back({e.name, container.read(e.name)});
    }
    if (out.empty()) {
        throw Error(Errc::EmptyInput, "no floating-point tensors in '" + in.path + "'");
    }
    return out;
}

// Consecutive 2-D tensors whose output width matches the next input height form
// a chain; outlier dims are detected per chain.
std::vector<std::vector<std::uint32_t>> chain_outliers(const std::vector<NamedTensor>& tensors, double p) {
    std::vector<std::vector<std::uint32_t>> dims(tensors.size());
    if (p == 0.0) return dims;
    std::size_t start = 0;
    while (start < tensors.size()) {
        if (!tensors[start].tensor.is_matrix()) {
            ++start;
            continue;
        }
        std::size_t end = start + 1;
        while (end < tensors.size() && tensors[end].tensor.is_matrix() &&
               tensors[end].tensor.shape[0] == tensors[end - 1].tensor.shape[1]) {
            ++end;
        }
        LayerChain chain;
        for (std::size_t i = start; i < end; ++i) chain.layers.push_back(tensors[i].tensor);
        const auto set = detect_outlier_dims(chain, p);
        for (std::size_t i = start; i < end; ++i) dims[i] = set.dims[i - start];
        start = end;
    }
    return dims;
}

Json config_json(const QuantConfig& c) {
    Json j = {{"dtype", kind_name(c.kind)}, {"bits", c.bits}};
    if (c.kind == CodebookKind::Float) j["exponent_bits"] = c.resolved_exponent_bits();
    j["block_size"] = c.block_size ? Json(*c.block_size) : Json("whole");
    j["centered"] = c.centered;
    j["outlier_p"] = c.outlier_fraction;
    return j;
}

Json bits_json(const BitsBreakdown& b) {
    return {{"base", b.base_bits},
            {"block_overhead", b.block_overhead},
            {"centering_overhead", b.centering_overhead},
            {"outlier_overhead", b.outlier_overhead},
            {"total", b.total}};
}

Json errors_json(const ErrorReport& r) {
    return {{"mae", r.mae},
            {"mse", r.mse},
            {"max_abs_error", r.max_abs_error},
            {"snr_db", r.snr_db ? Json(*r.snr_db) : Json(nullptr)},
            {"codebook_utilization", r.codebook_utilization}};
}

std::vector<QuantizedTensor> quantize_all(const std::vector<NamedTensor>& tensors, const QuantConfig& config) {
    const auto outliers = chain_outliers(tensors, config.outlier_fraction);
    std::vector<QuantizedTensor> out;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        auto q = quantize(tensors[i].tensor, config, outliers[i]);
        q.name = tensors[i].name;
        out.push_back(std::move(q));
    }
    return out;
}

int cmd_quantize(const InputFlags& in, const ConfigFlags& flags, const std::string& output) {
    const QuantConfig config = make_config(flags);
    const auto tensors = load_inputs(in);
    const auto qs = quantize_all(tensors, config);
    write_kbq(output, qs);

    Json report = {{"output", output}, {"config", config_json(config)}, {"tensors", Json::array()}};
    std::vector<TensorFootprint> footprints;
    std::uint64_t params = 0;
    for (std::size_t i = 0; i < qs.size(); ++i) {
        const auto& q = qs[i];
        const auto deq = dequantize_tensor(q);
        report["tensors"].push_back({{"name", q.name},
                                     {"shape", q.shape},
                                     {"outlier_rows", q.outlier_rows.size()},
                                     {"bits_per_param", bits_json(bits_per_param(config, q.element_count()))},
                                     {"errors", errors_json(error_metrics(tensors[i].tensor, deq, q))}});
        footprints.push_back(footprint_of(q));
        params += q.element_count();
    }
    const auto total = total_model_bits(footprints);
    report["total_model_bits"] = total;
    report["storage_bits_per_param"] = static_cast<double>(total) / static_cast<double>(params);
    std::cout << report.dump(2) << '\n';
    return 0;
}

int cmd_dequantize(const std::string& input, const std::string& output, const std::string& storage) {
    const auto qs = read_kbq(input);
    std::vector<NamedTensor> named;
    Json report = {{"output", output}, {"tensors", Json::array()}};
    for (const auto& q : qs) {
        named.push_back({q.name, dequantize_tensor(q)});
        report["tensors"].push_back({{"name", q.name}, {"shape", q.shape}});
    }
    write_container(output, named, storage == "f16" ? StorageDtype::F16 : StorageDtype::F32);
    std::cout << report.dump(2) << '\n';
    return 0;
}

bool has_kbq_magic(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw Error(Errc::Io, "cannot open '" + path + "'");
    }
    char magic[4] = {};
    f.read(magic, 4);
    return f.gcount() == 4 && std::equal(kKbqMagic.begin(), kKbqMagic.end(), magic);
}

int cmd_inspect(const std::string& path) {
    Json report;
    if (has_kbq_magic(path)) {
        std::ifstream f(path, std::ios::binary);
        std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        const auto qs = decode_kbq(bytes);
        const auto sizes = kbq_sizes(bytes);
        report = {{"format", "KBQ1"},
                  {"file_bytes", sizes.file_bytes},
                  {"weight_section_bytes", sizes.weight_section_bytes},
                  {"codebook_bytes", sizes.codebook_bytes},
                  {"padding_bytes", sizes.padding_bytes},
                  {"tensors", Json::array()}};
        std::vector<TensorFootprint> footprints;
        for (const auto& q : qs) {
            report["tensors"].push_back({{"name", q.name},
                                         {"shape", q.shape},
                                         {"config", config_json(q.config)},
                                         {"num_blocks", q.num_blocks()},
                                         {"outlier_rows", q.outlier_rows},
                                         {"bits_per_param", bits_json(bits_per_param(q.config, q.element_count()))}});
            footprints.push_back(footprint_of(q));
        }
        report["total_model_bits"] = total_model_bits(footprints);
    } else {
        const auto container = TensorContainer::open(path);
        report = {{"format", "safetensors"}, {"metadata", container.metadata()}, {"tensors", Json::array()}};
        for (const auto& e : container.entries()) {
            report["tensors"].push_back(
                {{"name", e.name}, {"dtype", e.dtype}, {"shape", e.shape}, {"begin", e.begin}, {"end", e.end}});
        }
    }
    std::cout << report.dump(2) << '\n';
    return 0;
}

int cmd_codebook(InputFlags in, const ConfigFlags& flags, std::uint64_t samples) {
    const QuantConfig config = make_config(flags);
    Codebook cb = codebook_for(config.kind == CodebookKind::Quantile ? QuantConfig{} : config);
    if (config.kind == CodebookKind::Quantile) {
        if (!in.synthetic.empty() && in.path.empty()) {
            in.rows = 1;
            in.cols = samples;
            in.layers = 1;
        }
        const auto tensors = load_inputs(in);
        Tensor pooled;
        for (const auto& t : tensors) {
            const auto v = normalized_values(t.tensor, config);
            pooled.values.insert(pooled.values.end(), v.begin(), v.end());
        }
        pooled.shape = {pooled.values.size()};
        // Values are already block-normalized; one whole-tensor pass keeps them unchanged.
        QuantConfig whole = config;
        whole.block_size.reset();
        whole.centered = false;
        cb = codebook_from_data(pooled, whole);
    }
    Json report = config_json(config);
    report.erase("block_size");
    report.erase("centered");
    report.erase("outlier_p");
    report["size"] = cb.size();
    report["values"] = std::vector<float>(cb.values().begin(), cb.values().end());
    std::cout << report.dump(2) << '\n';
    return 0;
}

struct SweepGrid {
    std::vector<std::string> dtypes{"int"};
    std::vector<int> bits{4};
    std::vector<std::string> blocks{"64"};
    std::vector<std::string> centered{"false"};
    std::vector<double> outlier_p{0.0};
};

std::string num(double v) { return fmt::format("{:.9g}", v); }

int cmd_sweep(const InputFlags& in, SweepGrid grid) {
    if (grid.dtypes.empty() || grid.bits.empty() || grid.blocks.empty() || grid.centered.empty() ||
        grid.outlier_p.empty()) {
        throw UsageError("sweep grid is empty");
    }
    std::set<CodebookKind> kinds;
    for (const auto& d : grid.dtypes) kinds.insert(parse_kind(d));
    const std::set<int> bits(grid.bits.begin(), grid.bits.end());
    // nullopt (whole) sorts last.
    std::vector<std::optional<std::uint64_t>> blocks;
    for (const auto& b : grid.blocks) blocks.push_back(parse_block(b));
    std::sort(blocks.begin(), blocks.end(), [](const auto& a, const auto& b) {
        if (!a || !b) return a.has_value() && !b.has_value();
        return *a < *b;
    });
    blocks.erase(std::unique(blocks.begin(), blocks.end()), blocks.end());
    std::set<bool> centered;
    for (const auto& c : grid.centered) {
        if (c == "true" || c == "1") {
            centered.insert(true);
        } else if (c == "false" || c == "0") {
            centered.insert(false);
        } else {
            throw UsageError("--centered values must be true/false, got '" + c + "'");
        }
    }
    const std::set<double> ps(grid.outlier_p.begin(), grid.outlier_p.end());

    std::vector<QuantConfig> configs;
    for (auto kind : kinds) {
        for (int k : bits) {
            for (const auto& b : blocks) {
                for (bool c : centered) {
                    for (double p : ps) {
                        QuantConfig cfg{kind, k, 0, b, c, p};
                        try {
                            cfg.validate();
                        } catch (const Error& e) {
                            fmt::print(stderr, "skipping {} k={}: {}\n", kind_name(kind), k, e.what());
                            continue;
                        }
                        configs.push_back(cfg);
                    }
                }
            }
        }
    }
    if (configs.empty()) {
        throw UsageError("sweep grid has no valid configuration");
    }

    const auto tensors = load_inputs(in);
    std::cout << "dtype,bits,exponent_bits,block_size,centered,outlier_p,bits_per_param,total_model_bits,"
                 "storage_bits_per_param,mae,mse,max_abs_error,snr_db,codebook_utilization\n";
    for (const auto& cfg : configs) {
        const auto qs = quantize_all(tensors, cfg);
        double abs_sum = 0.0, sq_sum = 0.0, max_err = 0.0, signal = 0.0, bpp = 0.0, util = 0.0;
        std::uint64_t params = 0;
        std::vector<TensorFootprint> footprints;
        for (std::size_t i = 0; i < qs.size(); ++i) {
            const auto n = qs[i].element_count();
            const auto deq = dequantize_tensor(qs[i]);
            const auto r = error_metrics(tensors[i].tensor, deq, qs[i]);
            abs_sum += r.mae * static_cast<double>(n);
            sq_sum += r.mse * static_cast<double>(n);
            max_err = std::max(max_err, r.max_abs_error);
            for (float v : tensors[i].tensor.values) signal += static_cast<double>(v) * v;
            bpp += bits_per_param(cfg, n).total * static_cast<double>(n);
            util += r.codebook_utilization * static_cast<double>(n);
            params += n;
            footprints.push_back(footprint_of(qs[i]));
        }
        const double count = static_cast<double>(params);
        const auto total = total_model_bits(footprints);
        const std::string snr = sq_sum == 0.0 ? "inf" : num(10.0 * std::log10(signal / sq_sum));
        std::cout << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", kind_name(cfg.kind), cfg.bits,
                                 cfg.kind == CodebookKind::Float ? std::to_string(cfg.resolved_exponent_bits()) : "",
                                 cfg.block_size ? std::to_string(*cfg.block_size) : "whole",
                                 cfg.centered ? "true" : "false", num(cfg.outlier_fraction), num(bpp / count), total,
                                 num(static_cast<double>(total) / count), num(abs_sum / count), num(sq_sum / count),
                                 num(max_err), snr, num(util / count));
    }
    return 0;
}

int cmd_scaling_fit(const std::string& path, const std::vector<double>& budgets) {
    std::ifstream f(path);
    if (!f) {
        throw Error(Errc::Io, "cannot open '" + path + "'");
    }
    const auto records = parse_scaling_csv(f);
    const auto curves = fit_curves(records);
    std::vector<double> query = budgets;
    if (query.empty()) {
        std::set<double> xs;
        for (const auto& [p, c] : curves) {
            for (const auto& k : c.knots()) xs.insert(std::exp2(k.x));
        }
        query.assign(xs.begin(), xs.end());
    }
    const auto pareto = pareto_optimal_precision(curves, query);
    std::optional<ParallelismReport> par;
    try {
        par = parallelism_offsets(curves);
    } catch (const Error& e) {
        if (e.code() != Errc::DisjointDomain) throw;
        fmt::print(stderr, "parallelism skipped: {}\n", e.what());
    }
    std::cout << scaling_report(curves, pareto, par).dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"k-bit post-training weight quantization"};
    app.require_subcommand(1);

    InputFlags q_in;
    ConfigFlags q_cfg;
    std::string q_out;
    auto* quantize_cmd = app.add_subcommand("quantize", "quantize every float tensor into a KBQ file");
    add_input_flags(quantize_cmd, q_in, true);
    add_single_config_flags(quantize_cmd, q_cfg);
    quantize_cmd->add_option("-o,--output", q_out, "KBQ output path")->required();

    std::string d_in, d_out, d_storage = "f32";
    auto* dequantize_cmd = app.add_subcommand("dequantize", "decode a KBQ file into safetensors");
    dequantize_cmd->add_option("input", d_in, "KBQ file")->required();
    dequantize_cmd->add_option("-o,--output", d_out, "safetensors output path")->required();
    dequantize_cmd->add_option("--storage", d_storage, "f32 | f16")->check(CLI::IsMember({"f32", "f16"}));

    std::string i_path;
    auto* inspect_cmd = app.add_subcommand("inspect", "describe a KBQ or safetensors file");
    inspect_cmd->add_option("path", i_path, "file")->required();

    InputFlags c_in;
    ConfigFlags c_cfg;
    std::uint64_t c_samples = 100000;
    auto* codebook_cmd = app.add_subcommand("codebook", "print a normalized codebook");
    add_input_flags(codebook_cmd, c_in, false);
    add_single_config_flags(codebook_cmd, c_cfg);
    codebook_cmd->add_option("--samples", c_samples, "synthetic sample size for quantile codebooks")
        ->check(CLI::PositiveNumber);

    InputFlags s_in;
    SweepGrid grid;
    auto* sweep_cmd = app.add_subcommand("sweep", "CSV of error and cost over a configuration grid");
    add_input_flags(sweep_cmd, s_in, true);
    sweep_cmd->add_option("--dtype", grid.dtypes, "comma-separated data types")
        ->delimiter(',')
        ->check(CLI::IsMember({"int", "float", "dynamic", "quantile"}));
    sweep_cmd->add_option("--bits", grid.bits, "comma-separated bit widths")->delimiter(',')->check(CLI::Range(2, 8));
    sweep_cmd->add_option("--block-size", grid.blocks, "comma-separated block sizes or 'whole'")->delimiter(',');
    sweep_cmd->add_option("--centered", grid.centered, "comma-separated true/false")->delimiter(',');
    sweep_cmd->add_option("--outlier-p", grid.outlier_p, "comma-separated outlier fractions")
        ->delimiter(',')
        ->check(CLI::Range(0.0, 1.0));

    std::string f_path;
    std::vector<double> budgets;
    auto* fit_cmd = app.add_subcommand("scaling-fit", "fit bit-level scaling curves from a records CSV");
    fit_cmd->add_option("records", f_path, "CSV: family,n_params,precision_bits,total_bits,metric_kind,value")
        ->required();
    fit_cmd->add_option("--budgets", budgets, "comma-separated total-bit budgets")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (quantize_cmd->parsed()) return cmd_quantize(q_in, q_cfg, q_out);
        if (dequantize_cmd->parsed()) return cmd_dequantize(d_in, d_out, d_storage);
        if (inspect_cmd->parsed()) return cmd_inspect(i_path);
        if (codebook_cmd->parsed()) return cmd_codebook(c_in, c_cfg, c_samples);
        if (sweep_cmd->parsed()) return cmd_sweep(s_in, grid);
        if (fit_cmd->parsed()) return cmd_scaling_fit(f_path, budgets);
    } catch (const UsageError& e) {
        fmt::print(stderr, "usage error: {}\n", e.what());
        return kExitUsage;
    } catch (const Error& e) {
        fmt::print(stderr, "error ({}): {}\n", errc_name(e.code()), e.what());
        return e.is_data_format() ? kExitFormat : kExitRuntime;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitRuntime;
    }
    return kExitUsage;
}
