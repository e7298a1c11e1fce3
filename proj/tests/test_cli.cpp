// SPDX-License-Identifier: Apache-2.0
#include "kbitq/kbq_format.hpp"
#include "kbitq/safetensors.hpp"
#include "kbitq/synthetic.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

namespace fs = std::filesystem;
using namespace kbitq;

namespace {

struct Run {
    int status = -1;
    std::string out;
};

// Runs the CLI with stderr discarded; captures stdout and the exit status.
Run run(const std::string& args) {
    const std::string cmd = std::string(KBITQ_CLI_PATH) + " " + args + " 2>/dev/null";
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    const int raw = pclose(pipe);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return r;
}

fs::path tmp(const std::string& name) { return fs::temp_directory_path() / ("kbitq_cli_" + name); }

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(Cli, QuantizeReportsBitsPerParam) {
    const auto in = tmp("one.safetensors");
    const auto out = tmp("one.kbq");
    write_container(in, std::vector<NamedTensor>{{"w", synthetic_tensor({64, 64}, {Distribution::Gaussian, 1, 2.0})}});
    const auto r = run("quantize " + in.string() + " -o " + out.string() + " --bits 4 --block-size 64");
    ASSERT_EQ(r.status, 0);
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["tensors"][0]["bits_per_param"]["total"].get<double>(), 4.25);
    EXPECT_EQ(j["total_model_bits"].get<std::uint64_t>(), 64u * 64 * 4 + 64 * 16);
    EXPECT_EQ(read_kbq(out).size(), 1u);
}

TEST(Cli, UsageErrors) {
    EXPECT_EQ(run("quantize --synthetic gaussian --bits 9 -o " + tmp("x.kbq").string()).status, 2);
    EXPECT_EQ(run("quantize --synthetic gaussian --dtype int --exponent-bits 2 -o " + tmp("x.kbq").string()).status, 2);
    EXPECT_EQ(run("quantize --synthetic gaussian --dtype float --bits 2 -o " + tmp("x.kbq").string()).status, 2);
    EXPECT_EQ(run("quantize --synthetic gaussian --block-size 0 -o " + tmp("x.kbq").string()).status, 2);
    EXPECT_EQ(run("quantize -o " + tmp("x.kbq").string()).status, 2);
    EXPECT_EQ(run("frobnicate").status, 2);
    EXPECT_EQ(run("").status, 2);
}

TEST(Cli, RuntimeAndFormatErrors) {
    EXPECT_EQ(run("inspect " + tmp("missing.kbq").string()).status, 1);
    const auto junk = tmp("junk.safetensors");
    {
        std::ofstream f(junk, std::ios::binary);
        f << "\x10\x00\x00\x00\x00\x00\x00\x00{not json at all";
    }
    EXPECT_EQ(run("quantize " + junk.string() + " -o " + tmp("j.kbq").string()).status, 3);
    const auto bad_kbq = tmp("bad.kbq");
    {
        std::ofstream f(bad_kbq, std::ios::binary);
        f << "KBQ1\x05\x00\x00\x00{}xxxxxxx";
    }
    EXPECT_EQ(run("dequantize " + bad_kbq.string() + " -o " + tmp("bad.safetensors").string()).status, 3);
}

TEST(Cli, RequantizationIsByteIdentical) {
    const auto a = tmp("rq_a.kbq"), st = tmp("rq.safetensors"), b = tmp("rq_b.kbq");
    const std::string flags = " --bits 4 --block-size 64";
    ASSERT_EQ(run("quantize --synthetic student-t --seed 3 --rows 96 --cols 64 --layers 2" + flags + " -o " +
                  a.string()).status, 0);
    ASSERT_EQ(run("dequantize " + a.string() + " -o " + st.string()).status, 0);
    ASSERT_EQ(run("quantize " + st.string() + flags + " -o " + b.string()).status, 0);
    EXPECT_EQ(slurp(a), slurp(b));
}

TEST(Cli, SweepGridAndDeterminism) {
    const std::string args = "sweep --synthetic gaussian --seed 2 --rows 128 --cols 128 --bits 4,3 --dtype float,int";
    const auto r1 = run(args);
    const auto r2 = run(args);
    ASSERT_EQ(r1.status, 0);
    EXPECT_EQ(r1.out, r2.out);
    std::vector<std::string> lines;
    std::string line;
    std::istringstream in(r1.out);
    while (std::getline(in, line)) lines.push_back(line);
    ASSERT_EQ(lines.size(), 5u);
    EXPECT_EQ(lines[1].rfind("int,3,", 0), 0u);
    EXPECT_EQ(lines[2].rfind("int,4,", 0), 0u);
    EXPECT_EQ(lines[3].rfind("float,3,", 0), 0u);
    EXPECT_EQ(lines[4].rfind("float,4,", 0), 0u);
    EXPECT_EQ(run("sweep --synthetic gaussian --bits 2 --dtype float").status, 2);
}

TEST(Cli, SweepDataTypeOrdering) {
    const auto r = run("sweep --synthetic gaussian --seed 5 --rows 256 --cols 1024 --bits 4 --dtype int,quantile "
                       "--block-size whole");
    ASSERT_EQ(r.status, 0);
    std::istringstream in(r.out);
    std::string header, int_row, q_row;
    std::getline(in, header);
    std::getline(in, int_row);
    std::getline(in, q_row);
    auto mse = [](const std::string& row) {
        std::vector<std::string> f;
        std::stringstream ss(row);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        return std::stod(f[10]);
    };
    EXPECT_LT(mse(q_row), mse(int_row));
}

TEST(Cli, CodebookAndInspect) {
    const auto r = run("codebook --dtype float --bits 4");
    ASSERT_EQ(r.status, 0);
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["size"], 15);
    EXPECT_EQ(j["exponent_bits"], 2);
    const auto out = tmp("inspect.kbq");
    ASSERT_EQ(run("quantize --synthetic uniform --rows 32 --cols 32 --dtype quantile -o " + out.string()).status, 0);
    const auto i = nlohmann::json::parse(run("inspect " + out.string()).out);
    EXPECT_EQ(i["format"], "KBQ1");
    EXPECT_GT(i["codebook_bytes"].get<int>(), 0);
}

TEST(Cli, OutlierFlagDetectsPlantedRows) {
    const auto out = tmp("outlier.kbq");
    const auto r = run("quantize --synthetic gaussian --seed 1 --rows 64 --cols 100 --layers 3 --planted-outliers 2 "
                       "--outlier-p 0.02 --bits 3 -o " + out.string());
    ASSERT_EQ(r.status, 0);
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["tensors"][0]["outlier_rows"], 0);
    EXPECT_EQ(j["tensors"][1]["outlier_rows"], 2);
    EXPECT_EQ(j["tensors"][2]["outlier_rows"], 2);
}

TEST(Cli, ScalingFit) {
    const auto csv = tmp("records.csv");
    {
        std::ofstream f(csv);
        f << "family,n_params,precision_bits,total_bits,metric_kind,value\n";
        const std::map<int, double> offsets{{3, 0.05}, {4, 0.1}, {8, 0.02}};
        for (const auto& [k, off] : offsets) {
            for (int x = 20; x <= 30; x += 2) f << "synthetic,1," << k << "," << std::exp2(x) << ",accuracy," << 0.02 * x + off << "\n";
        }
    }
    const auto r = run("scaling-fit " + csv.string() + " --budgets 2e6,1e8,1e9");
    ASSERT_EQ(r.status, 0);
    const auto j = nlohmann::json::parse(r.out);
    ASSERT_EQ(j["pareto"].size(), 3u);
    for (const auto& p : j["pareto"]) EXPECT_EQ(p["best_precision"], 4.0);
    EXPECT_EQ(j["curves"].size(), 3u);

    const auto single = tmp("single.csv");
    {
        std::ofstream f(single);
        f << "family,n_params,precision_bits,total_bits,metric_kind,value\nf,1,4,1e6,perplexity,20\nf,1,4,1e8,perplexity,12\n";
    }
    const auto s = nlohmann::json::parse(run("scaling-fit " + single.string()).out);
    EXPECT_EQ(s["curves"].size(), 1u);
    for (const auto& p : s["pareto"]) EXPECT_EQ(p["best_precision"], 4.0);

    const auto headless = tmp("headless.csv");
    {
        std::ofstream f(headless);
        f << "f,1,4,1e6,accuracy,0.2\n";
    }
    EXPECT_EQ(run("scaling-fit " + headless.string()).status, 3);
}
