// SPDX-License-Identifier: Apache-2.0
#include "kbitq/error.hpp"
#include "kbitq/safetensors.hpp"
#include "kbitq/synthetic.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

using namespace kbitq;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("kbitq_st_" + name); }

void write_raw(const fs::path& p, const std::string& header, const std::vector<std::uint8_t>& data) {
    std::ofstream f(p, std::ios::binary);
    const std::uint64_t n = header.size();
    for (int i = 0; i < 8; ++i) f.put(static_cast<char>((n >> (8 * i)) & 0xFF));
    f << header;
    f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

Errc open_error(const fs::path& p) {
    try {
        (void)TensorContainer::open(p);
    } catch (const Error& e) {
        return e.code();
    }
    return Errc::Io;
}

std::uint64_t checksum(const std::vector<float>& v) {
    std::uint64_t h = 1469598103934665603ULL;
    for (float x : v) {
        std::uint32_t b;
        std::memcpy(&b, &x, 4);
        h = (h ^ b) * 1099511628211ULL;
    }
    return h;
}

}  // namespace

TEST(Safetensors, MinimalRoundTrip) {
    const auto p = temp_file("min.safetensors");
    const std::vector<NamedTensor> in{{"w", Tensor{{2, 2}, {1.5f, -2.0f, 3.25f, 1e-8f}}}};
    write_container(p, in, StorageDtype::F32, {{"format", "pt"}});
    const auto c = TensorContainer::open(p);
    ASSERT_EQ(c.entries().size(), 1u);
    EXPECT_EQ(c.entries()[0].dtype, "F32");
    EXPECT_EQ(c.metadata().at("format"), "pt");
    const auto t = c.read("w");
    EXPECT_EQ(t.shape, (Shape{2, 2}));
    EXPECT_EQ(t.values, in[0].tensor.values);
    fs::remove(p);
}

TEST(Safetensors, HalfStorage) {
    const auto p = temp_file("f16.safetensors");
    const std::vector<NamedTensor> in{{"a", Tensor{{3}, {0.1f, 1.0f, -70000.0f}}}, {"b", Tensor{{1}, {2.0f}}}};
    write_container(p, in, StorageDtype::F16);
    const auto c = TensorContainer::open(p);
    EXPECT_EQ(c.find("a")->dtype, "F16");
    const auto a = c.read("a");
    EXPECT_EQ(a.values[0], round_to_half(0.1f));
    EXPECT_EQ(a.values[1], 1.0f);
    EXPECT_TRUE(std::isinf(a.values[2]));
    EXPECT_EQ(c.read("b").values[0], 2.0f);
    fs::remove(p);
}

TEST(Safetensors, ReadsBf16AndListsIntegers) {
    const auto p = temp_file("bf16.safetensors");
    // 1.0 = 0x3F80, -2.5 = 0xC020 in bfloat16.
    write_raw(p, R"({"x":{"dtype":"BF16","shape":[2],"data_offsets":[0,4]},"i":{"dtype":"I32","shape":[1],"data_offsets":[4,8]}})",
              {0x80, 0x3F, 0x20, 0xC0, 1, 0, 0, 0});
    const auto c = TensorContainer::open(p);
    EXPECT_EQ(c.read("x").values, (std::vector<float>{1.0f, -2.5f}));
    try {
        (void)c.read("i");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::Format);
    }
    fs::remove(p);
}

TEST(Safetensors, MalformedInputs) {
    const auto p = temp_file("bad.safetensors");
    write_raw(p, R"({"a":{"dtype":"F32","shape":[2],"data_offsets":[0,8]},"b":{"dtype":"F32","shape":[2],"data_offsets":[4,12]}})",
              std::vector<std::uint8_t>(12));
    EXPECT_EQ(open_error(p), Errc::Parse);
    write_raw(p, R"({"a":{"dtype":"F32","shape":[3],"data_offsets":[0,8]}})", std::vector<std::uint8_t>(8));
    EXPECT_EQ(open_error(p), Errc::Parse);
    write_raw(p, R"({"a":{"dtype":"F32","shape":[4],"data_offsets":[0,16]}})", std::vector<std::uint8_t>(8));
    EXPECT_EQ(open_error(p), Errc::Length);
    write_raw(p, R"({"a": not json)", {});
    EXPECT_EQ(open_error(p), Errc::Parse);
    {
        std::ofstream f(p, std::ios::binary);
        f.write("\xff\xff\x00\x00\x00\x00\x00\x00{}", 10);
    }
    EXPECT_EQ(open_error(p), Errc::Length);
    fs::remove(p);
    EXPECT_EQ(open_error(temp_file("does_not_exist")), Errc::Io);
}

TEST(Safetensors, TenMegabyteChecksum) {
    const auto p = temp_file("big.safetensors");
    std::vector<NamedTensor> in;
    for (int i = 0; i < 5; ++i) {
        in.push_back({"layer." + std::to_string(i), synthetic_tensor({512, 1024}, {Distribution::Gaussian, 1, 2.0},
                                                                    static_cast<std::uint64_t>(i) << 20)});
    }
    write_container(p, in);
    EXPECT_GE(fs::file_size(p), 10u * 1000 * 1000);
    const auto c = TensorContainer::open(p);
    for (const auto& t : in) EXPECT_EQ(checksum(c.read(t.name).values), checksum(t.tensor.values));
    fs::remove(p);
}
