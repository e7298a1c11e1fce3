// SPDX-License-Identifier: Apache-2.0
#include "kbitq/accounting.hpp"
#include "kbitq/error.hpp"
#include "kbitq/kbq_format.hpp"
#include "kbitq/synthetic.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <nlohmann/json.hpp>

using namespace kbitq;

namespace {

QuantizedTensor mixed_tensor(const QuantConfig& cfg, std::uint64_t seed) {
    ChainSpec spec{{48, 50, 40}, 2, 20.0, {Distribution::Gaussian, seed, 2.0}};
    const auto pc = planted_chain(spec);
    const auto set = detect_outlier_dims(pc.chain, cfg.outlier_fraction);
    auto q = quantize(pc.chain.layers[1], cfg, set.dims[1]);
    q.name = "layer.1";
    return q;
}

Errc decode_error(const std::vector<std::uint8_t>& bytes) {
    try {
        (void)decode_kbq(bytes);
    } catch (const Error& e) {
        return e.code();
    }
    return Errc::Io;
}

}  // namespace

TEST(Kbq, EmptyList) {
    const auto bytes = encode_kbq({});
    EXPECT_EQ(bytes.size() % 8, 0u);
    EXPECT_TRUE(decode_kbq(bytes).empty());
}

TEST(Kbq, CenteredOutlierRoundTrip) {
    const auto q = mixed_tensor({CodebookKind::Int, 4, 0, 64, true, 0.04}, 1);
    ASSERT_EQ(q.outlier_rows.size(), 2u);
    const std::vector<QuantizedTensor> list{q};
    const auto path = std::filesystem::temp_directory_path() / "kbitq_roundtrip.kbq";
    write_kbq(path, list);
    const auto back = read_kbq(path);
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0], q);
    std::filesystem::remove(path);
}

TEST(Kbq, LayoutIsAlignedAndLittleEndian) {
    const auto q = mixed_tensor({CodebookKind::Quantile, 3, 0, 37, false, 0.04}, 2);
    const auto bytes = encode_kbq(std::vector<QuantizedTensor>{q});
    ASSERT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "KBQ1");
    const std::uint32_t len = bytes[4] | (bytes[5] << 8) | (bytes[6] << 16) | (bytes[7] << 24);
    const auto manifest = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + len);
    EXPECT_EQ(manifest["version"], 1);
    const std::uint64_t payload = (8 + len + 7) / 8 * 8;
    const auto& sections = manifest["tensors"][0]["sections"];
    for (const auto& [name, sec] : sections.items()) {
        EXPECT_EQ(sec["offset"].get<std::uint64_t>() % 8, 0u) << name;
    }
    const auto& absmax = sections["absmax"];
    const std::size_t at = payload + absmax["offset"].get<std::size_t>();
    EXPECT_EQ(static_cast<std::uint16_t>(bytes[at] | (bytes[at + 1] << 8)), q.absmax[0].bits);
    EXPECT_EQ(sections["codebook"]["length"].get<std::size_t>(), 4 * q.codebook_values.size());
}

TEST(Kbq, FullGridIdentity) {
    std::vector<QuantizedTensor> all;
    for (auto kind : {CodebookKind::Int, CodebookKind::Float, CodebookKind::DynamicExponent, CodebookKind::Quantile}) {
        for (int k = 2; k <= 8; ++k) {
            if (kind == CodebookKind::Float && k < 3) continue;
            for (bool centered : {false, true}) {
                for (double p : {0.0, 0.04}) {
                    auto q = mixed_tensor({kind, k, 0, 64, centered, p}, static_cast<std::uint64_t>(k));
                    q.name = std::string(kind_name(kind)) + std::to_string(k) + (centered ? "c" : "") +
                             (p > 0 ? "o" : "");
                    all.push_back(std::move(q));
                }
            }
        }
    }
    const auto bytes = encode_kbq(all);
    const auto back = decode_kbq(bytes);
    ASSERT_EQ(back.size(), all.size());
    for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(back[i], all[i]) << all[i].name;
    for (std::size_t i = 0; i < all.size(); ++i) {
        const auto a = dequantize_tensor(all[i]).values;
        EXPECT_EQ(dequantize_tensor(back[i]).values, a);
    }

    std::vector<TensorFootprint> fps;
    for (const auto& q : all) fps.push_back(footprint_of(q));
    const auto sizes = kbq_sizes(bytes);
    EXPECT_EQ(sizes.weight_section_bytes * 8, total_model_bits(fps));
    EXPECT_LT(sizes.padding_bytes, 8 * 6 * all.size());
}

TEST(Kbq, Corruption) {
    const auto q = mixed_tensor({CodebookKind::Int, 4, 0, 64, true, 0.04}, 3);
    const auto good = encode_kbq(std::vector<QuantizedTensor>{q});

    auto bad = good;
    bad[0] = 'X';
    EXPECT_EQ(decode_error(bad), Errc::Format);

    bad = good;
    bad.resize(bad.size() - 8);
    EXPECT_EQ(decode_error(bad), Errc::CorruptData);

    // Edit the manifest so a section length disagrees with the shape.
    const std::uint32_t len = good[4] | (good[5] << 8) | (good[6] << 16) | (good[7] << 24);
    auto manifest = nlohmann::ordered_json::parse(good.begin() + 8, good.begin() + 8 + len);
    auto rebuild = [&](const nlohmann::ordered_json& m) {
        const std::string text = m.dump();
        std::vector<std::uint8_t> out{'K', 'B', 'Q', '1'};
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(text.size() >> (8 * i)));
        out.insert(out.end(), text.begin(), text.end());
        out.resize((out.size() + 7) / 8 * 8, 0);
        out.insert(out.end(), good.begin() + (8 + len + 7) / 8 * 8, good.end());
        return out;
    };
    EXPECT_EQ(decode_kbq(rebuild(manifest))[0], q);
    auto edited = manifest;
    edited["tensors"][0]["sections"]["absmax"]["length"] = 2;
    EXPECT_EQ(decode_error(rebuild(edited)), Errc::CorruptData);
    edited = manifest;
    edited["tensors"][0]["shape"][0] = 51;
    EXPECT_EQ(decode_error(rebuild(edited)), Errc::CorruptData);
    edited = manifest;
    edited["tensors"][0]["sections"]["indices"]["offset"] = 1u << 30;
    EXPECT_EQ(decode_error(rebuild(edited)), Errc::CorruptData);
    edited = manifest;
    edited["tensors"][0].erase("centered");
    EXPECT_EQ(decode_error(rebuild(edited)), Errc::CorruptData);
    edited = manifest;
    edited["tensors"][0]["dtype"]["bits"] = 12;
    EXPECT_EQ(decode_error(rebuild(edited)), Errc::CorruptData);
}
