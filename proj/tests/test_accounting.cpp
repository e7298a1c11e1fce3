// SPDX-License-Identifier: Apache-2.0
#include "kbitq/accounting.hpp"
#include "kbitq/error.hpp"
#include "kbitq/synthetic.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace kbitq;

TEST(Bits, WorkedArithmetic) {
    EXPECT_EQ(bits_per_param({CodebookKind::Int, 4, 0, 64, false, 0.0}).total, 4.25);
    const auto outliers = bits_per_param({CodebookKind::Int, 4, 0, std::nullopt, false, 0.02});
    EXPECT_EQ(outliers.outlier_overhead, 0.24);
    EXPECT_EQ(outliers.total, 4.24);
    EXPECT_EQ(bits_per_param({CodebookKind::Int, 8, 0, std::nullopt, false, 0.0}).total, 8.0);
    const auto centered = bits_per_param({CodebookKind::Int, 4, 0, 64, true, 0.0});
    EXPECT_EQ(centered.centering_overhead, 0.25);
    EXPECT_EQ(centered.total, 4.5);
    EXPECT_EQ(bits_per_param({CodebookKind::Int, 4, 0, std::nullopt, false, 0.0}, 1024).block_overhead, 16.0 / 1024);
}

TEST(Bits, Monotone) {
    for (int k = 2; k <= 8; ++k) {
        double prev = 0.0;
        for (std::uint64_t b : {4096u, 1024u, 256u, 64u, 16u}) {
            const double t = bits_per_param({CodebookKind::Int, k, 0, b, false, 0.0}).total;
            EXPECT_GE(t, prev);
            prev = t;
        }
        prev = 0.0;
        for (double p : {0.0, 0.01, 0.02, 0.1}) {
            const double t = bits_per_param({CodebookKind::Int, k, 0, 64, false, p}).total;
            EXPECT_GE(t, prev);
            prev = t;
        }
    }
}

TEST(TotalBits, HandCount) {
    const TensorFootprint one{64, {CodebookKind::Int, 4, 0, 64, false, 0.0}, 0, 64};
    EXPECT_EQ(total_model_bits(std::vector<TensorFootprint>{one}), 272u);
    EXPECT_EQ(total_model_bits(std::vector<TensorFootprint>{}), 0u);
    EXPECT_EQ(total_model_bits(std::vector<TensorFootprint>{one, one}), 544u);
    // 3 outlier rows of 10: 3 * 32 index bits + 30 * 16 value bits; 70 k-bit elements.
    const TensorFootprint mixed{100, {CodebookKind::Int, 3, 0, 64, true, 0.03}, 3, 10};
    const auto s = section_bytes(mixed);
    EXPECT_EQ(s.indices, (70u * 3 + 7) / 8);
    EXPECT_EQ(s.absmax, 4u);
    EXPECT_EQ(s.means, 4u);
    EXPECT_EQ(s.outlier_dims, 12u);
    EXPECT_EQ(s.outlier_values, 60u);
}

TEST(TotalBits, FootprintOfQuantized) {
    const Tensor t = synthetic_tensor({64}, {Distribution::Gaussian, 1, 2.0});
    const auto q = quantize(t, {CodebookKind::Int, 4, 0, 64, false, 0.0});
    EXPECT_EQ(total_model_bits(std::vector<TensorFootprint>{footprint_of(q)}), 272u);
}

TEST(Errors, Examples) {
    const Tensor a{{2}, {0, 1}}, b{{2}, {0, 0.5f}};
    QuantizedTensor q;
    q.shape = {2};
    q.config = {CodebookKind::Int, 4, 0, std::nullopt, false, 0.0};
    q.quantized_count = 2;
    q.indices = pack_indices(std::vector<std::uint8_t>{7, 14}, 4);
    const auto r = error_metrics(a, b, q);
    EXPECT_DOUBLE_EQ(r.mse, 0.125);
    EXPECT_DOUBLE_EQ(r.mae, 0.25);
    EXPECT_DOUBLE_EQ(r.max_abs_error, 0.5);
    ASSERT_TRUE(r.snr_db.has_value());
    EXPECT_NEAR(*r.snr_db, 10 * std::log10(1.0 / 0.25), 1e-12);
    EXPECT_DOUBLE_EQ(r.codebook_utilization, 2.0 / 15.0);

    const auto lossless = error_metrics(a, a, q);
    EXPECT_EQ(lossless.mse, 0.0);
    EXPECT_FALSE(lossless.snr_db.has_value());

    const Tensor c{{3}, {0, 1, 2}};
    EXPECT_THROW((void)error_metrics(a, c, q), Error);
}

TEST(Errors, GaussianUsesEveryCode) {
    const Tensor t = synthetic_tensor({1 << 16}, {Distribution::Gaussian, 2, 2.0});
    const auto q = quantize(t, {CodebookKind::Int, 4, 0, 64, false, 0.0});
    const auto r = error_metrics(t, dequantize_tensor(q), q);
    EXPECT_EQ(r.codebook_utilization, 1.0);
}

TEST(Pearson, Examples) {
    const std::vector<double> x{1, 2, 3}, y{1, 3, 2};
    EXPECT_NEAR(pearson_correlation(x, y), 0.5, 1e-15);
    std::vector<double> lin, neg;
    for (double v : x) {
        lin.push_back(2 * v + 1);
        neg.push_back(-v);
    }
    EXPECT_DOUBLE_EQ(pearson_correlation(x, lin), 1.0);
    EXPECT_DOUBLE_EQ(pearson_correlation(x, neg), -1.0);
}

TEST(Pearson, Errors) {
    auto code = [](std::vector<double> a, std::vector<double> b) {
        try {
            (void)pearson_correlation(a, b);
        } catch (const Error& e) {
            return e.code();
        }
        return Errc::Io;
    };
    EXPECT_EQ(code({1, 1, 1}, {1, 2, 3}), Errc::UndefinedCorrelation);
    EXPECT_EQ(code({1, 2}, {1, 2, 3}), Errc::Dimension);
    EXPECT_EQ(code({1}, {1}), Errc::InsufficientData);
    EXPECT_EQ(code({0.1, 0.1, 0.1}, {3, 2, 1}), Errc::UndefinedCorrelation);
}

TEST(Pearson, AffineInvariance) {
    const CounterRng rng(4);
    std::vector<double> x(500), y(500);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.normal(i);
        y[i] = 0.3 * x[i] + rng.normal(1000 + i);
    }
    const double r = pearson_correlation(x, y);
    std::vector<double> xa(x.size()), ya(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xa[i] = 3.5 * x[i] - 2.0;
        ya[i] = 0.25 * y[i] + 7.0;
    }
    EXPECT_NEAR(pearson_correlation(xa, ya), r, 1e-12);
}
