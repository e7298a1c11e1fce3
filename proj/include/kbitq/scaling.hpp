// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace kbitq {

enum class MetricKind { Accuracy, Perplexity };

const char* metric_name(MetricKind kind);
MetricKind parse_metric(const std::string& name);

struct ScalingRecord {
    std::string family;
    double n_params = 0.0;
    double precision_bits = 0.0;
    double total_bits = 0.0;
    MetricKind metric = MetricKind::Accuracy;
    double value = 0.0;

    /// Throws InvalidValue when total_bits <= 0 or the value is outside the metric's domain.
    void validate() const;
};

/// Parses family,n_params,precision_bits,total_bits,metric_kind,value.
/// Throws Parse listing every offending line number.
std::vector<ScalingRecord> parse_scaling_csv(std::istream& in);
std::vector<ScalingRecord> parse_scaling_csv(const std::string& text);

struct Knot {
    double x = 0.0;  // log2(total_bits)
    double y = 0.0;
};

/// Piecewise-linear curve over log2(total_bits) for one precision group.
class ScalingCurve {
public:
    ScalingCurve(double precision, MetricKind metric, std::vector<Knot> knots);

    [[nodiscard]] double precision() const { return precision_; }
    [[nodiscard]] MetricKind metric() const { return metric_; }
    [[nodiscard]] const std::vector<Knot>& knots() const { return knots_; }
    [[nodiscard]] double min_x() const { return knots_.front().x; }
    [[nodiscard]] double max_x() const { return knots_.back().x; }
    [[nodiscard]] bool covers(double x) const { return x >= min_x() && x <= max_x(); }

    /// Value at abscissa x = log2(total_bits); throws OutOfRange outside the knots.
    [[nodiscard]] double at(double x) const;
    [[nodiscard]] double at_bits(double total_bits) const;

private:
    double precision_;
    MetricKind metric_;
    std::vector<Knot> knots_;
};

using CurveMap = std::map<double, ScalingCurve>;

/// Groups by precision, averages repeated abscissae, and fits one curve per group.
CurveMap fit_curves(std::span<const ScalingRecord> records);

struct ParetoPoint {
    double budget = 0.0;
    double best_precision = 0.0;
};

/// Best curve value per budget (total bits); ties go to the lower precision.
std::vector<ParetoPoint> pareto_optimal_precision(const CurveMap& curves, std::span<const double> budgets);

/// Abscissae (log2 bits) where two curves cross within their shared range.
std::vector<double> crossing_points(const ScalingCurve& a, const ScalingCurve& b);

struct ParallelismEntry {
    double precision = 0.0;
    double mean_offset = 0.0;
    double dispersion = 0.0;
};

struct ParallelismReport {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<ParallelismEntry> entries;
};

ParallelismReport parallelism_offsets(const CurveMap& curves, std::size_t grid_points = 101);

/// {curves, pareto, parallelism}
nlohmann::ordered_json scaling_report(const CurveMap& curves, std::span<const ParetoPoint> pareto,
                                      const std::optional<ParallelismReport>& parallelism);

}  // namespace kbitq
