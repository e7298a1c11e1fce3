// SPDX-License-Identifier: Apache-2.0
#include "kbitq/scaling.hpp"

#include "kbitq/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace kbitq {
namespace {

constexpr const char* kColumns[] = {"family", "n_params", "precision_bits", "total_bits", "metric_kind", "value"};

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

// Splits one line; fields may be wrapped in double quotes with "" as an escaped quote.
std::optional<std::vector<std::string>> split_csv(std::string_view line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"' && trim(cur).empty()) {
            quoted = was_quoted = true;
            cur.clear();
        } else if (c == ',') {
            fields.push_back(was_quoted ? cur : trim(cur));
            cur.clear();
            was_quoted = false;
        } else {
            cur += c;
        }
    }
    if (quoted) return std::nullopt;
    fields.push_back(was_quoted ? cur : trim(cur));
    return fields;
}

std::optional<double> parse_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

bool better(MetricKind metric, double a, double b) {
    return metric == MetricKind::Accuracy ? a > b : a < b;
}

}  // namespace

const char* metric_name(MetricKind kind) {
    return kind == MetricKind::Accuracy ? "accuracy" : "perplexity";
}

MetricKind parse_metric(const std::string& name) {
    if (name == "accuracy") return MetricKind::Accuracy;
    if (name == "perplexity") return MetricKind::Perplexity;
    throw Error(Errc::InvalidValue, "unknown metric kind '" + name + "'");
}

void ScalingRecord::validate() const {
    if (!(total_bits > 0.0)) {
        throw Error(Errc::InvalidValue, "total_bits must be positive");
    }
    if (metric == MetricKind::Accuracy && !(value >= 0.0 && value <= 1.0)) {
        throw Error(Errc::InvalidValue, "accuracy must lie in [0,1]");
    }
    if (metric == MetricKind::Perplexity && !(value > 0.0)) {
        throw Error(Errc::InvalidValue, "perplexity must be positive");
    }
}

std::vector<ScalingRecord> parse_scaling_csv(std::istream& in) {
    std::vector<ScalingRecord> records;
    std::vector<std::string> problems;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (trim(line).empty()) continue;
        const auto fields = split_csv(line);
        const std::string where = "line " + std::to_string(line_no) + ": ";
        if (!have_header) {
            bool ok = fields && fields->size() == std::size(kColumns);
            for (std::size_t i = 0; ok && i < fields->size(); ++i) ok = (*fields)[i] == kColumns[i];
            if (!ok) {
                throw Error(Errc::Parse, where + "missing header family,n_params,precision_bits,total_bits,metric_kind,value");
            }
            have_header = true;
            continue;
        }
        if (!fields || fields->size() != std::size(kColumns)) {
            problems.push_back(where + "expected 6 fields");
            continue;
        }
        const auto& f = *fields;
        ScalingRecord r;
        r.family = f[0];
        const auto n_params = parse_number(f[1]);
        const auto precision = parse_number(f[2]);
        const auto total = parse_number(f[3]);
        const auto value = parse_number(f[5]);
        if (!n_params || !precision || !total || !value) {
            problems.push_back(where + "non-numeric field");
            continue;
        }
        r.n_params = *n_params;
        r.precision_bits = *precision;
        r.total_bits = *total;
        r.value = *value;
        try {
            r.metric = parse_metric(f[4]);
            r.validate();
        } catch (const Error& e) {
            problems.push_back(where + e.what());
            continue;
        }
        records.push_back(std::move(r));
    }
    if (!have_header) {
        throw Error(Errc::Parse, "missing header family,n_params,precision_bits,total_bits,metric_kind,value");
    }
    if (!problems.empty()) {
        std::string msg = "invalid scaling records:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw Error(Errc::Parse, msg);
    }
    return records;
}

std::vector<ScalingRecord> parse_scaling_csv(const std::string& text) {
    std::istringstream in(text);
    return parse_scaling_csv(in);
}

ScalingCurve::ScalingCurve(double precision, MetricKind metric, std::vector<Knot> knots)
    : precision_(precision), metric_(metric), knots_(std::move(knots)) {
    if (knots_.size() < 2) {
        throw Error(Errc::InsufficientData, "a scaling curve needs at least two distinct abscissae");
    }
    for (std::size_t i = 1; i < knots_.size(); ++i) {
        if (!(knots_[i].x > knots_[i - 1].x)) {
            throw Error(Errc::InvalidValue, "curve knots must be strictly increasing");
        }
    }
}

double ScalingCurve::at(double x) const {
    if (!covers(x)) {
        throw Error(Errc::OutOfRange, "abscissa outside the observed range of the curve");
    }
    auto hi = std::lower_bound(knots_.begin(), knots_.end(), x, [](const Knot& k, double v) { return k.x < v; });
    if (hi->x == x) return hi->y;
    const auto lo = hi - 1;
    const double t = (x - lo->x) / (hi->x - lo->x);
    return lo->y + t * (hi->y - lo->y);
}

double ScalingCurve::at_bits(double total_bits) const {
    if (!(total_bits > 0.0)) {
        throw Error(Errc::OutOfRange, "bit budget must be positive");
    }
    return at(std::log2(total_bits));
}

CurveMap fit_curves(std::span<const ScalingRecord> records) {
    if (records.empty()) {
        throw Error(Errc::InsufficientData, "no scaling records");
    }
    const MetricKind metric = records.front().metric;
    std::map<double, std::map<double, std::pair<double, std::size_t>>> groups;
    for (const auto& r : records) {
        r.validate();
        if (r.metric != metric) {
            throw Error(Errc::InvalidValue, "records mix accuracy and perplexity");
        }
        auto& slot = groups[r.precision_bits][std::log2(r.total_bits)];
        slot.first += r.value;
        slot.second += 1;
    }
    CurveMap curves;
    for (const auto& [precision, points] : groups) {
        std::vector<Knot> knots;
        for (const auto& [x, acc] : points) knots.push_back({x, acc.first / static_cast<double>(acc.second)});
        if (knots.size() < 2) {
            throw Error(Errc::InsufficientData, "precision group " + std::to_string(precision) +
                                                    " has fewer than two distinct total_bits values");
        }
        curves.emplace(precision, ScalingCurve(precision, metric, std::move(knots)));
    }
    return curves;
}

std::vector<ParetoPoint> pareto_optimal_precision(const CurveMap& curves, std::span<const double> budgets) {
    std::vector<ParetoPoint> out;
    for (double budget : budgets) {
        if (!(budget > 0.0)) {
            throw Error(Errc::OutOfRange, "bit budget must be positive");
        }
        const double x = std::log2(budget);
        std::optional<std::pair<double, double>> best;  // precision, value
        for (const auto& [precision, curve] : curves) {
            if (!curve.covers(x)) continue;
            const double v = curve.at(x);
            if (!best || better(curve.metric(), v, best->second)) best = {precision, v};
        }
        if (!best) {
            throw Error(Errc::OutOfRange, "budget " + std::to_string(budget) + " lies outside every curve");
        }
        out.push_back({budget, best->first});
    }
    return out;
}

std::vector<double> crossing_points(const ScalingCurve& a, const ScalingCurve& b) {
    const double lo = std::max(a.min_x(), b.min_x());
    const double hi = std::min(a.max_x(), b.max_x());
    std::vector<double> xs;
    if (lo > hi) return xs;
    xs.push_back(lo);
    for (const auto* c : {&a, &b}) {
        for (const auto& k : c->knots()) {
            if (k.x > lo && k.x < hi) xs.push_back(k.x);
        }
    }
    xs.push_back(hi);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

    std::vector<double> roots;
    auto add = [&](double x) {
        if (roots.empty() || roots.back() != x) roots.push_back(x);
    };
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double d0 = a.at(xs[i]) - b.at(xs[i]);
        if (d0 == 0.0) {
            add(xs[i]);
            continue;
        }
        if (i + 1 == xs.size()) break;
        const double d1 = a.at(xs[i + 1]) - b.at(xs[i + 1]);
        if (d1 != 0.0 && (d0 < 0.0) != (d1 < 0.0)) {
            add(xs[i] + d0 * (xs[i + 1] - xs[i]) / (d0 - d1));
        }
    }
    return roots;
}

ParallelismReport parallelism_offsets(const CurveMap& curves, std::size_t grid_points) {
    if (curves.empty()) {
        throw Error(Errc::InsufficientData, "no curves");
    }
    ParallelismReport report;
    report.lo = -HUGE_VAL;
    report.hi = HUGE_VAL;
    for (const auto& [p, c] : curves) {
        report.lo = std::max(report.lo, c.min_x());
        report.hi = std::min(report.hi, c.max_x());
    }
    if (report.lo > report.hi) {
        throw Error(Errc::DisjointDomain, "curves share no abscissa range");
    }
    const std::size_t n = report.lo == report.hi ? 1 : std::max<std::size_t>(grid_points, 2);
    std::vector<double> grid(n);
    for (std::size_t i = 0; i < n; ++i) {
        grid[i] = i + 1 == n ? report.hi
                             : report.lo + (report.hi - report.lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    std::vector<double> pooled(n, 0.0);
    for (const auto& [p, c] : curves) {
        for (std::size_t i = 0; i < n; ++i) pooled[i] += c.at(grid[i]);
    }
    for (auto& v : pooled) v /= static_cast<double>(curves.size());

    for (const auto& [p, c] : curves) {
        std::vector<double> dev(n);
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            dev[i] = c.at(grid[i]) - pooled[i];
            mean += dev[i];
        }
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double d : dev) var += (d - mean) * (d - mean);
        report.entries.push_back({p, mean, std::sqrt(var / static_cast<double>(n))});
    }
    return report;
}

nlohmann::ordered_json scaling_report(const CurveMap& curves, std::span<const ParetoPoint> pareto,
                                      const std::optional<ParallelismReport>& parallelism) {
    using Json = nlohmann::ordered_json;
    Json out = {{"curves", Json::array()}, {"pareto", Json::array()}, {"parallelism", nullptr}};
    for (const auto& [p, c] : curves) {
        Json knots = Json::array();
        for (const auto& k : c.knots()) knots.push_back({{"log2_total_bits", k.x}, {"value", k.y}});
        out["curves"].push_back({{"precision_bits", p}, {"metric_kind", metric_name(c.metric())}, {"knots", knots}});
    }
    for (const auto& pt : pareto) out["pareto"].push_back({{"budget", pt.budget}, {"best_precision", pt.best_precision}});
    if (parallelism) {
        Json entries = Json::array();
        for (const auto& e : parallelism->entries) {
            entries.push_back({{"precision_bits", e.precision}, {"mean_offset", e.mean_offset}, {"dispersion", e.dispersion}});
        }
        out["parallelism"] = {{"log2_lo", parallelism->lo}, {"log2_hi", parallelism->hi}, {"curves", entries}};
    }
    return out;
}

}  // namespace kbitq
