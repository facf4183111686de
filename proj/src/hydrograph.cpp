#include "floodgnn/hydrograph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "floodgnn/common.hpp"
#include "floodgnn/json_util.hpp"

namespace floodgnn {

namespace {
constexpr int kFghVersion = 1;
constexpr double kDay = 86400.0;
}  // namespace

double Hydrograph::at(double t) const {
    if (q.empty()) return 0.0;
    if (t <= 0.0) return q.front();
    const double s = t / dt;
    const auto i = static_cast<std::size_t>(std::floor(s));
    if (i + 1 >= q.size()) return q.back();
    const double w = s - static_cast<double>(i);
    return w == 0.0 ? q[i] : (1.0 - w) * q[i] + w * q[i + 1];
}

void validate(const Hydrograph& h) {
    if (!(h.dt > 0.0)) throw InvalidInput("hydrograph dt must be positive");
    if (h.q.size() < 2) throw InvalidInput("hydrograph needs at least 2 samples");
    for (std::size_t i = 0; i < h.q.size(); ++i)
        if (!(h.q[i] >= 0.0)) throw InvalidInput("hydrograph sample " + std::to_string(i) + " is negative or NaN");
}

double shape_coefficient(const Hydrograph& h) {
    validate(h);
    if (h.duration() < kDay) throw InvalidInput("shape coefficient needs at least 24 h of record");
    const auto peak_it = std::max_element(h.q.begin(), h.q.end());
    if (*peak_it <= 0.0) throw InvalidInput("hydrograph is identically zero");
    const std::size_t n = h.q.size();
    const std::size_t p = static_cast<std::size_t>(peak_it - h.q.begin());
    const std::size_t w = static_cast<std::size_t>(std::lround(kDay / h.dt));

    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + h.q[i];
    const std::size_t first = p + 1 >= w ? p + 1 - w : 0;
    const std::size_t last = std::min(p, n - w);
    double best = 0.0;
    for (std::size_t s = first; s <= last; ++s) best = std::max(best, (prefix[s + w] - prefix[s]) / static_cast<double>(w));
    return *peak_it / best;
}

std::vector<int> cluster_families(const std::vector<Hydrograph>& historical, int k) {
    if (k < 1) throw InvalidInput("family count must be positive");
    const std::size_t n = historical.size();
    if (n < static_cast<std::size_t>(k))
        throw InvalidInput("need at least " + std::to_string(k) + " hydrographs, got " + std::to_string(n));
    std::vector<double> kc(n);
    for (std::size_t i = 0; i < n; ++i) kc[i] = shape_coefficient(historical[i]);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return kc[a] < kc[b]; });
    std::vector<int> family(n);
    for (std::size_t r = 0; r < n; ++r) family[order[r]] = static_cast<int>(r * static_cast<std::size_t>(k) / n) + 1;
    return family;
}

Hydrograph representative_hydrograph(const std::vector<Hydrograph>& group) {
    if (group.empty()) throw InvalidInput("cannot average an empty hydrograph group");
    const double dt = group.front().dt;
    std::vector<std::vector<double>> unit;
    std::vector<std::size_t> peak_idx;
    for (const auto& h : group) {
        validate(h);
        if (h.dt != dt) throw InvalidInput("hydrograph group mixes time steps");
        const auto [lo, hi] = std::minmax_element(h.q.begin(), h.q.end());
        const double range = *hi - *lo;
        if (!(range > 0.0)) throw InvalidInput("cannot normalize a constant hydrograph");
        std::vector<double> u(h.q.size());
        for (std::size_t i = 0; i < u.size(); ++i) u[i] = (h.q[i] - *lo) / range;
        peak_idx.push_back(static_cast<std::size_t>(hi - h.q.begin()));
        unit.push_back(std::move(u));
    }
    const std::size_t align = *std::max_element(peak_idx.begin(), peak_idx.end());
    std::size_t len = 0;
    for (std::size_t m = 0; m < unit.size(); ++m) len = std::max(len, align - peak_idx[m] + unit[m].size());

    std::vector<double> avg(len, 0.0);
    for (std::size_t m = 0; m < unit.size(); ++m) {
        const std::size_t shift = align - peak_idx[m];
        for (std::size_t i = 0; i < unit[m].size(); ++i) avg[shift + i] += unit[m][i];
    }
    for (auto& v : avg) v /= static_cast<double>(unit.size());
    const double top = *std::max_element(avg.begin(), avg.end());
    for (auto& v : avg) v /= top;
    Hydrograph out;
    out.dt = dt;
    out.q = std::move(avg);
    return out;
}

Hydrograph scale_hydrograph(const Hydrograph& unit, double peak, double base) {
    if (!(peak > base)) throw InvalidInput("peak discharge must exceed the base discharge");
    const double top = *std::max_element(unit.q.begin(), unit.q.end());
    if (std::abs(top - 1.0) > 1e-12) throw InvalidInput("unit hydrograph must peak at 1");
    Hydrograph out = unit;
    for (auto& v : out.q) v = base + (peak - base) * v;
    out.peak_target = peak;
    return out;
}

HydrographCatalogue build_catalogue(const std::vector<Hydrograph>& families, double peak_min, double peak_max,
                                    int intervals, double base) {
    if (intervals < 2) throw InvalidInput("catalogue needs at least 2 peak intervals");
    if (families.empty()) throw InvalidInput("catalogue needs at least one family");
    if (!(peak_max > peak_min)) throw InvalidInput("peak_max must exceed peak_min");
    HydrographCatalogue c;
    c.families = families;
    for (int i = 0; i < intervals; ++i) {
        // Symmetric formula so the grid mirrors exactly about its midpoint.
        const double a = static_cast<double>(intervals - 1 - i), b = static_cast<double>(i);
        c.peaks.push_back((a * peak_min + b * peak_max) / static_cast<double>(intervals - 1));
    }
    for (std::size_t f = 0; f < families.size(); ++f) {
        for (double p : c.peaks) {
            Hydrograph e = scale_hydrograph(families[f], p, base);
            e.family_id = static_cast<int>(f) + 1;
            c.events.push_back(std::move(e));
        }
    }
    return c;
}

std::vector<Hydrograph> synthetic_historical(const HistoricalSpec& s, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Hydrograph> out;
    const auto n = static_cast<std::size_t>(std::lround(s.duration_hours * 3600.0 / kOutputStride)) + 1;
    for (int k = 0; k < s.count; ++k) {
        const double tp = rng.uniform(s.time_to_peak_min_hours, s.time_to_peak_max_hours) * 3600.0;
        const double shape = rng.uniform(s.shape_min, s.shape_max);
        const double base = rng.uniform(s.base_min, s.base_max);
        const double peak = rng.uniform(s.peak_min, s.peak_max);
        Hydrograph h;
        h.q.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double r = static_cast<double>(i) * kOutputStride / tp;
            h.q[i] = base + (peak - base) * std::pow(r, shape) * std::exp(shape * (1.0 - r));
        }
        out.push_back(std::move(h));
    }
    return out;
}

HydrographCatalogue catalogue_from_historical(const std::vector<Hydrograph>& historical, int families,
                                              double peak_min, double peak_max, int intervals) {
    const auto family = cluster_families(historical, families);
    std::vector<Hydrograph> reps;
    for (int f = 1; f <= families; ++f) {
        std::vector<Hydrograph> group;
        for (std::size_t i = 0; i < historical.size(); ++i)
            if (family[i] == f) group.push_back(historical[i]);
        reps.push_back(representative_hydrograph(group));
    }
    return build_catalogue(reps, peak_min, peak_max, intervals);
}

nlohmann::json to_json(const HydrographCatalogue& c) {
    nlohmann::json fams = nlohmann::json::array();
    for (const auto& f : c.families) fams.push_back({{"dt", f.dt}, {"q", f.q}});
    nlohmann::json events = nlohmann::json::array();
    for (const auto& e : c.events)
        events.push_back({{"family_id", e.family_id.value_or(0)}, {"peak", e.peak_target.value_or(0.0)}, {"dt", e.dt}, {"q", e.q}});
    return {{"format", "FGH"}, {"version", kFghVersion}, {"families", fams}, {"peaks", c.peaks}, {"events", events}};
}

HydrographCatalogue catalogue_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "FGH") throw InvalidInput("FGH: missing format tag");
    if (j.value("version", -1) != kFghVersion) throw InvalidInput("FGH: unsupported version");
    HydrographCatalogue c;
    for (const auto& f : j.at("families")) {
        Hydrograph h;
        h.dt = f.at("dt").get<double>();
        h.q = f.at("q").get<std::vector<double>>();
        c.families.push_back(std::move(h));
    }
    c.peaks = j.at("peaks").get<std::vector<double>>();
    for (const auto& e : j.at("events")) {
        Hydrograph h;
        h.dt = e.at("dt").get<double>();
        h.q = e.at("q").get<std::vector<double>>();
        h.family_id = e.at("family_id").get<int>();
        h.peak_target = e.at("peak").get<double>();
        validate(h);
        c.events.push_back(std::move(h));
    }
    return c;
}

void save_catalogue(const HydrographCatalogue& c, const std::string& path) { write_file(path, dump_json(to_json(c)) + "\n"); }

HydrographCatalogue load_catalogue(const std::string& path) {
    try {
        return catalogue_from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput("FGH " + path + ": " + e.what());
    }
}

nlohmann::json to_json(const HistoricalSpec& s) {
    return {{"count", s.count},
            {"duration_hours", s.duration_hours},
            {"time_to_peak_min_hours", s.time_to_peak_min_hours},
            {"time_to_peak_max_hours", s.time_to_peak_max_hours},
            {"shape_min", s.shape_min},
            {"shape_max", s.shape_max},
            {"base_min", s.base_min},
            {"base_max", s.base_max},
            {"peak_min", s.peak_min},
            {"peak_max", s.peak_max}};
}

HistoricalSpec historical_spec_from_json(const nlohmann::json& j) {
    HistoricalSpec s;
    s.count = j.value("count", s.count);
    s.duration_hours = j.value("duration_hours", s.duration_hours);
    s.time_to_peak_min_hours = j.value("time_to_peak_min_hours", s.time_to_peak_min_hours);
    s.time_to_peak_max_hours = j.value("time_to_peak_max_hours", s.time_to_peak_max_hours);
    s.shape_min = j.value("shape_min", s.shape_min);
    s.shape_max = j.value("shape_max", s.shape_max);
    s.base_min = j.value("base_min", s.base_min);
    s.base_max = j.value("base_max", s.base_max);
    s.peak_min = j.value("peak_min", s.peak_min);
    s.peak_max = j.value("peak_max", s.peak_max);
    return s;
}

}  // namespace floodgnn
