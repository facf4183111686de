#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace floodgnn {

inline constexpr double kOutputStride = 1800.0;  // 30 min sampling (s)
inline constexpr double kBaseDischarge = 100.0;  // initialization discharge (m3/s)

/// Discharge time series sampled every dt seconds.
struct Hydrograph {
    double dt = kOutputStride;
    std::vector<double> q;
    std::optional<int> family_id;
    std::optional<double> peak_target;

    double duration() const { return q.empty() ? 0.0 : dt * static_cast<double>(q.size() - 1); }
    /// Linear interpolation in time, held constant past the last sample.
    double at(double t) const;
};

void validate(const Hydrograph& h);

/// Peak discharge over the largest mean of any contiguous 24 h window
/// (round(86400 / dt) samples) that contains the peak sample.
double shape_coefficient(const Hydrograph& h);

/// Family id (1..k) per hydrograph: sort by shape coefficient, cut into k
/// quantile bins of near-equal size. Family 1 holds the bluntest floods.
std::vector<int> cluster_families(const std::vector<Hydrograph>& historical, int k = 4);

/// Members rescaled to [0, 1], aligned on their peak sample, padded with 0,
/// averaged sample-wise and renormalized to a peak of exactly 1.
Hydrograph representative_hydrograph(const std::vector<Hydrograph>& group);

/// base + (peak - base) * unit.
Hydrograph scale_hydrograph(const Hydrograph& unit, double peak, double base = kBaseDischarge);

struct HydrographCatalogue {
    std::vector<Hydrograph> families;  // unit hydrographs, family id = index + 1
    std::vector<double> peaks;
    std::vector<Hydrograph> events;    // family-major, then increasing peak
};

HydrographCatalogue build_catalogue(const std::vector<Hydrograph>& families, double peak_min = 1000.0,
                                    double peak_max = 3600.0, int intervals = 14, double base = kBaseDischarge);

/// Parameters of the synthetic stand-in for the historical flood record.
struct HistoricalSpec {
    int count = 20;
    double duration_hours = 48.0;
    double time_to_peak_min_hours = 2.0;
    double time_to_peak_max_hours = 4.5;
    double shape_min = 1.5;  // gamma exponent; larger is sharper
    double shape_max = 8.0;
    double base_min = 60.0, base_max = 140.0;
    double peak_min = 600.0, peak_max = 4000.0;
};

/// Gamma-like flood shapes base + (peak - base) * (t/tp)^k * exp(k (1 - t/tp)).
std::vector<Hydrograph> synthetic_historical(const HistoricalSpec& spec, std::uint64_t seed);

/// Cluster, average and scale in one go (the full catalogue recipe).
HydrographCatalogue catalogue_from_historical(const std::vector<Hydrograph>& historical, int families,
                                              double peak_min, double peak_max, int intervals);

// FGH: catalogue as JSON.
nlohmann::json to_json(const HydrographCatalogue& c);
HydrographCatalogue catalogue_from_json(const nlohmann::json& j);
void save_catalogue(const HydrographCatalogue& c, const std::string& path);
HydrographCatalogue load_catalogue(const std::string& path);

nlohmann::json to_json(const HistoricalSpec& s);
HistoricalSpec historical_spec_from_json(const nlohmann::json& j);

}  // namespace floodgnn
