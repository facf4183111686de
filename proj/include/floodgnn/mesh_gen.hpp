#pragma once

#include <cstdint>

#include "floodgnn/mesh.hpp"

namespace floodgnn {

/// Piecewise-constant target edge length over the valley, in three bands
/// symmetric about the channel axis, plus a global relaxation factor that
/// multiplies every target.
struct DensitySpec {
    double channel_half_width = 100.0;  // half-width of the refined channel band (m)
    double urban_width = 150.0;         // width of each urban band beside the channel (m)
    double channel_spacing = 12.0;
    double urban_spacing = 13.0;
    double floodplain_spacing = 14.0;
    int relaxation = 1;                 // one of 1, 2, 4, 8, 16, 32
    double jitter = 0.15;               // interior node perturbation, fraction of local spacing

    double target_length(double distance_from_axis) const;
};

/// Bed shape of the tilted valley. Elevations are relative to the outlet bank level.
struct ValleyTerrain {
    double outlet_bank_elevation = 2.0;  // floodplain elevation at the downstream edge of the channel (m)
    double slope = 0.001;                // longitudinal bed slope
    double lateral_slope = 0.01;         // floodplain rise away from the channel
    double channel_depth = 3.0;          // incision below the banks (m)
    double carved_half_width = 50.0;     // flat-bottom half-width of the incised channel (m)
    double bank_width = 20.0;            // width of the sloped channel banks (m)
    double strickler_channel = 30.0;
    double strickler_urban = 15.0;
    double strickler_floodplain = 20.0;
};

struct ValleyGeometry {
    double x0 = 0.0, y0 = 0.0;
    double length = 3000.0;  // along the flow direction (x)
    double width = 1200.0;
    ValleyTerrain terrain;

    double axis_y() const { return y0 + 0.5 * width; }
    double bed_elevation(double x, double y) const;
    double strickler(double y, const DensitySpec& spec) const;
};

void validate(const DensitySpec& spec, const ValleyGeometry& geometry);

/// Structured row lattice with per-band spacing, jittered on the interior,
/// zipped row-to-row into triangles and then Delaunay-flipped.
///
/// INFLOW marks upstream-edge nodes within the channel band, STAGE every node
/// on the downstream edge, WALL the rest of the boundary.
TriMesh build_synthetic_valley_mesh(const DensitySpec& spec, const ValleyGeometry& geometry, std::uint64_t seed);

nlohmann::json to_json(const DensitySpec& spec);
nlohmann::json to_json(const ValleyGeometry& geometry);
DensitySpec density_spec_from_json(const nlohmann::json& j);
ValleyGeometry valley_geometry_from_json(const nlohmann::json& j);

}  // namespace floodgnn
