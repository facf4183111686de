#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "floodgnn/hydrograph.hpp"
#include "floodgnn/mesh.hpp"

namespace floodgnn {

struct SolverConfig {
    double gravity = 9.81;
    double cfl = 0.8;
    double dry_threshold = 1e-3;  // m
    double max_dt = 5.0;          // s
    double output_stride = kOutputStride;
    double min_inflow_area = 0.5;  // m2, floor of the wetted inflow section
    bool friction = true;

    // Spin-up.
    double spinup_discharge = kBaseDischarge;
    double spinup_stage = 1.5;          // m, downstream free surface at the end of the ramp
    double stage_ramp_seconds = 7200.0;
    double spinup_fill_depth = 1.0;     // initial depth above the thalweg, m
    double spinup_tolerance = 1e-4;     // relative volume change per stride
    double spinup_max_seconds = 48.0 * 3600.0;

    // Events.
    double event_stage = 1.5;  // m, held constant
};

void validate(const SolverConfig& c);
nlohmann::json to_json(const SolverConfig& c);
SolverConfig solver_config_from_json(const nlohmann::json& j);

/// Nodal depth and depth-averaged velocity at time t.
struct HydraulicState {
    std::vector<double> h, u, v;
    double t = 0.0;

    std::size_t size() const { return h.size(); }
    static HydraulicState dry(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0.0}; }
};

struct BoundaryForcing {
    std::function<double(double)> discharge;  // m3/s on INFLOW
    std::function<double(double)> stage;      // free-surface elevation on STAGE (m)

    static BoundaryForcing constant(double q, double zs) {
        return {[q](double) { return q; }, [zs](double) { return zs; }};
    }
};

/// Snapshots every output stride (t = 0 included) plus the forcing at each snapshot.
struct StateSequence {
    std::string mesh_hash;
    double stride = kOutputStride;
    std::vector<HydraulicState> snapshots;
    std::vector<double> discharge;  // Q at each snapshot
    std::vector<double> stage;      // Z_s at each snapshot
    nlohmann::json meta = nlohmann::json::object();

    std::size_t size() const { return snapshots.size(); }
    std::size_t node_count() const { return snapshots.empty() ? 0 : snapshots.front().size(); }
};

struct StepReport {
    double dt = 0.0;
    double inflow_rate = 0.0;   // m3/s entering through INFLOW faces
    double outflow_rate = 0.0;  // m3/s leaving through STAGE faces, net of the depth imposed on STAGE nodes
};

/// Node-centred first-order finite volumes on the median-dual cells of a mesh:
/// Rusanov flux with hydrostatic reconstruction, semi-implicit Strickler
/// friction, explicit time stepping.
class SweSolver {
public:
    SweSolver(const TriMesh& mesh, SolverConfig config);

    const TriMesh& mesh() const { return mesh_; }
    const SolverConfig& config() const { return cfg_; }
    const std::vector<double>& cell_area() const { return area_; }

    /// CFL time step: cfl * min_i (cell radius_i / (|u_i| + sqrt(g h_i))), capped by max_dt.
    /// The cell radius is area / dual perimeter.
    double stable_dt(const HydraulicState& s) const;

    /// One explicit update of at most dt_limit seconds; boundaries are re-applied at the new time.
    StepReport step(HydraulicState& s, const BoundaryForcing& f,
                    double dt_limit = std::numeric_limits<double>::infinity()) const;

    void apply_boundaries(HydraulicState& s, const BoundaryForcing& f, double t) const;

    /// Integrates to t_end exactly; returns the last step report.
    StepReport advance_to(HydraulicState& s, const BoundaryForcing& f, double t_end) const;

    double volume(const HydraulicState& s) const;
    /// Wetted area of the inflow section: sum over inflow faces of nodal depth x face length.
    double inflow_wet_area(const HydraulicState& s) const;
    bool has_inflow() const { return !inflow_faces_.empty(); }
    bool has_stage() const { return !stage_nodes_.empty(); }

private:
    struct Face {
        std::uint32_t i, j;
        double nx, ny;  // integrated normal pointing from i to j
        double len, ex, ey;  // its length and direction
    };
    enum class FaceKind : std::uint8_t { Wall, Inflow, Stage };
    struct BoundaryFace {
        std::uint32_t node;
        double nx, ny;  // integrated outward normal
        FaceKind kind;
    };

    const TriMesh& mesh_;
    SolverConfig cfg_;
    std::vector<double> area_;
    std::vector<double> radius_;
    std::vector<Face> faces_;
    std::vector<BoundaryFace> boundary_;
    std::vector<std::uint32_t> inflow_faces_;  // indices into boundary_
    std::vector<double> inflow_dir_x_, inflow_dir_y_;  // per node, inward unit normal (INFLOW nodes)
    std::vector<std::vector<std::array<double, 2>>> wall_normals_;  // per WALL node, unit normals
    std::vector<std::uint32_t> stage_nodes_;
    std::vector<std::uint32_t> inflow_nodes_, wall_nodes_;
    // Flux accumulators reused across steps; a solver instance is not shared between threads.
    mutable std::vector<double> rh_, rhu_, rhv_;
};

/// Channel-fill start for spin-up: depth `depth` above the lowest bed found in
/// the node's along-valley bin.
HydraulicState channel_fill_state(const TriMesh& mesh, double depth);

/// Spin-up with constant spin-up discharge and the downstream stage ramped
/// linearly to spinup_stage, until the relative volume change over one stride
/// falls below spinup_tolerance. The returned state has t = 0.
HydraulicState initialize_domain(const TriMesh& mesh, const SolverConfig& config,
                                 const HydraulicState* start = nullptr);

/// Integrates horizon_seconds from init, recording every output stride.
StateSequence run_event(const TriMesh& mesh, const HydraulicState& init, const Hydrograph& hydrograph,
                        const std::function<double(double)>& stage, const SolverConfig& config,
                        double horizon_seconds);

// FGB container.
std::string serialize_fgb(const StateSequence& seq);
StateSequence parse_fgb(const std::string& bytes);
void save_sequence(const StateSequence& seq, const std::string& path);
StateSequence load_sequence(const std::string& path);

}  // namespace floodgnn
