#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "floodgnn/projection.hpp"
#include "floodgnn/surrogate.hpp"

namespace floodgnn {

/// Regular grid over the fine mesh bounding box, both edges included. Point
/// (i, j) sits at (x0 + i * spacing, y0 + j * spacing), stored row-major with
/// j the row; points outside the fine triangulation are masked out.
struct RegularGrid {
    double x0 = 0.0, y0 = 0.0, spacing = 25.0;
    std::size_t nx = 0, ny = 0;
    std::vector<std::uint8_t> inside;        // per point
    std::vector<std::uint32_t> domain;       // indices of inside points, ascending
    std::string mesh_hash;                   // fine mesh the mask was built on

    std::size_t size() const { return nx * ny; }
    std::size_t domain_size() const { return domain.size(); }
    double x(std::size_t i) const { return x0 + static_cast<double>(i) * spacing; }
    double y(std::size_t j) const { return y0 + static_cast<double>(j) * spacing; }
    nlohmann::json spec() const;
};

RegularGrid build_grid(const TriMesh& fine, double spacing = 25.0);

/// How a mesh's nodal fields are read at the in-domain grid points. In-domain
/// points outside this mesh (possible for coarse meshes) take the nearest node.
struct GridSampler {
    std::string mesh_hash, grid_hash;
    std::size_t node_count = 0;
    ProjectionMap map;  // one entry per in-domain grid point
};

GridSampler make_grid_sampler(const TriMesh& mesh, const RegularGrid& grid);

/// Depth per in-domain point, clamped at 0. Throws InvalidInput when the field
/// does not have one value per mesh node.
std::vector<double> grid_depth(std::span<const double> h, const GridSampler& sampler);

struct InundationMap {
    std::vector<std::uint8_t> flooded;  // per in-domain point: depth > threshold
    double threshold = 0.05;
    double lead_minutes = 0.0;
    std::string grid_hash;
};

InundationMap inundation_map(std::span<const double> grid_h, double threshold, double lead_minutes,
                             const std::string& grid_hash);

struct Confusion {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

Confusion confusion(const InundationMap& pred, const InundationMap& ref);
/// TP / (TP + FP + FN); 1 when both maps are dry.
double csi(const InundationMap& pred, const InundationMap& ref);

struct CurveStats {
    std::vector<double> mean, std;  // per lead time, population std across events
};

struct MetricsReport {
    std::string experiment;
    std::vector<double> lead_minutes;
    std::array<CurveStats, 3> l1;               // h, u, v in physical units
    std::map<double, CurveStats> csi;           // per threshold
    std::array<std::vector<std::vector<double>>, 3> l1_per_event;  // [var][event][lead]
    std::size_t events = 0;
};

/// Mean and population std across rows, column by column.
CurveStats curve_stats(const std::vector<std::vector<double>>& per_event);

/// Per lead time and variable: node mean of |pred - target| (area-weighted when
/// weights are given), then mean and std across events.
MetricsReport l1_rollout_curves(const std::vector<StateSequence>& pred, const std::vector<StateSequence>& target,
                                const std::vector<double>* node_weights = nullptr);

/// Mean over lead times 1..end of the event-mean L1(h) curve.
double mean_rollout_l1_h(const MetricsReport& r);

struct MapExport {
    std::size_t event = 0;
    int lead_step = 0;
    double threshold = 0.0;
    InundationMap pred, ref;
    double csi = 0.0;
};

struct EvaluationInputs {
    const Checkpoint* checkpoint = nullptr;
    std::shared_ptr<const SimGraph> graph;     // surrogate mesh graph matching the checkpoint
    const TriMesh* surrogate_mesh = nullptr;
    const TriMesh* fine_mesh = nullptr;
    std::vector<const StateSequence*> targets;    // projected onto the surrogate mesh
    std::vector<const StateSequence*> references; // fine-mesh runs, same events
    std::vector<double> thresholds = {0.05, 0.30};
    int horizon_steps = 12;
    double grid_spacing = 25.0;
    std::vector<int> map_steps;                  // lead steps to export maps at (all events)
    int jobs = 1;                                // events evaluated concurrently
};

struct EvaluationResult {
    MetricsReport report;
    std::vector<StateSequence> rollouts;
    RegularGrid grid;
    std::vector<MapExport> maps;
};

/// Rolls every held-out event out from its initial projected state and scores
/// it: L1 on the surrogate mesh, CSI on the grid against the fine reference.
EvaluationResult evaluate_experiment(const EvaluationInputs& in);

/// CSV rows (experiment, variable-or-threshold, lead_time_minutes, mean, std, n_events).
std::string report_csv(const std::vector<MetricsReport>& reports);

// Plain-text pixmaps, top row = largest y. Colours:
//   masked (outside the domain) 128 128 128
//   dry 255 255 255, flooded 0 0 255
//   comparison: hit 0 0 255, false alarm 255 0 0, miss 255 165 0, dry 255 255 255
//   depth ramp: white at 0 to (0, 0, 128) at max_depth, linear per channel, rounded
std::string render_inundation(const InundationMap& map, const RegularGrid& grid);
std::string render_comparison(const InundationMap& pred, const InundationMap& ref, const RegularGrid& grid);
std::string render_depth(std::span<const double> grid_h, const RegularGrid& grid, double max_depth);

}  // namespace floodgnn
