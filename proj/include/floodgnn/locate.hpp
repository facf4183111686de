#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "floodgnn/mesh.hpp"

namespace floodgnn {

struct PointLocation {
    std::uint32_t triangle;
    std::array<double, 3> weights;  // barycentric, aligned with the triangle's vertices
};

/// Bucket grid over triangle bounding boxes for point-in-triangle queries.
/// A point is inside when all barycentric weights are >= -1e-10; among several
/// containing triangles the lowest index wins.
class TriangleLocator {
public:
    explicit TriangleLocator(const TriMesh& mesh);

    std::optional<PointLocation> locate(double px, double py) const;

private:
    const TriMesh& mesh_;
    double x0_, y0_, cell_;
    std::size_t nx_, ny_;
    std::vector<std::uint32_t> start_;   // CSR offsets per bucket
    std::vector<std::uint32_t> items_;   // triangle ids, ascending within a bucket
};

inline constexpr double kInsideTolerance = 1e-10;

/// Barycentric weights of (px, py) in triangle t (may be negative outside).
std::array<double, 3> barycentric(const TriMesh& mesh, std::size_t t, double px, double py);

/// One entry per point; std::nullopt marks OUTSIDE.
std::vector<std::optional<PointLocation>> locate_points(const TriMesh& mesh, std::span<const double> px,
                                                        std::span<const double> py);

}  // namespace floodgnn
