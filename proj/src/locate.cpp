#include "floodgnn/locate.hpp"

#include <algorithm>
#include <cmath>

namespace floodgnn {

std::array<double, 3> barycentric(const TriMesh& m, std::size_t t, double px, double py) {
    const auto& tri = m.triangles[t];
    const double x0 = m.x[tri[0]], y0 = m.y[tri[0]];
    const double x1 = m.x[tri[1]], y1 = m.y[tri[1]];
    const double x2 = m.x[tri[2]], y2 = m.y[tri[2]];
    const double det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
    const double w1 = ((px - x0) * (y2 - y0) - (x2 - x0) * (py - y0)) / det;
    const double w2 = ((x1 - x0) * (py - y0) - (px - x0) * (y1 - y0)) / det;
    return {1.0 - w1 - w2, w1, w2};
}

TriangleLocator::TriangleLocator(const TriMesh& mesh) : mesh_(mesh) {
    const auto [xmin, xmax] = std::minmax_element(mesh.x.begin(), mesh.x.end());
    const auto [ymin, ymax] = std::minmax_element(mesh.y.begin(), mesh.y.end());
    x0_ = *xmin;
    y0_ = *ymin;
    const double w = std::max(*xmax - *xmin, 1e-9), h = std::max(*ymax - *ymin, 1e-9);
    const double target = std::max<double>(1.0, static_cast<double>(mesh.triangles.size()) / 2.0);
    cell_ = std::sqrt(w * h / target);
    nx_ = static_cast<std::size_t>(w / cell_) + 1;
    ny_ = static_cast<std::size_t>(h / cell_) + 1;

    auto cell_range = [&](std::size_t t, std::size_t& i0, std::size_t& i1, std::size_t& j0, std::size_t& j1) {
        const auto& tri = mesh.triangles[t];
        double bx0 = mesh.x[tri[0]], bx1 = bx0, by0 = mesh.y[tri[0]], by1 = by0;
        for (int k = 1; k < 3; ++k) {
            bx0 = std::min(bx0, mesh.x[tri[k]]);
            bx1 = std::max(bx1, mesh.x[tri[k]]);
            by0 = std::min(by0, mesh.y[tri[k]]);
            by1 = std::max(by1, mesh.y[tri[k]]);
        }
        // Pad by a hair so points on shared edges see every candidate.
        const double pad = 1e-9 * (1.0 + std::max(std::abs(bx1), std::abs(by1)));
        auto clampi = [](double v, std::size_t n) {
            return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(n - 1)));
        };
        i0 = clampi(std::floor((bx0 - pad - x0_) / cell_), nx_);
        i1 = clampi(std::floor((bx1 + pad - x0_) / cell_), nx_);
        j0 = clampi(std::floor((by0 - pad - y0_) / cell_), ny_);
        j1 = clampi(std::floor((by1 + pad - y0_) / cell_), ny_);
    };

    std::vector<std::uint32_t> counts(nx_ * ny_ + 1, 0);
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        std::size_t i0, i1, j0, j1;
        cell_range(t, i0, i1, j0, j1);
        for (std::size_t j = j0; j <= j1; ++j)
            for (std::size_t i = i0; i <= i1; ++i) ++counts[j * nx_ + i + 1];
    }
    for (std::size_t c = 1; c < counts.size(); ++c) counts[c] += counts[c - 1];
    start_ = counts;
    items_.resize(counts.back());
    std::vector<std::uint32_t> fill(counts.begin(), counts.end() - 1);
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        std::size_t i0, i1, j0, j1;
        cell_range(t, i0, i1, j0, j1);
        for (std::size_t j = j0; j <= j1; ++j)
            for (std::size_t i = i0; i <= i1; ++i) items_[fill[j * nx_ + i]++] = static_cast<std::uint32_t>(t);
    }
}

std::optional<PointLocation> TriangleLocator::locate(double px, double py) const {
    const double fi = std::floor((px - x0_) / cell_), fj = std::floor((py - y0_) / cell_);
    if (fi < -1.0 || fj < -1.0 || fi > static_cast<double>(nx_) || fj > static_cast<double>(ny_)) return std::nullopt;
    const std::size_t i = static_cast<std::size_t>(std::clamp(fi, 0.0, static_cast<double>(nx_ - 1)));
    const std::size_t j = static_cast<std::size_t>(std::clamp(fj, 0.0, static_cast<double>(ny_ - 1)));
    const std::size_t c = j * nx_ + i;
    // Bucket items are in ascending triangle order, so the first hit is the lowest index.
    for (std::uint32_t k = start_[c]; k < start_[c + 1]; ++k) {
        const std::uint32_t t = items_[k];
        const auto w = barycentric(mesh_, t, px, py);
        if (w[0] >= -kInsideTolerance && w[1] >= -kInsideTolerance && w[2] >= -kInsideTolerance)
            return PointLocation{t, w};
    }
    return std::nullopt;
}

std::vector<std::optional<PointLocation>> locate_points(const TriMesh& mesh, std::span<const double> px,
                                                        std::span<const double> py) {
    TriangleLocator loc(mesh);
    std::vector<std::optional<PointLocation>> out(px.size());
    for (std::size_t k = 0; k < px.size(); ++k) out[k] = loc.locate(px[k], py[k]);
    return out;
}

}  // namespace floodgnn
