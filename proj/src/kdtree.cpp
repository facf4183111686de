#include "floodgnn/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "floodgnn/common.hpp"

namespace floodgnn {

namespace {

bool closer(double d2, std::uint32_t i, double best_d2, std::uint32_t best) {
    return d2 < best_d2 || (d2 == best_d2 && i < best);
}

}  // namespace

KdTree::KdTree(std::span<const double> x, std::span<const double> y) : x_(x.begin(), x.end()), y_(y.begin(), y.end()) {
    if (x.size() != y.size()) throw InvalidInput("k-d tree coordinate arrays differ in length");
    if (x.empty()) throw InvalidInput("k-d tree needs at least one point");
    std::vector<std::uint32_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0u);
    nodes_.reserve(x.size());
    root_ = build(idx, 0, idx.size(), 0);
}

std::int32_t KdTree::build(std::vector<std::uint32_t>& idx, std::size_t lo, std::size_t hi, int depth) {
    if (lo >= hi) return -1;
    const int axis = depth % 2;
    const auto& c = axis == 0 ? x_ : y_;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::nth_element(idx.begin() + static_cast<std::ptrdiff_t>(lo), idx.begin() + static_cast<std::ptrdiff_t>(mid),
                     idx.begin() + static_cast<std::ptrdiff_t>(hi),
                     [&](std::uint32_t a, std::uint32_t b) { return c[a] < c[b] || (c[a] == c[b] && a < b); });
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({idx[mid], -1, -1, static_cast<std::uint8_t>(axis)});
    const auto left = build(idx, lo, mid, depth + 1);
    const auto right = build(idx, mid + 1, hi, depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = left;
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
}

void KdTree::search(std::int32_t node, double px, double py, std::uint32_t& best, double& best_d2) const {
    if (node < 0) return;
    const Node& n = nodes_[static_cast<std::size_t>(node)];
    const double dx = x_[n.point] - px, dy = y_[n.point] - py;
    const double d2 = dx * dx + dy * dy;
    if (closer(d2, n.point, best_d2, best)) {
        best = n.point;
        best_d2 = d2;
    }
    const double delta = n.axis == 0 ? px - x_[n.point] : py - y_[n.point];
    const auto near = delta < 0.0 ? n.left : n.right;
    const auto far = delta < 0.0 ? n.right : n.left;
    search(near, px, py, best, best_d2);
    // Equal distances must still be visited so the tie rule sees every candidate.
    if (delta * delta <= best_d2) search(far, px, py, best, best_d2);
}

std::uint32_t KdTree::nearest(double px, double py) const {
    std::uint32_t best = std::numeric_limits<std::uint32_t>::max();
    double best_d2 = std::numeric_limits<double>::infinity();
    search(root_, px, py, best, best_d2);
    return best;
}

std::uint32_t nearest_linear(std::span<const double> x, std::span<const double> y, double px, double py) {
    std::uint32_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::uint32_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - px, dy = y[i] - py;
        const double d2 = dx * dx + dy * dy;
        if (closer(d2, i, best_d2, best)) {
            best = i;
            best_d2 = d2;
        }
    }
    return best;
}

}  // namespace floodgnn
