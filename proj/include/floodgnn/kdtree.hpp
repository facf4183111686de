#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace floodgnn {

/// 2D k-d tree answering exact Euclidean nearest-neighbour queries. Among
/// equidistant points the lowest index wins.
class KdTree {
public:
    KdTree(std::span<const double> x, std::span<const double> y);

    std::uint32_t nearest(double px, double py) const;
    std::size_t size() const { return x_.size(); }

private:
    struct Node {
        std::uint32_t point;
        std::int32_t left = -1, right = -1;
        std::uint8_t axis = 0;
    };

    std::int32_t build(std::vector<std::uint32_t>& idx, std::size_t lo, std::size_t hi, int depth);
    void search(std::int32_t node, double px, double py, std::uint32_t& best, double& best_d2) const;

    std::vector<double> x_, y_;
    std::vector<Node> nodes_;
    std::int32_t root_ = -1;
};

/// Index of the nearest point by linear scan, with the same tie rule.
std::uint32_t nearest_linear(std::span<const double> x, std::span<const double> y, double px, double py);

}  // namespace floodgnn
