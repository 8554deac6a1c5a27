#pragma once

#include <vector>

#include "mfg/types.hpp"

namespace mfg {

/// Exact optimal value of the discrete transportation problem between two
/// weighted point sets with Euclidean ground cost, by the transportation
/// simplex. Optimality is certified internally by the dual solution
/// (complementary slackness + duality gap below 1e-9 relative).
double emd(const std::vector<Vec2>& xs, const Eigen::ArrayXd& a, const std::vector<Vec2>& ys,
           const Eigen::ArrayXd& b);

}  // namespace mfg
