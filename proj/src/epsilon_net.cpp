#include "cppe/errors.hpp"
#include "cppe/policies.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <vector>

namespace cppe {

namespace {

ActionSet net_1d(double eps) {
  // Spacing 1/N <= 2 eps.
  const int n = static_cast<int>(std::ceil(1.0 / (2.0 * eps)));
  Mat pts(2 * n + 1, 1);
  for (int j = -n; j <= n; ++j) pts(j + n, 0) = static_cast<double>(j) / n;
  return ActionSet::from_rows(std::move(pts));
}

// Origin plus concentric rings. A point at radius rho is matched to the ring
// r with |rho - r| <= dr/2 and the nearest angle a <= pi/N_r; the distance
// satisfies dist^2 <= (dr/2)^2 + rho r a^2, which the choices below keep
// under (3/4) eps^2 + (1/4) eps^2. Points within eps of the origin are
// covered by the origin itself.
ActionSet net_2d(double eps) {
  const double dr = std::sqrt(3.0) * eps;
  std::vector<double> radii;
  for (double r = 1.0; r > 0.0; r -= dr) {
    radii.push_back(r);
    if (r - dr / 2.0 <= eps) break;
  }
  std::vector<Vec> pts;
  pts.push_back(Vec::Zero(2));
  for (double r : radii) {
    const double outer = std::min(1.0, r + dr / 2.0);
    const int count = std::max(1, static_cast<int>(std::ceil(2.0 * std::numbers::pi * std::sqrt(r * outer) / eps)));
    for (int j = 0; j < count; ++j) {
      const double a = 2.0 * std::numbers::pi * j / count;
      Vec p(2);
      p << r * std::cos(a), r * std::sin(a);
      pts.push_back(std::move(p));
    }
  }
  return ActionSet::from_vectors(pts);
}

// Cubic lattice with spacing 2 eps / sqrt(d): every point of the ball is
// within eps of a lattice point, and lattice points just outside the ball are
// projected onto the sphere, which does not increase their distance to any
// point of the ball.
ActionSet net_lattice(int d, double eps) {
  const double s = 2.0 * eps / std::sqrt(static_cast<double>(d));
  const int reach = static_cast<int>(std::floor((1.0 + eps) / s));
  std::vector<int> idx(d, -reach);
  // Projection can land on a lattice point of norm exactly 1.
  std::set<std::vector<double>> unique;
  for (;;) {
    Vec p(d);
    for (int c = 0; c < d; ++c) p(c) = idx[c] * s;
    const double r = p.norm();
    if (r > 1.0 && r <= 1.0 + eps) p /= r;
    if (r <= 1.0 + eps) unique.emplace(p.data(), p.data() + d);
    int c = 0;
    while (c < d && idx[c] == reach) idx[c++] = -reach;
    if (c == d) break;
    ++idx[c];
  }
  std::vector<Vec> pts;
  pts.reserve(unique.size());
  for (const auto& u : unique) pts.push_back(Eigen::Map<const Vec>(u.data(), d));
  return ActionSet::from_vectors(pts);
}

}  // namespace

ActionSet epsilon_net(int d, double eps, double size_cap) {
  if (d < 1) throw ConfigError("epsilon_net: d must be >= 1");
  if (!(eps > 0.0 && eps <= 1.0)) throw ConfigError("epsilon_net: eps must lie in (0,1]");
  if (d * std::log1p(2.0 / eps) > std::log(size_cap)) {
    throw ResourceError("epsilon_net: covering bound (1+2/eps)^d exceeds the size cap; use a larger eps");
  }
  if (d == 1) return net_1d(eps);
  if (d == 2) return net_2d(eps);
  return net_lattice(d, eps);
}

}  // namespace cppe
