#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cppe {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// A finite collection of actions in R^d. Each row of coords() is one action;
// ids are stable across subsetting so that eliminated sets still refer to the
// actions of the original set.
class ActionSet {
 public:
  ActionSet() = default;

  // Throws ConfigError when empty, ragged, non-finite, duplicated, or when
  // ids are not unique.
  ActionSet(Mat coords, std::vector<int> ids);

  // ids 0..k-1 in row order.
  static ActionSet from_rows(Mat coords);
  static ActionSet from_vectors(std::span<const Vec> actions);

  int size() const { return static_cast<int>(ids_.size()); }
  int dim() const { return static_cast<int>(coords_.cols()); }
  bool empty() const { return ids_.empty(); }

  const Mat& coords() const { return coords_; }
  Vec action(int pos) const { return coords_.row(pos).transpose(); }
  int id(int pos) const { return ids_[pos]; }
  const std::vector<int>& ids() const { return ids_; }

  std::optional<int> position_of(int id) const;
  bool contains(int id) const { return position_of(id).has_value(); }

  // Sub-collection with the given ids, kept in this set's order.
  ActionSet subset(std::span<const int> ids) const;

 private:
  Mat coords_;
  std::vector<int> ids_;
};

// Probability design over the actions of a set, stored as (id, weight) pairs.
struct Design {
  std::vector<int> ids;
  std::vector<double> weights;

  int support_size(double threshold = 0.0) const;
  double weight_of(int id) const;
};

// Thrown by solve_g_optimal when max_iter runs out before the tolerance is met.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, Design best, double best_g)
      : std::runtime_error(what), best_(std::move(best)), best_g_(best_g) {}
  const Design& best_design() const { return best_; }
  double best_g() const { return best_g_; }

 private:
  Design best_;
  double best_g_;
};

// Moore-Penrose pseudo-inverse of a symmetric matrix via eigendecomposition.
// Eigenvalues with |lambda| <= d * eps_machine * |lambda_max| are treated as 0.
Mat pseudo_inverse(const Mat& m);

// Numerical rank under the same cutoff as pseudo_inverse.
int numerical_rank(const Mat& m);

// V(pi) = sum_x pi(x) x x^T. Throws ConfigError on ids missing from the set.
Mat information_matrix(const Design& design, const ActionSet& set);

// max_x x^T V(pi)^+ x over every action in the set.
double g_value(const Design& design, const ActionSet& set);

struct GOptimalOptions {
  double tol = 0.01;
  int max_iter = 100000;
};

// Weights on the rows of `points`, with the achieved g and the rank of the
// span. Rows may repeat.
struct PointDesign {
  Vec weights;
  double g = 0.0;
  int rank = 0;
  int iterations = 0;
};

// Frank-Wolfe on log det V(pi) with exact line search, followed by support
// pruning down to at most d(d+1)/2 points. The returned design satisfies
// g <= (1 + tol) * rank. Throws ConvergenceError otherwise.
PointDesign solve_g_optimal_points(const Mat& points, const GOptimalOptions& opts = {});

Design solve_g_optimal(const ActionSet& set, double tol, int max_iter);
inline Design solve_g_optimal(const ActionSet& set, const GOptimalOptions& opts = {}) {
  return solve_g_optimal(set, opts.tol, opts.max_iter);
}

// (X^T X)^+ X^T y. Requires x.rows() == y.size() >= 1.
Vec least_squares(const Mat& x, const Vec& y);

// Running sufficient statistics for least squares; equivalent to stacking
// every added row into X and calling least_squares.
class LeastSquaresAccumulator {
 public:
  explicit LeastSquaresAccumulator(int d) : gram_(Mat::Zero(d, d)), xty_(Vec::Zero(d)) {}

  void add(const Vec& x, double y) {
    gram_.noalias() += x * x.transpose();
    xty_.noalias() += x * y;
    ++rows_;
  }

  // `count` copies of row x whose responses sum to y_sum.
  void add_repeated(const Vec& x, long count, double y_sum) {
    if (count <= 0) return;
    gram_.noalias() += static_cast<double>(count) * (x * x.transpose());
    xty_.noalias() += x * y_sum;
    rows_ += count;
  }

  long rows() const { return rows_; }
  const Mat& gram() const { return gram_; }
  Vec solve() const { return pseudo_inverse(gram_) * xty_; }

 private:
  Mat gram_;
  Vec xty_;
  long rows_ = 0;
};

}  // namespace cppe
