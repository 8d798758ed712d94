#include "cppe/design.hpp"

#include "cppe/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

namespace cppe {

namespace {

double rank_cutoff(const Eigen::VectorXd& eigenvalues, Eigen::Index d) {
  const double lmax = eigenvalues.cwiseAbs().maxCoeff();
  return static_cast<double>(d) * std::numeric_limits<double>::epsilon() * lmax;
}

// Row-wise x^T P x for every row x of `points`.
Vec quadratic_forms(const Mat& points, const Mat& p) {
  return (points * p).cwiseProduct(points).rowwise().sum();
}

Mat weighted_gram(const Mat& points, const Vec& w) {
  return points.transpose() * w.asDiagonal() * points;
}

}  // namespace

// ---------------------------------------------------------------------------
// ActionSet

ActionSet::ActionSet(Mat coords, std::vector<int> ids) : coords_(std::move(coords)), ids_(std::move(ids)) {
  if (coords_.rows() == 0 || coords_.cols() == 0) {
    throw ConfigError("action set must contain at least one action of dimension >= 1");
  }
  if (static_cast<Eigen::Index>(ids_.size()) != coords_.rows()) {
    throw ConfigError("action set: ids and coordinate rows differ in count");
  }
  if (!coords_.allFinite()) {
    throw ConfigError("action set: non-finite coordinate");
  }
  std::unordered_set<int> seen;
  for (int id : ids_) {
    if (!seen.insert(id).second) throw ConfigError("action set: duplicate id " + std::to_string(id));
  }

  std::vector<Eigen::Index> order(coords_.rows());
  std::iota(order.begin(), order.end(), 0);
  auto row_less = [this](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < coords_.cols(); ++c) {
      if (coords_(a, c) != coords_(b, c)) return coords_(a, c) < coords_(b, c);
    }
    return false;
  };
  std::sort(order.begin(), order.end(), row_less);
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (coords_.row(order[i - 1]) == coords_.row(order[i])) {
      throw ConfigError("action set: duplicate action vectors (ids " + std::to_string(ids_[order[i - 1]]) +
                        ", " + std::to_string(ids_[order[i]]) + ")");
    }
  }
}

ActionSet ActionSet::from_rows(Mat coords) {
  std::vector<int> ids(coords.rows());
  std::iota(ids.begin(), ids.end(), 0);
  return ActionSet(std::move(coords), std::move(ids));
}

ActionSet ActionSet::from_vectors(std::span<const Vec> actions) {
  if (actions.empty()) throw ConfigError("action set must contain at least one action");
  const auto d = actions.front().size();
  Mat coords(static_cast<Eigen::Index>(actions.size()), d);
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (actions[i].size() != d) throw ConfigError("action set: ragged action dimensions");
    coords.row(static_cast<Eigen::Index>(i)) = actions[i].transpose();
  }
  return from_rows(std::move(coords));
}

std::optional<int> ActionSet::position_of(int id) const {
  auto it = std::find(ids_.begin(), ids_.end(), id);
  if (it == ids_.end()) return std::nullopt;
  return static_cast<int>(it - ids_.begin());
}

ActionSet ActionSet::subset(std::span<const int> ids) const {
  std::unordered_set<int> keep(ids.begin(), ids.end());
  std::vector<int> rows;
  for (int pos = 0; pos < size(); ++pos) {
    if (keep.count(ids_[pos])) rows.push_back(pos);
  }
  if (rows.size() != keep.size()) throw ConfigError("subset: unknown action id");
  Mat c(static_cast<Eigen::Index>(rows.size()), coords_.cols());
  std::vector<int> out_ids;
  out_ids.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    c.row(static_cast<Eigen::Index>(i)) = coords_.row(rows[i]);
    out_ids.push_back(ids_[rows[i]]);
  }
  ActionSet out;
  out.coords_ = std::move(c);
  out.ids_ = std::move(out_ids);
  return out;
}

// ---------------------------------------------------------------------------
// Design

int Design::support_size(double threshold) const {
  return static_cast<int>(std::count_if(weights.begin(), weights.end(), [&](double w) { return w > threshold; }));
}

double Design::weight_of(int id) const {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) return weights[i];
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Linear algebra

Mat pseudo_inverse(const Mat& m) {
  const auto d = m.rows();
  if (d == 0) return m;
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  const Vec& lambda = es.eigenvalues();
  const double cutoff = rank_cutoff(lambda, d);
  Vec inv = Vec::Zero(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    if (std::abs(lambda(i)) > cutoff) inv(i) = 1.0 / lambda(i);
  }
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

int numerical_rank(const Mat& m) {
  if (m.rows() == 0) return 0;
  Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
  const Vec& lambda = es.eigenvalues();
  if (lambda.cwiseAbs().maxCoeff() == 0.0) return 0;
  const double cutoff = rank_cutoff(lambda, m.rows());
  return static_cast<int>((lambda.array().abs() > cutoff).count());
}

Mat information_matrix(const Design& design, const ActionSet& set) {
  if (design.ids.size() != design.weights.size()) {
    throw ConfigError("design: ids and weights differ in length");
  }
  Mat v = Mat::Zero(set.dim(), set.dim());
  for (std::size_t i = 0; i < design.ids.size(); ++i) {
    auto pos = set.position_of(design.ids[i]);
    if (!pos) throw ConfigError("design refers to action id " + std::to_string(design.ids[i]) + " not in the set");
    const double w = design.weights[i];
    if (w == 0.0) continue;
    const Vec x = set.action(*pos);
    v.noalias() += w * x * x.transpose();
  }
  return v;
}

double g_value(const Design& design, const ActionSet& set) {
  const Mat p = pseudo_inverse(information_matrix(design, set));
  return quadratic_forms(set.coords(), p).maxCoeff();
}

Vec least_squares(const Mat& x, const Vec& y) {
  if (x.rows() < 1 || x.rows() != y.size()) throw ConfigError("least_squares: need matching rows >= 1");
  return pseudo_inverse(x.transpose() * x) * (x.transpose() * y);
}

// ---------------------------------------------------------------------------
// G-optimal design

namespace {

struct Evaluation {
  double g;
  Eigen::Index argmax;
};

Evaluation evaluate(const Mat& points, const Mat& v) {
  const Vec q = quadratic_forms(points, pseudo_inverse(v));
  Eigen::Index j = 0;
  const double g = q.maxCoeff(&j);
  return {g, j};
}

// Frank-Wolfe iterations restricted to rows whose `allowed` flag is set.
// Returns the number of iterations used; throws ConvergenceError at the cap.
int frank_wolfe(const Mat& points, Vec& w, int rank, const GOptimalOptions& opts, const std::vector<char>& allowed) {
  const double target = (1.0 + opts.tol) * rank;
  Mat v = weighted_gram(points, w);
  for (int iter = 0;; ++iter) {
    if (iter % 256 == 255) v = weighted_gram(points, w);
    const Mat p = pseudo_inverse(v);
    Vec q = quadratic_forms(points, p);
    for (Eigen::Index i = 0; i < q.size(); ++i) {
      if (!allowed[i]) q(i) = -std::numeric_limits<double>::infinity();
    }
    Eigen::Index j = 0;
    const double g = q.maxCoeff(&j);
    if (g <= target) return iter;
    if (iter >= opts.max_iter) {
      Design best;
      for (Eigen::Index i = 0; i < w.size(); ++i) {
        best.ids.push_back(static_cast<int>(i));
        best.weights.push_back(w(i));
      }
      throw ConvergenceError("G-optimal design did not reach g <= (1+tol)*rank within max_iter iterations",
                             std::move(best), evaluate(points, v).g);
    }
    const double gamma = (g - rank) / (rank * (g - 1.0));
    w *= (1.0 - gamma);
    w(j) += gamma;
    const Vec x = points.row(j).transpose();
    v = (1.0 - gamma) * v + gamma * x * x.transpose();
  }
}

Vec sym_vec(const Vec& x) {
  const auto d = x.size();
  Vec out(d * (d + 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index a = 0; a < d; ++a) {
    for (Eigen::Index b = a; b < d; ++b) out(k++) = x(a) * x(b);
  }
  return out;
}

// Moves weight along null directions of x -> x x^T until the support has at
// most `max_support` points. Each step works on a window of max_support + 1
// support points, keeps the unnormalized information matrix fixed and does not
// increase the total mass, so g never grows after the final renormalization.
void caratheodory_reduce(const Mat& points, Vec& w, int max_support) {
  const auto k = points.rows();
  // Zero actions contribute nothing to V; their weight is pure waste.
  for (Eigen::Index i = 0; i < k; ++i) {
    if (w(i) > 0.0 && points.row(i).squaredNorm() == 0.0) w(i) = 0.0;
  }
  std::vector<Eigen::Index> queue;
  for (Eigen::Index i = 0; i < k; ++i) {
    if (w(i) > 0.0) queue.push_back(i);
  }
  if (static_cast<int>(queue.size()) > max_support) {
    const Eigen::Index rows = points.cols() * (points.cols() + 1) / 2;
    std::vector<Eigen::Index> window(queue.begin(), queue.begin() + max_support + 1);
    std::size_t next = window.size();
    for (;;) {
      Mat m(rows, static_cast<Eigen::Index>(window.size()));
      for (std::size_t c = 0; c < window.size(); ++c) {
        m.col(static_cast<Eigen::Index>(c)) = sym_vec(points.row(window[c]).transpose());
      }
      Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullV);
      Vec c = svd.matrixV().col(svd.matrixV().cols() - 1);
      if (c.sum() > 0.0 || (c.sum() == 0.0 && c.minCoeff() >= 0.0)) c = -c;
      double t = std::numeric_limits<double>::infinity();
      Eigen::Index hit = -1;
      for (Eigen::Index s = 0; s < c.size(); ++s) {
        if (c(s) < 0.0) {
          const double ts = w(window[s]) / -c(s);
          if (ts < t) {
            t = ts;
            hit = s;
          }
        }
      }
      for (Eigen::Index s = 0; s < c.size(); ++s) w(window[s]) = std::max(0.0, w(window[s]) + t * c(s));
      w(window[hit]) = 0.0;
      // Drop every point that reached zero and refill from the queue.
      std::vector<Eigen::Index> kept;
      for (auto i : window) {
        if (w(i) > 0.0) kept.push_back(i);
      }
      while (static_cast<int>(kept.size()) <= max_support && next < queue.size()) {
        if (w(queue[next]) > 0.0) kept.push_back(queue[next]);
        ++next;
      }
      window = std::move(kept);
      if (static_cast<int>(window.size()) <= max_support) break;
    }
  }
  w /= w.sum();
}

// Kumar-Yildirim style start: for each Gram-Schmidt direction of the span,
// the points with the largest and smallest projection, uniformly weighted.
Vec sparse_start(const Mat& points, int rank) {
  const auto k = points.rows();
  const auto d = points.cols();
  Mat basis(d, 0);
  Vec w = Vec::Zero(k);
  for (int j = 0; j < rank; ++j) {
    const Mat resid = points - (points * basis) * basis.transpose();
    Eigen::Index far = 0;
    const double r2 = resid.rowwise().squaredNorm().maxCoeff(&far);
    if (!(r2 > 0.0)) break;
    const Vec q = resid.row(far).transpose() / std::sqrt(r2);
    basis.conservativeResize(d, basis.cols() + 1);
    basis.col(basis.cols() - 1) = q;
    const Vec proj = points * q;
    Eigen::Index hi = 0, lo = 0;
    proj.maxCoeff(&hi);
    proj.minCoeff(&lo);
    w(hi) = 1.0;
    w(lo) = 1.0;
  }
  return w / w.sum();
}

}  // namespace

PointDesign solve_g_optimal_points(const Mat& points, const GOptimalOptions& opts) {
  if (points.rows() == 0) throw ConfigError("G-optimal design: empty action set");
  if (!(opts.tol > 0.0)) throw ConfigError("G-optimal design: tol must be positive");
  const auto k = points.rows();
  const auto d = points.cols();

  PointDesign out;
  out.weights = Vec::Constant(k, 1.0 / static_cast<double>(k));
  out.rank = numerical_rank(weighted_gram(points, out.weights));
  if (out.rank == 0) {
    // Every action is the zero vector; any point mass is optimal.
    out.weights.setZero();
    out.weights(0) = 1.0;
    out.g = 0.0;
    return out;
  }

  {
    const Vec start = sparse_start(points, out.rank);
    if (numerical_rank(weighted_gram(points, start)) == out.rank) out.weights = start;
  }
  std::vector<char> all(k, 1);
  out.iterations = frank_wolfe(points, out.weights, out.rank, opts, all);
  const Vec unpruned = out.weights;

  const double target = (1.0 + opts.tol) * out.rank;
  const int max_support = static_cast<int>(d * (d + 1) / 2);

  // Drop negligible weights; undo if that breaks the tolerance.
  {
    Vec pruned = out.weights;
    const double floor = 1e-6 / static_cast<double>(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      if (pruned(i) < floor) pruned(i) = 0.0;
    }
    pruned /= pruned.sum();
    const Mat v = weighted_gram(points, pruned);
    if (numerical_rank(v) == out.rank && evaluate(points, v).g <= target) out.weights = pruned;
  }

  caratheodory_reduce(points, out.weights, max_support);

  Mat v = weighted_gram(points, out.weights);
  Evaluation ev = evaluate(points, v);
  if (ev.g > target || numerical_rank(v) != out.rank) {
    // Round-off in the reduction; polish on the pruned support only.
    std::vector<char> allowed(k, 0);
    for (Eigen::Index i = 0; i < k; ++i) allowed[i] = out.weights(i) > 0.0;
    GOptimalOptions polish = opts;
    polish.max_iter = std::min(opts.max_iter, 10000);
    try {
      out.iterations += frank_wolfe(points, out.weights, out.rank, polish, allowed);
    } catch (const ConvergenceError&) {
    }
    v = weighted_gram(points, out.weights);
    ev = evaluate(points, v);
    if (ev.g > target || numerical_rank(v) != out.rank) {
      out.weights = unpruned;
      ev = evaluate(points, weighted_gram(points, out.weights));
    }
  }
  out.g = ev.g;
  return out;
}

Design solve_g_optimal(const ActionSet& set, double tol, int max_iter) {
  PointDesign pd;
  try {
    pd = solve_g_optimal_points(set.coords(), GOptimalOptions{tol, max_iter});
  } catch (const ConvergenceError& e) {
    Design best = e.best_design();
    for (int& id : best.ids) id = set.id(id);
    throw ConvergenceError(e.what(), std::move(best), e.best_g());
  }
  Design design;
  for (int pos = 0; pos < set.size(); ++pos) {
    if (pd.weights(pos) > 0.0) {
      design.ids.push_back(set.id(pos));
      design.weights.push_back(pd.weights(pos));
    }
  }
  return design;
}

}  // namespace cppe
