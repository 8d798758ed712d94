#include "cppe/environment.hpp"

#include "cppe/errors.hpp"

#include <algorithm>
#include <cmath>

namespace cppe {

PopulationModel PopulationModel::isotropic(Vec mu, double sigma, double sigma0, PopulationFamily family) {
  PopulationModel model;
  const auto d = mu.size();
  model.mu = std::move(mu);
  model.C = sigma * sigma * Mat::Identity(d, d);
  model.sigma0 = sigma0;
  model.family = family;
  return model;
}

void PopulationModel::validate() const {
  if (mu.size() == 0) throw ValidationError("population model: empty mean");
  if (C.rows() != mu.size() || C.cols() != mu.size()) {
    throw ValidationError("population model: covariance must be d x d with d = dim(mu)");
  }
  if (!mu.allFinite() || !C.allFinite()) throw ValidationError("population model: non-finite parameter");
  if (!(sigma0 > 0.0)) throw ValidationError("population model: sigma0 must be positive");
  psd_factor(C);
}

Mat psd_factor(const Mat& c) {
  if (c.rows() != c.cols()) throw ValidationError("covariance must be square");
  if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, c.cwiseAbs().maxCoeff())) {
    throw ValidationError("covariance must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(c);
  const Vec& lambda = es.eigenvalues();
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  if (lambda.size() > 0 && lambda.minCoeff() < -1e-10 * scale) {
    throw ValidationError("covariance is not positive semidefinite");
  }
  const Vec root = lambda.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

double Instance::gap(int agent, int action_id) const {
  if (agent < 0 || agent >= agents()) throw AccountingError("unknown agent " + std::to_string(agent));
  auto it = std::find(action_ids.begin(), action_ids.end(), action_id);
  if (it == action_ids.end()) throw AccountingError("unknown action id " + std::to_string(action_id));
  return gaps(agent, it - action_ids.begin());
}

Instance make_instance(std::vector<Vec> thetas, const ActionSet& actions) {
  Instance inst;
  inst.thetas = std::move(thetas);
  inst.action_ids = actions.ids();
  inst.coords = std::make_shared<const Mat>(actions.coords());
  const int m = inst.agents();
  for (int i = 0; i < m; ++i) {
    if (inst.thetas[i].size() != actions.dim()) throw ConfigError("instance: theta dimension differs from actions");
    const Vec values = actions.coords() * inst.thetas[i];
    int best = 0;
    for (int pos = 1; pos < actions.size(); ++pos) {
      if (values(pos) > values(best) || (values(pos) == values(best) && actions.id(pos) < actions.id(best))) {
        best = pos;
      }
    }
    inst.optimal_values.push_back(values(best));
    inst.optimal_ids.push_back(actions.id(best));
  }
  return inst;
}

Instance sample_instance(const PopulationModel& model, int m, const ActionSet& actions, Engine& rng) {
  if (m < 1) throw ValidationError("sample_instance: m must be >= 1");
  model.validate();
  if (actions.dim() != model.dim()) throw ConfigError("sample_instance: action dimension differs from model");
  const Mat factor = psd_factor(model.C);
  const int d = model.dim();

  std::normal_distribution<double> normal(0.0, 1.0);
  const double half_width = std::sqrt(3.0);
  std::uniform_real_distribution<double> uniform(-half_width, half_width);

  std::vector<Vec> thetas;
  thetas.reserve(m);
  for (int i = 0; i < m; ++i) {
    Vec z(d);
    for (int j = 0; j < d; ++j) {
      z(j) = model.family == PopulationFamily::gaussian ? normal(rng) : uniform(rng);
    }
    thetas.push_back(model.mu + factor * z);
  }
  return make_instance(std::move(thetas), actions);
}

double reward(const Vec& theta, const Vec& action, double sigma0, Engine& rng) {
  if (theta.size() != action.size()) throw ConfigError("reward: dimension mismatch");
  const double mean = action.dot(theta);
  if (sigma0 <= 0.0) return mean;
  std::normal_distribution<double> noise(0.0, sigma0);
  return mean + noise(rng);
}

double h_threshold(const ActionSet& actions, const Mat& c, int m, int k, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("h_threshold: delta must lie in (0,1)");
  if (m < 1 || k < 1) throw ValidationError("h_threshold: m and k must be >= 1");
  if (c.rows() != actions.dim() || c.cols() != actions.dim()) throw ValidationError("h_threshold: C must be d x d");
  const double s = (actions.coords() * c).cwiseProduct(actions.coords()).rowwise().sum().maxCoeff();
  if (s <= 0.0) return 0.0;
  const double base = 2.0 * s * std::log(4.0 * k / delta);
  return std::sqrt(base) + std::sqrt(base / m);
}

// ---------------------------------------------------------------------------

namespace detail {

ConeHypercube cone_hypercube(const Vec& theta0, double eta, const std::vector<std::vector<int>>& signs,
                             Engine& rng) {
  const auto d = theta0.size();
  const double norm = theta0.norm();
  const Vec u = theta0 / norm;

  // QR of [u | gaussian columns]; the remaining Q columns, sign-normalized by
  // R's diagonal, form a Haar-distributed basis of u's complement.
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat a(d, d);
  a.col(0) = u;
  for (Eigen::Index c = 1; c < d; ++c) {
    for (Eigen::Index r = 0; r < d; ++r) a(r, c) = normal(rng);
  }
  Eigen::HouseholderQR<Mat> qr(a);
  Mat q = qr.householderQ() * Mat::Identity(d, d);
  const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < d; ++c) {
    if (r(c, c) < 0.0) q.col(c) = -q.col(c);
  }
  q.col(0) = u;

  ConeHypercube out;
  out.rotation = q.transpose();
  const double radial = norm * std::cos(eta);
  const double lateral = d > 1 ? norm * std::sin(eta) / std::sqrt(static_cast<double>(d - 1)) : 0.0;
  for (const auto& z : signs) {
    Vec v = radial * u;
    for (Eigen::Index l = 1; l < d; ++l) v += lateral * z[l - 1] * q.col(l);
    out.vertices.push_back(std::move(v));
  }
  return out;
}

}  // namespace detail

HardInstance hard_instance_hypercube(const HardInstanceParams& p, Engine& rng) {
  if (p.d < 2) throw ValidationError("hard instance: d must be >= 2");
  if (p.d > 24) throw ResourceError("hard instance: 2^(d-1) vertices is too many for d > 24");
  if (p.n < 1) throw ValidationError("hard instance: n must be >= 1");
  if (!(p.c1 > 0.0)) throw ValidationError("hard instance: c1 must be positive");

  const double d = p.d;
  const double n = static_cast<double>(p.n);
  double scale = 0.0;   // |theta0| = c3 * d * scale
  double lateral = 0.0; // t in the offsets c4 sqrt(d) t
  if (p.regime == HardRegime::large_sigma) {
    if (!(p.alpha >= 0.0 && p.alpha <= 1.0)) throw ValidationError("hard instance: alpha must lie in [0,1]");
    scale = std::pow(n, -0.5 + p.alpha);
    lateral = std::pow(n, -0.5 + p.alpha / 2.0);
  } else {
    if (!(p.gamma >= 0.0 && p.gamma <= 0.5)) throw ValidationError("hard instance: gamma must lie in [0,1/2]");
    if (p.m < 1) throw ValidationError("hard instance: m must be >= 1");
    scale = std::pow(static_cast<double>(p.m), -p.gamma) / std::sqrt(n);
    lateral = scale;
  }

  HardInstance h;
  h.c1 = p.c1;
  h.alpha_or_gamma = p.regime == HardRegime::large_sigma ? p.alpha : p.gamma;
  h.sigma = p.c1 * std::sqrt(d) * scale;
  h.c4 = std::min(p.c1 * std::sqrt(2.0) / 2.0, std::sqrt(p.c1 / (6.0 * std::sqrt(2.0))));

  const double lo = p.c1 * std::sqrt(2.0) / 2.0 * d * scale;
  const double hi = p.c1 * std::sqrt(6.0) / 2.0 * d * scale;
  std::normal_distribution<double> normal(0.0, h.sigma);
  bool accepted = false;
  Vec theta0(p.d);
  for (int attempt = 0; attempt < p.max_retries && !accepted; ++attempt) {
    for (int j = 0; j < p.d; ++j) theta0(j) = normal(rng);
    const double r = theta0.norm();
    accepted = r >= lo && r <= hi;
  }
  if (!accepted) throw SamplingError("hard instance: norm event not reached within the retry cap");

  h.theta0 = theta0;
  h.theta0_norm = theta0.norm();
  h.c3 = h.theta0_norm / (d * scale);
  const double sin_eta = h.c4 * std::sqrt(d * (d - 1.0)) * lateral / h.theta0_norm;
  if (!(sin_eta > 0.0 && sin_eta < 1.0)) {
    throw ValidationError("hard instance: arcsin argument outside (0,1); increase n or decrease c1");
  }
  h.eta = std::asin(sin_eta);
  h.offset = h.c4 * std::sqrt(d) * lateral;

  const int count = 1 << (p.d - 1);
  for (int b = 0; b < count; ++b) {
    std::vector<int> z(p.d - 1);
    for (int l = 0; l < p.d - 1; ++l) z[l] = (b >> l) & 1 ? 1 : -1;
    h.signs.push_back(std::move(z));
  }
  const auto cone = detail::cone_hypercube(theta0, h.eta, h.signs, rng);
  for (std::size_t v = 0; v < cone.vertices.size(); ++v) {
    Vec aligned = cone.rotation * cone.vertices[v];
    h.z_index.emplace(h.signs[v], aligned);
    h.vertices.push_back(std::move(aligned));
  }
  return h;
}

}  // namespace cppe
