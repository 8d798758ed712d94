#pragma once

#include "cppe/design.hpp"
#include "cppe/rng.hpp"

#include <map>
#include <memory>
#include <vector>

namespace cppe {

enum class PopulationFamily { gaussian, subgaussian_uniform };

// theta_i = mu + u_i with u_i ~ N(0, C) (or a variance-matched uniform law),
// rewards y = <x, theta_i> + N(0, sigma0^2).
struct PopulationModel {
  Vec mu;
  Mat C;
  double sigma0 = 1.0;
  PopulationFamily family = PopulationFamily::gaussian;

  // C = sigma^2 I.
  static PopulationModel isotropic(Vec mu, double sigma, double sigma0 = 1.0,
                                   PopulationFamily family = PopulationFamily::gaussian);

  int dim() const { return static_cast<int>(mu.size()); }

  // Throws ValidationError on dimension mismatch, asymmetric or non-PSD C, sigma0 <= 0.
  void validate() const;
};

// One realization of the m agent parameters together with the exact optimum
// of each agent over the experiment's action set.
struct Instance {
  std::vector<Vec> thetas;
  std::vector<double> optimal_values;
  std::vector<int> optimal_ids;
  std::vector<int> action_ids;
  // Rows of the base action set, shared between copies of the instance.
  std::shared_ptr<const Mat> coords;

  // optimal_values[i] - <action(pos), theta_i> for a position in the base set.
  double gaps(Eigen::Index agent, Eigen::Index pos) const {
    return optimal_values[agent] - coords->row(pos).dot(thetas[agent]);
  }

  int agents() const { return static_cast<int>(thetas.size()); }
  // Gap of the action with the given id for agent i; throws AccountingError.
  double gap(int agent, int action_id) const;
};

// Builds the Instance bookkeeping (optima and gaps) for given parameters.
// Ties in the optimum go to the lowest id.
Instance make_instance(std::vector<Vec> thetas, const ActionSet& actions);

// Symmetric square root of a PSD matrix; throws ValidationError if C has an
// eigenvalue below -1e-10 * max(1, |lambda_max|).
Mat psd_factor(const Mat& c);

Instance sample_instance(const PopulationModel& model, int m, const ActionSet& actions, Engine& rng);

double reward(const Vec& theta, const Vec& action, double sigma0, Engine& rng);

// Stage-switch threshold
//   sqrt(2 s log(4k/delta)) + sqrt((2/m) s log(4k/delta)),  s = max_x x^T C x.
double h_threshold(const ActionSet& actions, const Mat& c, int m, int k, double delta);

// ---------------------------------------------------------------------------
// Rotated-hypercube hard instances

enum class HardRegime { large_sigma, middle };

struct HardInstanceParams {
  int d = 2;
  long n = 1;
  HardRegime regime = HardRegime::large_sigma;
  double alpha = 0.0;  // large_sigma regime
  double gamma = 0.0;  // middle regime
  long m = 1;          // middle regime
  double c1 = 1.0;
  int max_retries = 10000;
};

struct HardInstance {
  Vec theta0;
  double theta0_norm = 0.0;
  double eta = 0.0;
  double sigma = 0.0;
  double c1 = 0.0;
  double c3 = 0.0;
  double c4 = 0.0;
  double alpha_or_gamma = 0.0;
  // Per-coordinate magnitude c4 * sqrt(d) * t of the hypercube offsets, where
  // t = n^{-1/2 + alpha/2} (large sigma) or m^{-gamma} n^{-1/2} (middle).
  double offset = 0.0;
  // Sign patterns z in {-1,+1}^{d-1}, in binary-counting order, and the
  // aligned vertices theta~(z).
  std::vector<std::vector<int>> signs;
  std::vector<Vec> vertices;
  std::map<std::vector<int>, Vec> z_index;
};

HardInstance hard_instance_hypercube(const HardInstanceParams& params, Engine& rng);

namespace detail {

// Vertices on the eta-cone around theta0 before alignment, built on a
// Haar-random orthonormal basis of theta0's orthogonal complement, and the
// orthogonal W sending theta0 to |theta0| e1 and that basis to e2..ed.
struct ConeHypercube {
  std::vector<Vec> vertices;
  Mat rotation;
};

ConeHypercube cone_hypercube(const Vec& theta0, double eta, const std::vector<std::vector<int>>& signs,
                             Engine& rng);

}  // namespace detail

}  // namespace cppe
