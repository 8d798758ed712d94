#include "cppe/design.hpp"
#include "cppe/environment.hpp"
#include "cppe/harness.hpp"
#include "cppe/policies.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>

using namespace cppe;

namespace {

int failures = 0;

void report(bool pass, const std::string& name, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
}

const SummaryStats& summary_of(const ExperimentResult& r, const std::string& algo) {
  for (const auto& s : r.summaries) {
    if (s.algorithm == algo) return s;
  }
  throw std::runtime_error("no summary for " + algo);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

ExperimentConfig experiment(int m, int reps) {
  ExperimentConfig cfg;
  cfg.m = m;
  cfg.n = 15000;
  cfg.d = 2;
  cfg.k = 10;
  cfg.mu = Vec::Zero(2);
  cfg.mu(0) = 1.0;
  cfg.sigma = 0.3;
  cfg.sigma0 = 1.0;
  cfg.delta = 0.01;
  cfg.reps = reps;
  cfg.seed = 20240601;
  cfg.policy.n = cfg.n;
  cfg.policy.delta = cfg.delta;
  return cfg;
}

double relative_gap(const ExperimentResult& r) {
  const double ind = summary_of(r, "indpe").mean.back();
  const double cp = summary_of(r, "cppe").mean.back();
  return (ind - cp) / ind;
}

// Margin of a - b measured in pooled standard errors of the difference.
double margin_in_se(const SummaryStats& lo, const SummaryStats& hi) {
  const double se = std::sqrt((lo.std.back() * lo.std.back()) / lo.reps + (hi.std.back() * hi.std.back()) / hi.reps);
  return (hi.mean.back() - lo.mean.back()) / se;
}

void experiment_criteria(const std::filesystem::path& tmp) {
  const ExperimentConfig cfg1 = experiment(100, 80);
  RunOptions o1;
  o1.out_dir = tmp / "exp1_a";
  const ExperimentResult r1 = run_experiment(cfg1, o1);
  const SummaryStats& cp = summary_of(r1, "cppe");
  const SummaryStats& fed = summary_of(r1, "fedpe");
  const SummaryStats& ind = summary_of(r1, "indpe");

  {
    const double m_ind = margin_in_se(cp, ind);
    const double m_fed = margin_in_se(cp, fed);
    std::ostringstream d;
    d << "final per-user regret cppe=" << cp.mean.back() << " indpe=" << ind.mean.back() << " fedpe=" << fed.mean.back()
      << "; margins (SE) vs indpe=" << m_ind << " vs fedpe=" << m_fed << "; failures=" << r1.failures.size();
    report(r1.failures.empty() && m_ind > 1.0 && m_fed > 1.0, "Experiment 1 ordering", d.str());
  }
  {
    const LinearFit f = fit_final_window(fed.mean, 1.0 / 3.0);
    const double s_cp = final_slope(cp.mean, 1.0 / 3.0);
    const double s_ind = final_slope(ind.mean, 1.0 / 3.0);
    std::ostringstream d;
    d << "fedpe slope=" << f.slope << " r2=" << f.r2 << "; cppe slope=" << s_cp << " indpe slope=" << s_ind
      << " (limit " << 0.25 * f.slope << ")";
    report(f.slope > 0.0 && f.r2 >= 0.99 && s_cp < 0.25 * f.slope && s_ind < 0.25 * f.slope, "Fed-PE linearity",
           d.str());
  }
  {
    std::map<int, int> counts;
    for (int lc : r1.collaborative_phases) ++counts[lc];
    int mode = -1, best = -1;
    for (const auto& [lc, c] : counts) {
      if (c > best) {
        best = c;
        mode = lc;
      }
    }
    std::ostringstream d;
    d << "L_c histogram {";
    for (const auto& [lc, c] : counts) d << lc << ":" << c << " ";
    d << "} mode=" << mode;
    report(mode == 1 || mode == 2, "Collaborative-phase count", d.str());
  }
  {
    RunOptions o2;
    o2.out_dir = tmp / "exp1_b";
    (void)run_experiment(cfg1, o2);
    bool same = true;
    for (const char* f : {"traces.csv", "summary.csv", "events.csv"}) {
      const std::string a = slurp(tmp / "exp1_a" / f);
      same = same && !a.empty() && a == slurp(tmp / "exp1_b" / f);
    }
    report(same, "Determinism", same ? "trace, summary and event CSVs identical across reruns"
                                     : "CSV outputs differ between reruns");
  }
  {
    const ExperimentConfig cfg2 = experiment(2, 350);
    const ExperimentResult r2 = run_experiment(cfg2);
    const double g1 = relative_gap(r1);
    const double g2 = relative_gap(r2);
    std::ostringstream d;
    d << "relative gap (indpe-cppe)/indpe: m=100 " << g1 << ", m=2 " << g2 << "; failures=" << r2.failures.size();
    report(r2.failures.empty() && g2 < g1, "Experiment 2 gap", d.str());
  }
}

void kiefer_wolfowitz() {
  std::mt19937_64 rng(314159);
  std::uniform_int_distribution<int> dd(2, 8);
  std::normal_distribution<double> n01;
  int ok = 0;
  double worst_ratio = 0.0, worst_time = 0.0;
  int worst_support_excess = -1000;
  for (int trial = 0; trial < 50; ++trial) {
    const int d = dd(rng);
    const int k = std::uniform_int_distribution<int>(d + 1, 200)(rng);
    Mat pts(k, d);
    for (int i = 0; i < k; ++i) {
      for (int c = 0; c < d; ++c) pts(i, c) = n01(rng);
      pts.row(i) *= std::uniform_real_distribution<double>(0.2, 1.0)(rng) / pts.row(i).norm();
    }
    const ActionSet set = ActionSet::from_rows(pts);
    const auto t0 = std::chrono::steady_clock::now();
    const Design des = solve_g_optimal(set, 0.01, 100000);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double g = g_value(des, set);
    const int support = des.support_size(0.0);
    worst_ratio = std::max(worst_ratio, g / d);
    worst_time = std::max(worst_time, secs);
    worst_support_excess = std::max(worst_support_excess, support - d * (d + 1) / 2);
    if (g <= 1.01 * d && support <= d * (d + 1) / 2 && secs < 1.0) ++ok;
  }
  std::ostringstream d;
  d << ok << "/50 instances pass; max g/d=" << worst_ratio << " max support excess=" << worst_support_excess
    << " max time=" << worst_time << "s";
  report(ok == 50, "Kiefer-Wolfowitz suite", d.str());
}

void lemma_oracles() {
  const int m = 5, k = 5, reps = 500;
  const long n = 4000;
  const double delta = 0.1;
  const ActionSet actions = uniform_circle(k);
  Vec mu = Vec::Zero(2);
  mu(0) = 1.0;
  const PopulationModel model = PopulationModel::isotropic(mu, 0.04);
  PolicyConfig cfg;
  cfg.n = n;
  cfg.delta = delta;

  int v1 = 0, v2 = 0, v3 = 0, collab_reps = 0;
  for (int rep = 0; rep < reps; ++rep) {
    Engine rng = make_engine(derive_seed(777, {static_cast<std::uint64_t>(rep), 0}));
    const Instance inst = sample_instance(model, m, actions, rng);
    bool b1 = false, b2 = false, b3 = false, collab = false;
    const auto check = [&](const PhaseSnapshot& p, int agent) {
      const Vec& theta = inst.thetas[agent];
      for (int id : p.active_before) {
        const Vec x = actions.action(*actions.position_of(id));
        if (std::abs((p.estimate - theta).dot(x)) > p.eps) b1 = true;
      }
      const int opt = inst.optimal_ids[agent];
      const bool had_opt = std::find(p.active_before.begin(), p.active_before.end(), opt) != p.active_before.end();
      const bool kept_opt = std::find(p.survivors.begin(), p.survivors.end(), opt) != p.survivors.end();
      if (had_opt && !kept_opt) b2 = true;
      for (int id : p.survivors) {
        if (inst.gap(agent, id) > 4.0 * p.eps) b3 = true;
      }
    };
    const PhaseObserver obs = [&](const PhaseSnapshot& p) {
      if (p.truncated) return;
      if (p.agent < 0) {
        collab = true;
        for (int i = 0; i < m; ++i) check(p, i);
      } else {
        check(p, p.agent);
      }
    };
    (void)run_cppe(cfg, actions, model, inst, derive_seed(777, {static_cast<std::uint64_t>(rep), 1}), obs);
    v1 += b1;
    v2 += b2;
    v3 += b3;
    collab_reps += collab;
  }
  const double limit = delta + 0.05;
  const double f1 = static_cast<double>(v1) / reps, f2 = static_cast<double>(v2) / reps,
               f3 = static_cast<double>(v3) / reps;
  std::ostringstream d;
  d << reps << " reps (" << collab_reps << " with a collaborative phase); violation rates concentration=" << f1
    << " retention=" << f2 << " gap-elimination=" << f3 << " (limit " << limit << ")";
  report(f1 <= limit && f2 <= limit && f3 <= limit, "Lemma statistical oracles", d.str());
}

void hard_geometry() {
  const long n = 10000;
  const double alpha = 0.0, c1 = 1.0;
  double norm_err = 0.0, dist_err = 0.0, first_err = 0.0;
  for (int d : {2, 3, 4, 6}) {
    HardInstanceParams p;
    p.d = d;
    p.n = n;
    p.alpha = alpha;
    p.c1 = c1;
    Engine rng = make_engine(derive_seed(55, {static_cast<std::uint64_t>(d)}));
    const HardInstance h = hard_instance_hypercube(p, rng);
    const double target = 2.0 * h.c4 * std::pow(static_cast<double>(n), -0.5 + alpha / 2.0);
    for (std::size_t a = 0; a < h.vertices.size(); ++a) {
      norm_err = std::max(norm_err, std::abs(h.vertices[a].norm() - h.theta0_norm));
      first_err = std::max(first_err, std::abs(h.vertices[a](0) - h.theta0_norm * std::cos(h.eta)));
      for (std::size_t b = a + 1; b < h.vertices.size(); ++b) {
        int diff = 0;
        for (int l = 0; l < d - 1; ++l) diff += h.signs[a][l] != h.signs[b][l];
        if (diff == 1) dist_err = std::max(dist_err, std::abs((h.vertices[a] - h.vertices[b]).norm() - target));
      }
    }
  }
  std::ostringstream d;
  d << "max |norm - |theta0||=" << norm_err << " max |neighbour dist - 2 c4 n^(-1/2+a/2)|=" << dist_err
    << " max |x1 - |theta0| cos eta|=" << first_err;
  report(norm_err <= 1e-9 && dist_err <= 1e-9 && first_err <= 1e-9, "Hard-instance geometry", d.str());
}

void regime_scaling() {
  const auto mean_final = [](int m) {
    ExperimentConfig cfg;
    cfg.m = m;
    cfg.n = 2000;
    cfg.d = 2;
    // Unit-ball actions through an eps-net of radius 1/sqrt(m n).
    cfg.action_source = ActionSource::epsilon_net;
    cfg.mu = Vec::Zero(2);
    cfg.mu(0) = 1.0;
    cfg.sigma = 0.0;
    cfg.delta = 0.01;
    cfg.reps = 100;
    cfg.seed = 99;
    cfg.algorithms = {"cppe"};
    cfg.normalize = false;
    cfg.policy.n = cfg.n;
    cfg.policy.delta = cfg.delta;
    return run_experiment(cfg).summaries.front().mean.back();
  };
  const double r50 = mean_final(50);
  const double r200 = mean_final(200);
  const double ratio = r200 / r50;
  std::ostringstream d;
  d << "mean joint regret m=50 " << r50 << ", m=200 " << r200 << ", ratio " << ratio << " (target 2 +/- 0.5)";
  report(std::abs(ratio - 2.0) <= 0.5, "Regime scaling", d.str());
}

}  // namespace

int main() {
  const auto tmp = std::filesystem::temp_directory_path() / "cppe_acceptance";
  std::filesystem::remove_all(tmp);
  try {
    kiefer_wolfowitz();
    hard_geometry();
    lemma_oracles();
    regime_scaling();
    experiment_criteria(tmp);
  } catch (const std::exception& e) {
    report(false, "acceptance driver", e.what());
  }
  std::filesystem::remove_all(tmp);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
