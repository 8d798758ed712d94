#include "cppe/errors.hpp"
#include "cppe/harness.hpp"
#include "cppe/policies.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace cppe;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Design make_design(std::vector<int> ids, std::vector<double> w) {
  Design d;
  d.ids = std::move(ids);
  d.weights = std::move(w);
  return d;
}

struct Setup {
  ActionSet actions;
  PopulationModel model;
  Instance instance;
  PolicyConfig cfg;
};

Setup circle_setup(int m, long n, double sigma, std::uint64_t seed, double delta = 0.01) {
  Setup s;
  s.actions = uniform_circle(10);
  s.model = PopulationModel::isotropic(vec2(1.0, 0.0), sigma);
  Engine rng = make_engine(seed);
  s.instance = sample_instance(s.model, m, s.actions, rng);
  s.cfg.n = n;
  s.cfg.delta = delta;
  return s;
}

bool nondecreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] < v[i - 1]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("collaborative_pull_counts closed form") {
  PolicyConfig cfg;
  const Design des = make_design({0, 1, 2}, {0.5, 0.5, 0.0});
  const PullPlan plan = collaborative_pull_counts(des, 2.0, 0.5, 100, 10, 1, 0.01, cfg);
  const long expected = static_cast<long>(std::ceil(0.32 * std::log(4000.0)));
  CHECK(expected == 3);
  CHECK(plan.count_of(0) == expected);
  CHECK(plan.count_of(1) == expected);
  CHECK(plan.count_of(2) == 0);
  CHECK(plan.ids.size() == 2);
  CHECK(plan.total == 2 * expected);

  PolicyConfig main = cfg;
  main.log_arg_variant = LogArgVariant::maintext;
  const PullPlan pm = collaborative_pull_counts(des, 2.0, 0.5, 100, 10, 1, 0.01, main);
  CHECK(pm.count_of(0) == static_cast<long>(std::ceil(0.5 * 2.0 / (100 * 0.25) * std::log(10.0 * 2.0 / 0.02))));
  const PullPlan lm = local_pull_counts(des, 2.0, 0.5, 100, 10, 1, 0.01, main);
  CHECK(lm.count_of(0) == static_cast<long>(std::ceil(0.5 * 2.0 / 0.25 * std::log(10.0 * 100.0 * 2.0 / 0.02))));
  const PullPlan lp = local_pull_counts(des, 2.0, 0.5, 100, 10, 1, 0.01, cfg);
  CHECK(lp.count_of(0) == static_cast<long>(std::ceil(2.0 * 0.5 * 2.0 / 0.25 * std::log(2.0 * 10 * 100 * 2 / 0.01))));
}

TEST_CASE("pull count monotonicity and scaling properties") {
  PolicyConfig cfg;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const double w0 = u(rng);
    const Design des = make_design({0, 1}, {w0, 1.0 - w0});
    const double g = 1.0 + 3.0 * u(rng);
    const double eps = std::ldexp(1.0, -(1 + trial % 6));
    const int ell = 1 + trial % 6;
    const int m = 1 + trial % 50;
    const int k = 2 + trial % 30;
    const PullPlan a = collaborative_pull_counts(des, g, eps, m, k, ell, 0.05, cfg);
    const PullPlan b = collaborative_pull_counts(des, g, eps, 2 * m, k, ell, 0.05, cfg);
    for (int id : {0, 1}) CHECK(b.count_of(id) <= a.count_of(id));

    const PullPlan l1 = local_pull_counts(des, g, eps, m, k, ell, 0.05, cfg);
    const PullPlan l2 = local_pull_counts(des, g, eps / 2.0, m, k, ell, 0.05, cfg);
    for (int id : {0, 1}) {
      CHECK(l2.count_of(id) >= 4 * l1.count_of(id) - 4);
      CHECK(l2.count_of(id) <= 4 * l1.count_of(id) + 1);
    }
    if (m >= 8) {
      const PullPlan c = collaborative_pull_counts(des, g, eps, m, k, ell, 0.05, cfg);
      CHECK(l1.total >= c.total);
    }
  }
  const Design single = make_design({5}, {1.0});
  const PullPlan p = local_pull_counts(single, 1.0, 0.25, 3, 1, 2, 0.1, cfg);
  CHECK(p.ids == std::vector<int>{5});
  CHECK(p.total == p.counts[0]);
  CHECK(p.total == static_cast<long>(std::ceil(2.0 / 0.0625 * std::log(2.0 * 3 * 6 / 0.1))));
}

TEST_CASE("eliminate examples and survivor guarantee") {
  Mat pts(2, 2);
  pts << 1, 0, -1, 0;
  const ActionSet pm = ActionSet::from_rows(pts);
  CHECK(eliminate(pm, vec2(0, 0), 0.1).size() == 2);
  const ActionSet kept = eliminate(pm, vec2(1, 0), 0.4);
  REQUIRE(kept.size() == 1);
  CHECK(kept.id(0) == 0);

  Mat close(2, 2);
  close << 1, 0, 0.9, 0;
  CHECK(eliminate(ActionSet::from_rows(close), vec2(1, 0), 0.1).size() == 2);

  std::mt19937_64 rng(6);
  std::normal_distribution<double> n01;
  const ActionSet circle = uniform_circle(25);
  for (int trial = 0; trial < 500; ++trial) {
    const Vec th = vec2(n01(rng), n01(rng));
    const double eps = std::ldexp(1.0, -(trial % 8));
    const ActionSet out = eliminate(circle, th, eps);
    CHECK(out.size() >= 1);
    CHECK(out.contains(empirical_best(circle, th)));
    const Vec vals = circle.coords() * th;
    for (int pos = 0; pos < circle.size(); ++pos) {
      CHECK(out.contains(circle.id(pos)) == (vals.maxCoeff() - vals(pos) <= 2.0 * eps));
    }
  }
}

TEST_CASE("empirical_best breaks ties by lowest id") {
  Mat pts(3, 2);
  pts << 0, 1, 1, 0, 0, -1;
  const ActionSet set(pts, {4, 2, 9});
  CHECK(empirical_best(set, vec2(0, 0)) == 2);
  CHECK(empirical_best(set, vec2(0, 1)) == 4);
}

TEST_CASE("epsilon_net examples") {
  const ActionSet n1 = epsilon_net(1, 1.0);
  REQUIRE(n1.size() == 3);
  std::vector<double> xs;
  for (int i = 0; i < 3; ++i) xs.push_back(n1.action(i)(0));
  std::sort(xs.begin(), xs.end());
  CHECK(xs == std::vector<double>{-1.0, 0.0, 1.0});

  CHECK(epsilon_net(2, 0.5).size() <= 25);
  CHECK_THROWS_AS(epsilon_net(20, 0.01), ResourceError);
  CHECK_THROWS_AS(epsilon_net(2, 0.0), ConfigError);
}

TEST_CASE("epsilon_net covering by Monte Carlo") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (const auto& [d, eps] : std::vector<std::pair<int, double>>{{1, 0.3}, {2, 0.5}, {2, 0.1}, {3, 0.4}, {4, 0.6}}) {
    const ActionSet net = epsilon_net(d, eps);
    CHECK(static_cast<double>(net.size()) <= std::pow(1.0 + 2.0 / eps, d));
    for (int i = 0; i < net.size(); ++i) CHECK(net.action(i).norm() <= 1.0 + 1e-12);
    double worst = 0.0;
    for (int s = 0; s < 10000; ++s) {
      Vec p(d);
      for (int c = 0; c < d; ++c) p(c) = n01(rng);
      // Half on the sphere, half uniform in the ball.
      p *= (s % 2 ? std::pow(u01(rng), 1.0 / d) : 1.0) / p.norm();
      const double dist = (net.coords().rowwise() - p.transpose()).rowwise().norm().minCoeff();
      worst = std::max(worst, dist);
    }
    CHECK(worst <= eps);
  }
}

TEST_CASE("homogeneous population: CP-PE equals Fed-PE on the same seed") {
  Setup s = circle_setup(10, 3000, 0.0, 1);
  const RunResult c = run_cppe(s.cfg, s.actions, s.model, s.instance, 77);
  const RunResult f = run_fedpe(s.cfg, s.actions, s.model, s.instance, 77);
  CHECK(c.h == 0.0);
  CHECK(c.trace.cumulative == f.trace.cumulative);
  CHECK(c.played == f.played);
  CHECK(c.collaborative_phases >= 1);
}

TEST_CASE("large h: CP-PE has no collaborative phase and equals Ind-PE") {
  Setup s = circle_setup(6, 3000, 0.3, 2);
  const RunResult c = run_cppe(s.cfg, s.actions, s.model, s.instance, 5);
  const RunResult i = run_indpe(s.cfg, s.actions, s.model, s.instance, 5);
  CHECK(c.h >= 0.25);
  CHECK(c.collaborative_phases == 0);
  CHECK(c.trace.cumulative == i.trace.cumulative);
}

TEST_CASE("stage switch happens at the first phase with h > eps/2") {
  // sigma = 0.04 on the circle gives h just below 1/4 for m = 5, k = 5, delta = 0.1.
  Setup s;
  s.actions = uniform_circle(5);
  s.model = PopulationModel::isotropic(vec2(1.0, 0.0), 0.04);
  Engine rng = make_engine(3);
  s.instance = sample_instance(s.model, 5, s.actions, rng);
  s.cfg.n = 4000;
  s.cfg.delta = 0.1;
  const double h = h_threshold(s.actions, s.model.C, 5, 5, 0.1);
  CHECK(h <= 0.25);
  CHECK(h > 0.125);
  std::vector<PhaseSnapshot> snaps;
  const RunResult r = run_cppe(s.cfg, s.actions, s.model, s.instance, 9, [&](const PhaseSnapshot& p) { snaps.push_back(p); });
  CHECK(r.collaborative_phases == 1);
  bool seen_personal = false;
  for (const auto& p : snaps) {
    if (p.stage == Stage::personal) seen_personal = true;
    if (seen_personal) CHECK(p.stage == Stage::personal);
    if (p.stage == Stage::collaborative) CHECK(p.ell == 1);
    if (p.stage == Stage::personal) CHECK(p.ell >= 2);
  }
  CHECK(seen_personal);
}

TEST_CASE("single agent: Fed-PE equals Ind-PE when the pull constants agree") {
  Setup s = circle_setup(1, 4000, 0.2, 4);
  s.cfg.pull_constant_collab = 2.0;
  s.cfg.pull_constant_local = 2.0;
  const RunResult f = run_fedpe(s.cfg, s.actions, s.model, s.instance, 8);
  const RunResult i = run_indpe(s.cfg, s.actions, s.model, s.instance, 8);
  REQUIRE(f.events.size() >= 2);
  for (std::size_t e = 0; e + 1 < std::min(f.events.size(), i.events.size()); ++e) {
    CHECK(f.events[e].pulls_total == i.events[e].pulls_total);
  }
  CHECK(f.trace.cumulative == i.trace.cumulative);
}

TEST_CASE("Ind-PE is the sum of single-agent runs with the same per-agent seeds") {
  Setup s = circle_setup(4, 2500, 0.3, 5);
  const std::uint64_t seed = 31;
  const RunResult joint = run_indpe(s.cfg, s.actions, s.model, s.instance, seed);
  std::vector<double> sum(static_cast<std::size_t>(s.cfg.n), 0.0);
  for (int i = 0; i < 4; ++i) {
    Engine rng = make_engine(agent_noise_seed(seed, i));
    const auto per_round = run_single_agent_pe(s.cfg, s.actions, s.instance, i, 4, 1.0, rng);
    REQUIRE(per_round.size() == sum.size());
    for (std::size_t t = 0; t < sum.size(); ++t) sum[t] += per_round[t];
  }
  double acc = 0.0;
  for (std::size_t t = 0; t < sum.size(); ++t) {
    double inc = 0.0;
    for (int i = 0; i < 4; ++i) inc += s.instance.gaps(i, *s.actions.position_of(joint.played[i][t]));
    acc += inc;
    CHECK(joint.trace.cumulative[t] == doctest::Approx(acc).epsilon(1e-12));
  }
  double total = 0.0;
  for (double v : sum) total += v;
  CHECK(joint.trace.cumulative.back() == doctest::Approx(total).epsilon(1e-12));
}

TEST_CASE("budget, monotone traces and shared collaborative sets") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    Setup s = circle_setup(3 + static_cast<int>(seed), 1500 + 700 * static_cast<long>(seed), 0.02 * seed, 10 + seed);
    std::vector<PhaseSnapshot> snaps;
    const auto obs = [&](const PhaseSnapshot& p) { snaps.push_back(p); };
    for (const RunResult& r : {run_cppe(s.cfg, s.actions, s.model, s.instance, seed, obs),
                               run_fedpe(s.cfg, s.actions, s.model, s.instance, seed, obs),
                               run_indpe(s.cfg, s.actions, s.model, s.instance, seed, obs)}) {
      CHECK(r.trace.cumulative.size() == static_cast<std::size_t>(s.cfg.n));
      CHECK(nondecreasing(r.trace.cumulative));
      CHECK(r.trace.cumulative.front() >= 0.0);
      for (const auto& p : r.played) CHECK(p.size() == static_cast<std::size_t>(s.cfg.n));
      for (std::size_t e = 0; e < r.events.size(); ++e) {
        CHECK(r.events[e].eps == std::ldexp(1.0, -r.events[e].ell));
        if (r.events[e].stage == Stage::collaborative) CHECK(r.events[e].min_active == r.events[e].max_active);
      }
    }
    for (const auto& p : snaps) {
      if (!p.truncated) {
        CHECK_FALSE(p.survivors.empty());
        CHECK(p.survivors.size() <= p.active_before.size());
      }
    }
  }
}

TEST_CASE("phase cap commits to the empirical best") {
  Setup s = circle_setup(2, 20000, 0.0, 3);
  s.cfg.max_phases = 2;
  const RunResult f = run_fedpe(s.cfg, s.actions, s.model, s.instance, 1);
  CHECK(f.trace.cumulative.size() == 20000u);
  for (const auto& ev : f.events) CHECK(ev.ell <= 2);
  // After the cap the played action stays fixed.
  CHECK(f.played[0].back() == f.played[0][f.played[0].size() - 2]);
  const RunResult i = run_indpe(s.cfg, s.actions, s.model, s.instance, 1);
  for (const auto& ev : i.events) CHECK(ev.ell <= 2);
}

TEST_CASE("policy validation") {
  PolicyConfig cfg;
  cfg.delta = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.delta = 0.1;
  cfg.pull_constant_local = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
