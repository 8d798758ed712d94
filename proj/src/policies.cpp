#include "cppe/policies.hpp"

#include "cppe/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <unordered_map>

namespace cppe {

void PolicyConfig::validate() const {
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("policy: delta must lie in (0,1)");
  if (n < 1) throw ConfigError("policy: n must be >= 1");
  if (!(pull_constant_collab > 0.0) || !(pull_constant_local > 0.0)) {
    throw ConfigError("policy: pull constants must be positive");
  }
  if (!(design_tol > 0.0)) throw ConfigError("policy: design_tol must be positive");
  if (design_max_iter < 1) throw ConfigError("policy: design_max_iter must be >= 1");
  if (max_phases < 1) throw ConfigError("policy: max_phases must be >= 1");
}

const char* to_string(Stage s) {
  switch (s) {
    case Stage::collaborative:
      return "collaborative";
    case Stage::personal:
      return "personal";
    case Stage::exhausted:
      return "exhausted";
  }
  return "?";
}

long PullPlan::count_of(int id) const {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) return counts[i];
  }
  return 0;
}

namespace {

// Counts beyond this are never executable; clamping keeps ceil() finite.
constexpr double kMaxCount = 1e15;

PullPlan make_plan(const Design& design, double per_unit_weight) {
  std::vector<std::size_t> order(design.ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (design.weights[a] != design.weights[b]) return design.weights[a] > design.weights[b];
    return design.ids[a] < design.ids[b];
  });
  PullPlan plan;
  for (std::size_t i : order) {
    const double w = design.weights[i];
    if (!(w > 0.0)) continue;
    const double raw = std::min(kMaxCount, std::ceil(w * per_unit_weight));
    const long count = std::max(1L, static_cast<long>(raw));
    plan.ids.push_back(design.ids[i]);
    plan.counts.push_back(count);
    plan.total += count;
  }
  return plan;
}

void check_plan_inputs(double eps, int m, int k, int ell, double delta) {
  if (!(eps > 0.0)) throw ConfigError("pull counts: eps must be positive");
  if (m < 1 || k < 1 || ell < 1) throw ConfigError("pull counts: m, k, ell must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("pull counts: delta must lie in (0,1)");
}

}  // namespace

PullPlan collaborative_pull_counts(const Design& design, double g, double eps, int m, int k, int ell, double delta,
                                   const PolicyConfig& cfg) {
  check_plan_inputs(eps, m, k, ell, delta);
  const double l = ell;
  double factor = 0.0;
  if (cfg.log_arg_variant == LogArgVariant::proof) {
    factor = cfg.pull_constant_collab * g / (m * eps * eps) * std::log(2.0 * k * l * (l + 1.0) / delta);
  } else {
    factor = g / (m * eps * eps) * std::log(k * l * (l + 1.0) / (2.0 * delta));
  }
  return make_plan(design, factor);
}

PullPlan local_pull_counts(const Design& design, double g, double eps, int m, int k, int ell, double delta,
                           const PolicyConfig& cfg) {
  check_plan_inputs(eps, m, k, ell, delta);
  const double l = ell;
  double factor = 0.0;
  if (cfg.log_arg_variant == LogArgVariant::proof) {
    factor = cfg.pull_constant_local * g / (eps * eps) * std::log(2.0 * k * m * l * (l + 1.0) / delta);
  } else {
    factor = g / (eps * eps) * std::log(k * static_cast<double>(m) * l * (l + 1.0) / (2.0 * delta));
  }
  return make_plan(design, factor);
}

int empirical_best(const ActionSet& active, const Vec& theta_hat) {
  const Vec values = active.coords() * theta_hat;
  int best = 0;
  for (int pos = 1; pos < active.size(); ++pos) {
    if (values(pos) > values(best) || (values(pos) == values(best) && active.id(pos) < active.id(best))) best = pos;
  }
  return active.id(best);
}

ActionSet eliminate(const ActionSet& active, const Vec& theta_hat, double eps) {
  if (active.empty()) throw ConfigError("eliminate: empty active set");
  const Vec values = active.coords() * theta_hat;
  const double best = values.maxCoeff();
  std::vector<int> keep;
  for (int pos = 0; pos < active.size(); ++pos) {
    if (best - values(pos) <= 2.0 * eps) keep.push_back(active.id(pos));
  }
  return active.subset(keep);
}

std::uint64_t agent_noise_seed(std::uint64_t noise_seed, int agent) {
  return derive_seed(noise_seed, {static_cast<std::uint64_t>(agent)});
}

// ---------------------------------------------------------------------------

namespace {

enum class Mode { cppe, fedpe, indpe };

struct AgentState {
  std::shared_ptr<const ActionSet> active;
  long used = 0;
  Engine rng;
  std::normal_distribution<double> noise;
  std::vector<int> played;
  Vec estimate;
  bool committed = false;
};

// Phase machinery shared by the three algorithms. Every agent owns its noise
// engine and action timeline, so the order in which agents are advanced does
// not affect any agent's data.
class Runner {
 public:
  Runner(const PolicyConfig& cfg, const ActionSet& actions, const Instance& instance, double sigma0,
         const PhaseObserver& observer, int m_for_log)
      : cfg_(cfg), actions_(actions), instance_(instance), observer_(observer), m_(m_for_log), k_(actions.size()) {
    cfg_.validate();
    if (actions.size() != static_cast<int>(instance.action_ids.size())) {
      throw ConfigError("run: instance was built for a different action set");
    }
    for (int pos = 0; pos < actions.size(); ++pos) {
      base_pos_[actions.id(pos)] = pos;
      if (instance.action_ids[pos] != actions.id(pos)) throw ConfigError("run: instance action ids differ");
    }
    sigma0_ = sigma0;
    initial_ = std::make_shared<const ActionSet>(actions_);
  }

  AgentState make_agent(Engine rng) const {
    AgentState a;
    a.active = initial_;
    a.rng = std::move(rng);
    a.noise = std::normal_distribution<double>(0.0, 1.0);
    a.played.reserve(static_cast<std::size_t>(cfg_.n));
    return a;
  }

  bool has_budget(const AgentState& a) const { return a.used < cfg_.n; }

  // Pulls the plan in order until done or out of budget; returns true when
  // the plan was truncated.
  bool execute(AgentState& a, int agent, const PullPlan& plan, LeastSquaresAccumulator& acc) {
    const Vec& theta = instance_.thetas[agent];
    for (std::size_t j = 0; j < plan.ids.size(); ++j) {
      const Vec x = actions_.action(base_pos_.at(plan.ids[j]));
      const double mean = x.dot(theta);
      const long take = std::min(plan.counts[j], cfg_.n - a.used);
      double y_sum = 0.0;
      for (long r = 0; r < take; ++r) {
        y_sum += mean + sigma0_ * a.noise(a.rng);
        a.played.push_back(plan.ids[j]);
      }
      acc.add_repeated(x, take, y_sum);
      a.used += take;
      if (take < plan.counts[j]) return true;
    }
    return false;
  }

  void commit(AgentState& a) {
    const int id = a.estimate.size() > 0 ? empirical_best(*a.active, a.estimate) : a.active->id(0);
    while (a.used < cfg_.n) {
      a.played.push_back(id);
      ++a.used;
    }
    a.committed = true;
  }

  Design design_for(const ActionSet& set, double& g) const {
    Design design = solve_g_optimal(set, cfg_.design_tol, cfg_.design_max_iter);
    g = g_value(design, set);
    return design;
  }

  // One collaborative phase for all agents (they share one active set).
  // Returns false when the budget ran out inside the phase.
  bool collaborative_phase(std::vector<AgentState>& agents, int ell) {
    const double eps = std::ldexp(1.0, -ell);
    const ActionSet& shared = *agents.front().active;
    double g = 0.0;
    const Design design = design_for(shared, g);
    const PullPlan plan = collaborative_pull_counts(design, g, eps, m_, k_, ell, cfg_.delta, cfg_);

    PhaseEvent& ev = event(ell, Stage::collaborative, eps);
    ev.min_active = ev.max_active = shared.size();

    const int d = actions_.dim();
    Vec mean_estimate = Vec::Zero(d);
    bool truncated = false;
    for (std::size_t i = 0; i < agents.size(); ++i) {
      LeastSquaresAccumulator acc(d);
      const long before = agents[i].used;
      truncated = execute(agents[i], static_cast<int>(i), plan, acc) || truncated;
      ev.pulls_total += agents[i].used - before;
      if (!truncated) mean_estimate += acc.solve();
    }

    PhaseSnapshot snap;
    snap.ell = ell;
    snap.stage = Stage::collaborative;
    snap.eps = eps;
    if (observer_) snap.active_before = shared.ids();
    snap.pulls_per_agent = plan.total;
    snap.truncated = truncated;
    if (!truncated) {
      mean_estimate /= static_cast<double>(agents.size());
      auto survivors = std::make_shared<const ActionSet>(eliminate(shared, mean_estimate, eps));
      snap.estimate = mean_estimate;
      if (observer_) snap.survivors = survivors->ids();
      for (auto& a : agents) {
        a.active = survivors;
        a.estimate = mean_estimate;
      }
    }
    if (observer_) observer_(snap);
    return !truncated;
  }

  void personal_phase(AgentState& a, int agent, int ell) {
    const double eps = std::ldexp(1.0, -ell);
    double g = 0.0;
    const Design design = design_for(*a.active, g);
    const PullPlan plan = local_pull_counts(design, g, eps, m_, k_, ell, cfg_.delta, cfg_);

    PhaseEvent& ev = event(ell, Stage::personal, eps);
    ev.min_active = ev.min_active == 0 ? a.active->size() : std::min(ev.min_active, a.active->size());
    ev.max_active = std::max(ev.max_active, a.active->size());

    LeastSquaresAccumulator acc(actions_.dim());
    const long before = a.used;
    const bool truncated = execute(a, agent, plan, acc);
    ev.pulls_total += a.used - before;

    PhaseSnapshot snap;
    snap.ell = ell;
    snap.stage = Stage::personal;
    snap.eps = eps;
    snap.agent = agent;
    if (observer_) snap.active_before = a.active->ids();
    snap.pulls_per_agent = plan.total;
    snap.truncated = truncated;
    if (!truncated) {
      a.estimate = acc.solve();
      a.active = std::make_shared<const ActionSet>(eliminate(*a.active, a.estimate, eps));
      snap.estimate = a.estimate;
      if (observer_) snap.survivors = a.active->ids();
    }
    if (observer_) observer_(snap);
  }

  // Runs personal phases for one agent from phase `first_ell` until its
  // budget is spent.
  void personal_until_done(AgentState& a, int agent, int first_ell) {
    for (int ell = first_ell; has_budget(a); ++ell) {
      if (ell > cfg_.max_phases) {
        commit(a);
        break;
      }
      personal_phase(a, agent, ell);
    }
  }

  std::vector<PhaseEvent> events() const {
    std::vector<PhaseEvent> out;
    for (const auto& [key, ev] : events_) out.push_back(ev);
    return out;
  }

  std::vector<double> per_round_regret(const AgentState& a, int agent) const {
    std::vector<double> out(a.played.size());
    for (std::size_t t = 0; t < a.played.size(); ++t) out[t] = instance_.gaps(agent, base_pos_.at(a.played[t]));
    return out;
  }

  RegretTrace joint_trace(const std::vector<AgentState>& agents) const {
    RegretTrace trace;
    trace.cumulative.assign(static_cast<std::size_t>(cfg_.n), 0.0);
    for (const auto& a : agents) {
      if (static_cast<long>(a.played.size()) != cfg_.n) throw AccountingError("run: agent did not play n rounds");
    }
    double total = 0.0;
    for (long t = 0; t < cfg_.n; ++t) {
      double inc = 0.0;
      for (std::size_t i = 0; i < agents.size(); ++i) {
        inc += instance_.gaps(static_cast<Eigen::Index>(i), base_pos_.at(agents[i].played[t]));
      }
      total += inc;
      trace.cumulative[t] = total;
    }
    return trace;
  }

 private:
  PhaseEvent& event(int ell, Stage stage, double eps) {
    auto& ev = events_[ell];
    if (ev.ell == 0) {
      ev.ell = ell;
      ev.stage = stage;
      ev.eps = eps;
    }
    return ev;
  }

  PolicyConfig cfg_;
  const ActionSet& actions_;
  const Instance& instance_;
  const PhaseObserver& observer_;
  int m_;
  int k_;
  double sigma0_ = 1.0;
  std::unordered_map<int, int> base_pos_;
  std::shared_ptr<const ActionSet> initial_;
  std::map<int, PhaseEvent> events_;
};

std::vector<AgentState> make_agents(const Runner& runner, int m, std::uint64_t noise_seed) {
  std::vector<AgentState> agents;
  agents.reserve(m);
  for (int i = 0; i < m; ++i) agents.push_back(runner.make_agent(make_engine(agent_noise_seed(noise_seed, i))));
  return agents;
}

RunResult run(Mode mode, const PolicyConfig& cfg, const ActionSet& actions, const PopulationModel& model,
              const Instance& instance, std::uint64_t noise_seed, const PhaseObserver& observer) {
  model.validate();
  const int m = instance.agents();
  if (m < 1) throw ConfigError("run: instance has no agents");
  Runner runner(cfg, actions, instance, model.sigma0, observer, m);
  std::vector<AgentState> agents = make_agents(runner, m, noise_seed);

  RunResult result;
  if (mode == Mode::cppe) result.h = h_threshold(actions, model.C, m, actions.size(), cfg.delta);

  int ell = 1;
  if (mode != Mode::indpe) {
    // Collaborative stage: all agents share one active set and one budget
    // clock. CP-PE leaves it at the first phase with h > eps/2.
    for (; runner.has_budget(agents.front()); ++ell) {
      if (mode == Mode::cppe && !(result.h <= std::ldexp(1.0, -ell) / 2.0)) break;
      if (ell > cfg.max_phases) {
        for (auto& a : agents) runner.commit(a);
        break;
      }
      if (runner.collaborative_phase(agents, ell)) ++result.collaborative_phases;
    }
  }
  if (mode != Mode::fedpe) {
    for (int i = 0; i < m; ++i) runner.personal_until_done(agents[i], i, ell);
  }

  result.events = runner.events();
  result.trace = runner.joint_trace(agents);
  result.trace.algorithm = mode == Mode::cppe ? "cppe" : mode == Mode::fedpe ? "fedpe" : "indpe";
  for (auto& a : agents) result.played.push_back(std::move(a.played));
  return result;
}

}  // namespace

RunResult run_cppe(const PolicyConfig& cfg, const ActionSet& actions, const PopulationModel& model,
                   const Instance& instance, std::uint64_t noise_seed, const PhaseObserver& observer) {
  return run(Mode::cppe, cfg, actions, model, instance, noise_seed, observer);
}

RunResult run_fedpe(const PolicyConfig& cfg, const ActionSet& actions, const PopulationModel& model,
                    const Instance& instance, std::uint64_t noise_seed, const PhaseObserver& observer) {
  return run(Mode::fedpe, cfg, actions, model, instance, noise_seed, observer);
}

RunResult run_indpe(const PolicyConfig& cfg, const ActionSet& actions, const PopulationModel& model,
                    const Instance& instance, std::uint64_t noise_seed, const PhaseObserver& observer) {
  return run(Mode::indpe, cfg, actions, model, instance, noise_seed, observer);
}

std::vector<double> run_single_agent_pe(const PolicyConfig& cfg, const ActionSet& actions, const Instance& instance,
                                        int agent, int m_for_log, double sigma0, Engine& rng) {
  if (agent < 0 || agent >= instance.agents()) throw ConfigError("run_single_agent_pe: agent out of range");
  const PhaseObserver none;
  Runner runner(cfg, actions, instance, sigma0, none, m_for_log);
  AgentState a = runner.make_agent(rng);
  runner.personal_until_done(a, agent, 1);
  rng = a.rng;
  return runner.per_round_regret(a, agent);
}

}  // namespace cppe
