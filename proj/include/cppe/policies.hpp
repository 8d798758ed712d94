#pragma once

#include "cppe/design.hpp"
#include "cppe/environment.hpp"
#include "cppe/rng.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace cppe {

// Which form of the pull-count formulas to use. `proof` carries the constants
// and union-bound log arguments under which the estimation guarantee holds;
// `maintext` is the shorter form without constants.
enum class LogArgVariant { proof, maintext };

struct PolicyConfig {
  double delta = 0.01;
  long n = 1;
  double pull_constant_collab = 8.0;
  double pull_constant_local = 2.0;
  LogArgVariant log_arg_variant = LogArgVariant::proof;
  double design_tol = 0.01;
  int design_max_iter = 100000;
  // After this many phases the agent commits to its empirical best action.
  // 40 corresponds to eps = 2^-40.
  int max_phases = 40;

  void validate() const;
};

enum class Stage { collaborative, personal, exhausted };

const char* to_string(Stage s);

// Pull counts for one phase, ordered by design weight (descending, ties by id).
struct PullPlan {
  std::vector<int> ids;
  std::vector<long> counts;
  long total = 0;

  long count_of(int id) const;
};

PullPlan collaborative_pull_counts(const Design& design, double g, double eps, int m, int k, int ell, double delta,
                                   const PolicyConfig& cfg);
PullPlan local_pull_counts(const Design& design, double g, double eps, int m, int k, int ell, double delta,
                           const PolicyConfig& cfg);

// Keeps the actions x with max_x' <theta_hat, x' - x> <= 2 eps.
ActionSet eliminate(const ActionSet& active, const Vec& theta_hat, double eps);

// Empirical argmax over `active`; ties go to the lowest id.
int empirical_best(const ActionSet& active, const Vec& theta_hat);

// Finite eps-cover of the unit ball in R^d. Throws ResourceError when the
// covering bound (1 + 2/eps)^d exceeds `size_cap`.
ActionSet epsilon_net(int d, double eps, double size_cap = 2e6);

// ---------------------------------------------------------------------------
// Runs

// Emitted after every executed phase (per agent in the personal stage, once
// for all agents in the collaborative stage, with agent = -1).
struct PhaseSnapshot {
  int ell = 0;
  Stage stage = Stage::collaborative;
  double eps = 0.0;
  int agent = -1;
  std::vector<int> active_before;
  Vec estimate;
  std::vector<int> survivors;
  long pulls_per_agent = 0;
  bool truncated = false;
};

using PhaseObserver = std::function<void(const PhaseSnapshot&)>;

// Per-phase aggregate used for the event log.
struct PhaseEvent {
  int ell = 0;
  Stage stage = Stage::collaborative;
  double eps = 0.0;
  long pulls_total = 0;
  int min_active = 0;
  int max_active = 0;
};

struct RegretTrace {
  std::string algorithm;
  int rep = 0;
  std::vector<double> cumulative;
};

struct RunResult {
  RegretTrace trace;
  std::vector<PhaseEvent> events;
  int collaborative_phases = 0;
  double h = 0.0;
  // played[i][t] = id of the action agent i played in round t.
  std::vector<std::vector<int>> played;
};

// Reward noise for agent i is drawn from make_engine(derive_seed(noise_seed, {i})).
std::uint64_t agent_noise_seed(std::uint64_t noise_seed, int agent);

RunResult run_cppe(const PolicyConfig& cfg, const ActionSet& actions, const PopulationModel& model,
                   const Instance& instance, std::uint64_t noise_seed, const PhaseObserver& observer = {});
RunResult run_fedpe(const PolicyConfig& cfg, const ActionSet& actions, const PopulationModel& model,
                    const Instance& instance, std::uint64_t noise_seed, const PhaseObserver& observer = {});
RunResult run_indpe(const PolicyConfig& cfg, const ActionSet& actions, const PopulationModel& model,
                    const Instance& instance, std::uint64_t noise_seed, const PhaseObserver& observer = {});

// Single-agent phased elimination of agent `agent` with its own engine; m
// enters only through the log term of the local pull counts. Returns the
// per-round regret of that agent (not cumulative).
std::vector<double> run_single_agent_pe(const PolicyConfig& cfg, const ActionSet& actions, const Instance& instance,
                                        int agent, int m_for_log, double sigma0, Engine& rng);

}  // namespace cppe
