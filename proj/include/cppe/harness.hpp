#pragma once

#include "cppe/design.hpp"
#include "cppe/environment.hpp"
#include "cppe/policies.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cppe {

enum class ActionSource { uniform_circle, epsilon_net, csv_file };

struct ExperimentConfig {
  int m = 1;
  long n = 1;
  int d = 2;
  int k = 10;
  Vec mu;
  // Either sigma (C = sigma^2 I) or a full covariance.
  double sigma = 0.0;
  std::optional<Mat> covariance;
  double sigma0 = 1.0;
  PopulationFamily family = PopulationFamily::gaussian;
  double delta = 0.01;
  int reps = 1;
  std::uint64_t seed = 0;
  std::vector<std::string> algorithms{"cppe", "fedpe", "indpe"};
  ActionSource action_source = ActionSource::uniform_circle;
  std::string actions_csv;
  // epsilon_net source: radius (defaults to 1/sqrt(m n)) and size guard.
  std::optional<double> net_eps;
  double net_size_cap = 2e6;
  bool normalize = true;
  int workers = 0;
  PolicyConfig policy;

  PopulationModel population() const;
  // Throws ConfigError on inconsistent settings.
  void validate() const;
};

// Parses a flat JSON object; unknown keys are rejected with ConfigError.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

// k equally spaced points on the unit circle starting at angle 0.
ActionSet uniform_circle(int k);

// One action per line, comma separated; a non-numeric first line is skipped.
ActionSet read_actions_csv(const std::filesystem::path& path);
ActionSet parse_actions_csv(std::istream& in);

ActionSet build_action_set(const ExperimentConfig& cfg);

// Sum over agents of optimal value minus achieved value for one synchronized
// round, given (agent, action id) pairs. Throws AccountingError on unknown
// agents or action ids and when an agent is missing or repeated.
double joint_pseudo_regret_increment(const Instance& instance, const std::vector<std::pair<int, int>>& pulls);

struct SummaryStats {
  std::string algorithm;
  int m = 1;
  bool normalized = false;
  int reps = 0;
  std::vector<double> mean;
  std::vector<double> std;
};

// Pointwise mean and population standard deviation over traces of one
// algorithm, optionally divided by m. Values are summed in sorted order so the
// result does not depend on the order of the traces.
SummaryStats aggregate(const std::vector<RegretTrace>& traces, bool normalize = false, int m = 1);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

// Least-squares line through (t, y[t-1]) for the last ceil(window_fraction * n)
// rounds, t being the 1-based round index.
LinearFit fit_final_window(const std::vector<double>& y, double window_fraction);
double final_slope(const std::vector<double>& mean, double window_fraction);

struct ReplicationFailure {
  int rep = 0;
  std::string algorithm;
  std::string message;
};

struct EventRecord {
  std::string algorithm;
  int rep = 0;
  PhaseEvent event;
};

struct ExperimentResult {
  std::vector<RegretTrace> traces;  // ordered by (rep, algorithm order in config)
  std::vector<SummaryStats> summaries;
  std::vector<EventRecord> events;
  // CP-PE collaborative phases per replication (-1 where CP-PE did not run).
  std::vector<int> collaborative_phases;
  std::vector<ReplicationFailure> failures;
  int failed_replications = 0;
};

struct RunOptions {
  int workers = 0;  // 0: config value, then hardware concurrency
  std::optional<std::filesystem::path> out_dir;
};

// Per replication r: one Instance from derive_seed(seed, {r, 0}); algorithm a
// draws its reward noise from derive_seed(seed, {r, 1 + code(a)}).
ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

std::uint64_t instance_seed(std::uint64_t master, int rep);
std::uint64_t algorithm_noise_seed(std::uint64_t master, int rep, const std::string& algorithm);

// CSV persistence. Numbers use the shortest round-trip representation.
std::string format_double(double v);
void write_traces_csv(std::ostream& out, const std::vector<RegretTrace>& traces);
std::vector<RegretTrace> read_traces_csv(std::istream& in);
void write_summary_csv(std::ostream& out, const std::vector<SummaryStats>& summaries);
void write_events_csv(std::ostream& out, const std::vector<EventRecord>& events);
void persist(const ExperimentResult& result, const std::filesystem::path& dir);

}  // namespace cppe
