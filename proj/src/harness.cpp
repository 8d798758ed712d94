#include "cppe/harness.hpp"

#include "cppe/errors.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace cppe {

double joint_pseudo_regret_increment(const Instance& instance, const std::vector<std::pair<int, int>>& pulls) {
  std::vector<char> seen(static_cast<std::size_t>(instance.agents()), 0);
  double total = 0.0;
  for (const auto& [agent, action] : pulls) {
    if (agent < 0 || agent >= instance.agents()) throw AccountingError("unknown agent " + std::to_string(agent));
    if (seen[agent]) throw AccountingError("agent " + std::to_string(agent) + " pulled twice in one round");
    seen[agent] = 1;
    total += instance.gap(agent, action);
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) throw AccountingError("some agent did not pull this round");
  return total;
}

// ---------------------------------------------------------------------------

SummaryStats aggregate(const std::vector<RegretTrace>& traces, bool normalize, int m) {
  if (traces.empty()) throw ValidationError("aggregate: no traces");
  if (m < 1) throw ValidationError("aggregate: m must be >= 1");
  const std::size_t len = traces.front().cumulative.size();
  for (const auto& t : traces) {
    if (t.cumulative.size() != len) throw ValidationError("aggregate: traces differ in length");
    if (t.algorithm != traces.front().algorithm) throw ValidationError("aggregate: traces mix algorithms");
  }
  SummaryStats s;
  s.algorithm = traces.front().algorithm;
  s.m = m;
  s.normalized = normalize;
  s.reps = static_cast<int>(traces.size());
  s.mean.resize(len);
  s.std.resize(len);
  const double scale = normalize ? 1.0 / m : 1.0;
  const double count = static_cast<double>(traces.size());
  std::vector<double> column(traces.size());
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t r = 0; r < traces.size(); ++r) column[r] = traces[r].cumulative[t] * scale;
    std::sort(column.begin(), column.end());
    double sum = 0.0;
    for (double v : column) sum += v;
    const double mean = sum / count;
    double ss = 0.0;
    for (double v : column) ss += (v - mean) * (v - mean);
    s.mean[t] = mean;
    s.std[t] = std::sqrt(ss / count);
  }
  return s;
}

LinearFit fit_final_window(const std::vector<double>& y, double window_fraction) {
  if (!(window_fraction > 0.0 && window_fraction <= 1.0)) throw ValidationError("window_fraction must lie in (0,1]");
  const std::size_t n = y.size();
  const std::size_t w = std::min(n, static_cast<std::size_t>(std::ceil(window_fraction * static_cast<double>(n))));
  if (w < 2) throw ValidationError("final window needs at least two rounds");
  const std::size_t start = n - w;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = start; i < n; ++i) {
    mx += static_cast<double>(i + 1);
    my += y[i];
  }
  mx /= static_cast<double>(w);
  my /= static_cast<double>(w);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = start; i < n; ++i) {
    const double dx = static_cast<double>(i + 1) - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

double final_slope(const std::vector<double>& mean, double window_fraction) {
  return fit_final_window(mean, window_fraction).slope;
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t algorithm_code(const std::string& algorithm) {
  if (algorithm == "cppe") return 0;
  if (algorithm == "fedpe") return 1;
  if (algorithm == "indpe") return 2;
  throw ConfigError("unknown algorithm '" + algorithm + "'");
}

struct RepOutput {
  std::vector<RegretTrace> traces;
  std::vector<EventRecord> events;
  std::vector<ReplicationFailure> failures;
  int collaborative_phases = -1;
};

RepOutput run_replication(const ExperimentConfig& cfg, const ActionSet& actions, const PopulationModel& model, int rep) {
  RepOutput out;
  Instance instance;
  try {
    Engine rng = make_engine(instance_seed(cfg.seed, rep));
    instance = sample_instance(model, cfg.m, actions, rng);
  } catch (const std::exception& e) {
    for (const auto& a : cfg.algorithms) out.failures.push_back({rep, a, std::string("instance: ") + e.what()});
    return out;
  }
  PolicyConfig policy = cfg.policy;
  policy.n = cfg.n;
  policy.delta = cfg.delta;
  for (const auto& a : cfg.algorithms) {
    try {
      const std::uint64_t noise = algorithm_noise_seed(cfg.seed, rep, a);
      RunResult r;
      if (a == "cppe") {
        r = run_cppe(policy, actions, model, instance, noise);
        out.collaborative_phases = r.collaborative_phases;
      } else if (a == "fedpe") {
        r = run_fedpe(policy, actions, model, instance, noise);
      } else {
        r = run_indpe(policy, actions, model, instance, noise);
      }
      r.trace.rep = rep;
      for (const auto& ev : r.events) out.events.push_back({a, rep, ev});
      out.traces.push_back(std::move(r.trace));
    } catch (const std::exception& e) {
      out.failures.push_back({rep, a, e.what()});
    }
  }
  return out;
}

}  // namespace

std::uint64_t instance_seed(std::uint64_t master, int rep) {
  return derive_seed(master, {static_cast<std::uint64_t>(rep), 0});
}

std::uint64_t algorithm_noise_seed(std::uint64_t master, int rep, const std::string& algorithm) {
  return derive_seed(master, {static_cast<std::uint64_t>(rep), 1 + algorithm_code(algorithm)});
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  const ActionSet actions = build_action_set(cfg);
  const PopulationModel model = cfg.population();

  int workers = opts.workers > 0 ? opts.workers : cfg.workers;
  if (workers <= 0) workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, cfg.reps);

  std::vector<RepOutput> outputs(static_cast<std::size_t>(cfg.reps));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int rep = next++; rep < cfg.reps; rep = next++) outputs[rep] = run_replication(cfg, actions, model, rep);
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ExperimentResult result;
  for (auto& o : outputs) {
    if (!o.failures.empty()) ++result.failed_replications;
    result.collaborative_phases.push_back(o.collaborative_phases);
    for (auto& t : o.traces) result.traces.push_back(std::move(t));
    for (auto& e : o.events) result.events.push_back(std::move(e));
    for (auto& f : o.failures) result.failures.push_back(std::move(f));
  }
  for (const auto& a : cfg.algorithms) {
    std::vector<RegretTrace> group;
    for (const auto& t : result.traces) {
      if (t.algorithm == a) group.push_back(t);
    }
    if (!group.empty()) result.summaries.push_back(aggregate(group, cfg.normalize, cfg.m));
  }
  if (opts.out_dir) persist(result, *opts.out_dir);
  return result;
}

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_traces_csv(std::ostream& out, const std::vector<RegretTrace>& traces) {
  out << "algorithm,rep,round,joint_cum_regret\n";
  std::string line;
  for (const auto& t : traces) {
    for (std::size_t i = 0; i < t.cumulative.size(); ++i) {
      line.clear();
      line += t.algorithm;
      line += ',';
      line += std::to_string(t.rep);
      line += ',';
      line += std::to_string(i + 1);
      line += ',';
      line += format_double(t.cumulative[i]);
      line += '\n';
      out << line;
    }
  }
}

std::vector<RegretTrace> read_traces_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "algorithm,rep,round,joint_cum_regret") {
    throw ConfigError("trace CSV: unexpected header");
  }
  std::vector<RegretTrace> traces;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    const auto c3 = line.find(',', c2 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos || c3 == std::string::npos) {
      throw ConfigError("trace CSV: malformed row '" + line + "'");
    }
    const std::string algo = line.substr(0, c1);
    const int rep = std::stoi(line.substr(c1 + 1, c2 - c1 - 1));
    const long round = std::stol(line.substr(c2 + 1, c3 - c2 - 1));
    double value = 0.0;
    const char* first = line.data() + c3 + 1;
    const char* last = line.data() + line.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) throw ConfigError("trace CSV: bad number in '" + line + "'");
    if (traces.empty() || traces.back().algorithm != algo || traces.back().rep != rep) {
      traces.push_back(RegretTrace{algo, rep, {}});
    }
    if (round != static_cast<long>(traces.back().cumulative.size()) + 1) {
      throw ConfigError("trace CSV: rounds out of order in '" + line + "'");
    }
    traces.back().cumulative.push_back(value);
  }
  return traces;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryStats>& summaries) {
  out << "algorithm,round,mean,std,m,normalized\n";
  for (const auto& s : summaries) {
    for (std::size_t i = 0; i < s.mean.size(); ++i) {
      out << s.algorithm << ',' << (i + 1) << ',' << format_double(s.mean[i]) << ',' << format_double(s.std[i]) << ','
          << s.m << ',' << (s.normalized ? 1 : 0) << '\n';
    }
  }
}

void write_events_csv(std::ostream& out, const std::vector<EventRecord>& events) {
  out << "algorithm,rep,phase,stage,eps,pulls_total,min_active,max_active\n";
  for (const auto& e : events) {
    out << e.algorithm << ',' << e.rep << ',' << e.event.ell << ',' << to_string(e.event.stage) << ','
        << format_double(e.event.eps) << ',' << e.event.pulls_total << ',' << e.event.min_active << ','
        << e.event.max_active << '\n';
  }
}

void persist(const ExperimentResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("traces.csv");
    write_traces_csv(f, result.traces);
  }
  {
    auto f = open("summary.csv");
    write_summary_csv(f, result.summaries);
  }
  {
    auto f = open("events.csv");
    write_events_csv(f, result.events);
  }
  if (!result.failures.empty()) {
    auto f = open("failures.csv");
    f << "algorithm,rep,message\n";
    for (const auto& x : result.failures) {
      std::string msg = x.message;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      f << x.algorithm << ',' << x.rep << ',' << msg << '\n';
    }
  }
}

}  // namespace cppe
