#include "cppe/errors.hpp"
#include "cppe/harness.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace cppe {

namespace {

using nlohmann::json;

const std::set<std::string> kKnownKeys = {
    "m",          "n",           "d",
    "k",          "mu",          "sigma",
    "C",          "sigma0",      "family",
    "delta",      "reps",        "seed",
    "algorithms", "action_source", "actions_csv",
    "net_eps",    "net_size_cap", "normalize",
    "workers",    "pull_constant_collab", "pull_constant_local",
    "log_arg_variant", "design_tol", "design_max_iter",
    "max_phases",
};

const std::set<std::string> kAlgorithms = {"cppe", "fedpe", "indpe"};

template <typename T>
T get_as(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

}  // namespace

PopulationModel ExperimentConfig::population() const {
  PopulationModel model;
  model.mu = mu;
  model.C = covariance ? *covariance : Mat(sigma * sigma * Mat::Identity(d, d));
  model.sigma0 = sigma0;
  model.family = family;
  return model;
}

void ExperimentConfig::validate() const {
  if (m < 1) throw ConfigError("m must be >= 1");
  if (n < 1) throw ConfigError("n must be >= 1");
  if (d < 1) throw ConfigError("d must be >= 1");
  if (reps < 1) throw ConfigError("reps must be >= 1");
  if (!(sigma >= 0.0)) throw ConfigError("sigma must be >= 0");
  if (!(sigma0 > 0.0)) throw ConfigError("sigma0 must be > 0");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
  if (mu.size() != d) throw ConfigError("mu must have d entries");
  if (covariance && (covariance->rows() != d || covariance->cols() != d)) throw ConfigError("C must be d x d");
  if (algorithms.empty()) throw ConfigError("algorithms must not be empty");
  std::set<std::string> seen;
  for (const auto& a : algorithms) {
    if (!kAlgorithms.count(a)) throw ConfigError("unknown algorithm '" + a + "'");
    if (!seen.insert(a).second) throw ConfigError("algorithm listed twice: '" + a + "'");
  }
  if (action_source == ActionSource::uniform_circle) {
    if (d != 2) throw ConfigError("uniform_circle actions need d = 2");
    if (k < 1) throw ConfigError("k must be >= 1");
  }
  if (action_source == ActionSource::csv_file && actions_csv.empty()) {
    throw ConfigError("action_source csv_file needs actions_csv");
  }
  if (net_eps && !(*net_eps > 0.0 && *net_eps <= 1.0)) throw ConfigError("net_eps must lie in (0,1]");
  if (workers < 0) throw ConfigError("workers must be >= 0");
  try {
    population().validate();
    PolicyConfig p = policy;
    p.n = n;
    p.delta = delta;
    p.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!kKnownKeys.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }

  ExperimentConfig cfg;
  if (j.contains("m")) cfg.m = get_as<int>(j, "m");
  if (j.contains("n")) cfg.n = get_as<long>(j, "n");
  if (j.contains("d")) cfg.d = get_as<int>(j, "d");
  if (j.contains("k")) cfg.k = get_as<int>(j, "k");
  if (j.contains("mu")) {
    cfg.mu = to_vec(get_as<std::vector<double>>(j, "mu"));
  } else {
    cfg.mu = Vec::Zero(cfg.d);
  }
  if (j.contains("sigma") && j.contains("C")) throw ConfigError("give either sigma or C, not both");
  if (j.contains("sigma")) cfg.sigma = get_as<double>(j, "sigma");
  if (j.contains("C")) {
    const auto rows = get_as<std::vector<std::vector<double>>>(j, "C");
    Mat c(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (static_cast<Eigen::Index>(rows[r].size()) != c.cols()) throw ConfigError("C rows must have equal length");
      for (std::size_t col = 0; col < rows[r].size(); ++col) c(r, col) = rows[r][col];
    }
    cfg.covariance = std::move(c);
  }
  if (j.contains("sigma0")) cfg.sigma0 = get_as<double>(j, "sigma0");
  if (j.contains("family")) {
    const auto f = get_as<std::string>(j, "family");
    if (f == "gaussian") {
      cfg.family = PopulationFamily::gaussian;
    } else if (f == "subgaussian_uniform") {
      cfg.family = PopulationFamily::subgaussian_uniform;
    } else {
      throw ConfigError("family must be gaussian or subgaussian_uniform");
    }
  }
  if (j.contains("delta")) cfg.delta = get_as<double>(j, "delta");
  if (j.contains("reps")) cfg.reps = get_as<int>(j, "reps");
  if (j.contains("seed")) cfg.seed = get_as<std::uint64_t>(j, "seed");
  if (j.contains("algorithms")) cfg.algorithms = get_as<std::vector<std::string>>(j, "algorithms");
  if (j.contains("action_source")) {
    const auto s = get_as<std::string>(j, "action_source");
    if (s == "uniform_circle") {
      cfg.action_source = ActionSource::uniform_circle;
    } else if (s == "epsilon_net") {
      cfg.action_source = ActionSource::epsilon_net;
    } else if (s == "csv_file") {
      cfg.action_source = ActionSource::csv_file;
    } else {
      throw ConfigError("action_source must be uniform_circle, epsilon_net or csv_file");
    }
  }
  if (j.contains("actions_csv")) cfg.actions_csv = get_as<std::string>(j, "actions_csv");
  if (j.contains("net_eps")) cfg.net_eps = get_as<double>(j, "net_eps");
  if (j.contains("net_size_cap")) cfg.net_size_cap = get_as<double>(j, "net_size_cap");
  if (j.contains("normalize")) cfg.normalize = get_as<bool>(j, "normalize");
  if (j.contains("workers")) cfg.workers = get_as<int>(j, "workers");
  if (j.contains("pull_constant_collab")) cfg.policy.pull_constant_collab = get_as<double>(j, "pull_constant_collab");
  if (j.contains("pull_constant_local")) cfg.policy.pull_constant_local = get_as<double>(j, "pull_constant_local");
  if (j.contains("log_arg_variant")) {
    const auto v = get_as<std::string>(j, "log_arg_variant");
    if (v == "proof") {
      cfg.policy.log_arg_variant = LogArgVariant::proof;
    } else if (v == "maintext") {
      cfg.policy.log_arg_variant = LogArgVariant::maintext;
    } else {
      throw ConfigError("log_arg_variant must be proof or maintext");
    }
  }
  if (j.contains("design_tol")) cfg.policy.design_tol = get_as<double>(j, "design_tol");
  if (j.contains("design_max_iter")) cfg.policy.design_max_iter = get_as<int>(j, "design_max_iter");
  if (j.contains("max_phases")) cfg.policy.max_phases = get_as<int>(j, "max_phases");
  cfg.policy.n = cfg.n;
  cfg.policy.delta = cfg.delta;
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

ActionSet uniform_circle(int k) {
  if (k < 1) throw ConfigError("uniform_circle: k must be >= 1");
  Mat pts(k, 2);
  for (int j = 0; j < k; ++j) {
    const double a = 2.0 * std::numbers::pi * j / k;
    pts(j, 0) = std::cos(a);
    pts(j, 1) = std::sin(a);
  }
  return ActionSet::from_rows(std::move(pts));
}

ActionSet parse_actions_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ls(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
        if (used != cell.size()) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;
      }
      throw ConfigError("actions CSV: non-numeric row '" + line + "'");
    }
    first = false;
    if (!rows.empty() && row.size() != rows.front().size()) throw ConfigError("actions CSV: ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("actions CSV: no actions");
  Mat pts(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) pts(r, c) = rows[r][c];
  }
  return ActionSet::from_rows(std::move(pts));
}

ActionSet read_actions_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open actions file " + path.string());
  return parse_actions_csv(in);
}

ActionSet build_action_set(const ExperimentConfig& cfg) {
  switch (cfg.action_source) {
    case ActionSource::uniform_circle:
      return uniform_circle(cfg.k);
    case ActionSource::epsilon_net: {
      const double eps = cfg.net_eps.value_or(std::min(1.0, 1.0 / std::sqrt(static_cast<double>(cfg.m) * cfg.n)));
      return epsilon_net(cfg.d, eps, cfg.net_size_cap);
    }
    case ActionSource::csv_file: {
      ActionSet set = read_actions_csv(cfg.actions_csv);
      if (set.dim() != cfg.d) throw ConfigError("actions CSV dimension differs from d");
      return set;
    }
  }
  throw ConfigError("unknown action source");
}

}  // namespace cppe
