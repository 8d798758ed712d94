#include "cppe/design.hpp"
#include "cppe/environment.hpp"
#include "cppe/errors.hpp"
#include "cppe/harness.hpp"
#include "cppe/policies.hpp"
#include "cppe/rng.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw cppe::ConfigError("cannot write " + path);
  return f;
}

void write_row(std::ostream& out, const cppe::Vec& v) {
  for (Eigen::Index c = 0; c < v.size(); ++c) out << (c ? "," : "") << cppe::format_double(v(c));
  out << '\n';
}

int cmd_run(const std::string& config, const std::string& out_dir, int workers) {
  const cppe::ExperimentConfig cfg = cppe::load_config(config);
  cppe::RunOptions opts;
  opts.workers = workers;
  if (!out_dir.empty()) opts.out_dir = out_dir;
  const cppe::ExperimentResult result = cppe::run_experiment(cfg, opts);
  for (const auto& f : result.failures) {
    std::cerr << "rep " << f.rep << " " << f.algorithm << ": " << f.message << '\n';
  }
  for (const auto& s : result.summaries) {
    std::cout << s.algorithm << " final_mean=" << cppe::format_double(s.mean.back())
              << " final_std=" << cppe::format_double(s.std.back()) << " reps=" << s.reps << '\n';
  }
  if (result.failed_replications == cfg.reps) return kRuntimeError;
  return kOk;
}

int cmd_design(const std::string& actions_path, double tol) {
  const cppe::ActionSet set = cppe::read_actions_csv(actions_path);
  if (!(tol > 0.0)) throw cppe::ConfigError("tol must be > 0");
  const cppe::Design design = cppe::solve_g_optimal(set, tol, 100000);
  std::cout << "id,weight\n";
  for (std::size_t j = 0; j < design.ids.size(); ++j) {
    std::cout << design.ids[j] << ',' << cppe::format_double(design.weights[j]) << '\n';
  }
  std::cerr << "g=" << cppe::format_double(cppe::g_value(design, set)) << '\n';
  return kOk;
}

int cmd_net(int d, double eps, const std::string& out) {
  const cppe::ActionSet net = cppe::epsilon_net(d, eps);
  auto f = open_out(out);
  for (int j = 0; j < net.size(); ++j) write_row(f, net.action(j));
  std::cout << "points=" << net.size() << '\n';
  return kOk;
}

int cmd_hard(const cppe::HardInstanceParams& params, std::uint64_t seed, const std::string& out) {
  cppe::Engine rng = cppe::make_engine(seed);
  const cppe::HardInstance h = cppe::hard_instance_hypercube(params, rng);
  auto f = open_out(out);
  f << "# theta0_norm=" << cppe::format_double(h.theta0_norm) << ",eta=" << cppe::format_double(h.eta)
    << ",c3=" << cppe::format_double(h.c3) << ",c4=" << cppe::format_double(h.c4) << '\n';
  for (int l = 1; l < params.d; ++l) f << 'z' << l << ',';
  for (int c = 1; c <= params.d; ++c) f << 'x' << c << (c < params.d ? "," : "\n");
  for (std::size_t v = 0; v < h.vertices.size(); ++v) {
    for (int z : h.signs[v]) f << z << ',';
    write_row(f, h.vertices[v]);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative personalized phased elimination simulator"};
  app.require_subcommand(1);

  std::string config, out_dir;
  int workers = 0;
  auto* run = app.add_subcommand("run", "Run a replicated experiment");
  run->add_option("--config", config, "JSON config file")->required();
  run->add_option("--out", out_dir, "Output directory for CSV files");
  run->add_option("--workers", workers, "Concurrent replications (0 = auto)")->check(CLI::NonNegativeNumber);

  std::string actions_path;
  double tol = 0.01;
  auto* design = app.add_subcommand("design", "Solve the G-optimal design of an action set");
  design->add_option("--actions", actions_path, "Actions CSV, one row per action")->required();
  design->add_option("--tol", tol, "Relative tolerance on g");

  int net_d = 0;
  double net_eps = 0.0;
  std::string net_out;
  auto* net = app.add_subcommand("net", "Write an eps-net of the unit ball");
  net->add_option("--d", net_d, "Dimension")->required();
  net->add_option("--eps", net_eps, "Covering radius")->required();
  net->add_option("--out", net_out, "Output CSV")->required();

  cppe::HardInstanceParams hp;
  std::optional<double> alpha, gamma;
  std::uint64_t seed = 0;
  std::string hard_out;
  auto* hard = app.add_subcommand("hard", "Write a rotated-hypercube hard instance");
  hard->add_option("--d", hp.d, "Dimension")->required();
  hard->add_option("--n", hp.n, "Horizon")->required();
  auto* a_opt = hard->add_option("--alpha", alpha, "Large-sigma regime exponent");
  auto* g_opt = hard->add_option("--gamma", gamma, "Middle regime exponent (needs --m)");
  a_opt->excludes(g_opt);
  hard->add_option("--m", hp.m, "Number of agents (middle regime)");
  hard->add_option("--c1", hp.c1, "Scale constant")->required();
  hard->add_option("--seed", seed, "RNG seed")->required();
  hard->add_option("--out", hard_out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(config, out_dir, workers);
    if (*design) return cmd_design(actions_path, tol);
    if (*net) return cmd_net(net_d, net_eps, net_out);
    if (*hard) {
      if (!alpha && !gamma) throw cppe::ConfigError("hard: give --alpha or --gamma");
      if (gamma) {
        hp.regime = cppe::HardRegime::middle;
        hp.gamma = *gamma;
      } else {
        hp.alpha = *alpha;
      }
      return cmd_hard(hp, seed, hard_out);
    }
  } catch (const cppe::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const cppe::ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kOk;
}
