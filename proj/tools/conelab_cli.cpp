#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "conelab/builtins.hpp"

using namespace conelab;

namespace {

enum ExitCode { kPass = 0, kAssertionFail = 1, kConfigError = 2, kNumericalAbort = 3 };

/// A path to an INI file, or the name of a built-in scenario.
RunConfig load_config(const std::string& source) {
  if (std::filesystem::is_regular_file(source)) return parse_run_config(IniConfig::load(source));
  if (is_builtin(source)) return builtin_config(source);
  throw ConfigError("no config file or built-in scenario named '" + source + "'");
}

void set_threads(int cli_threads, int config_threads) {
  set_thread_count(cli_threads > 0 ? cli_threads : config_threads);
}

std::string out_dir_for(const std::string& out, const RunConfig& c) {
  return out.empty() ? "out/" + c.name : out;
}

int run_command(const std::string& source, const std::string& out, int threads) {
  const RunConfig c = load_config(source);
  set_threads(threads, c.threads);
  const std::string dir = out_dir_for(out, c);
  std::cout << "scenario " << c.name << " (config " << c.hash << ") -> " << dir << "\n";
  const RunReport rep = run_scenario(c, dir, &std::cout);
  for (const Check& k : rep.checks)
    std::printf("%s %-18s value=%-12.6g limit=%-10.4g %s\n", k.pass ? "PASS" : "FAIL", k.name.c_str(), k.value,
                k.limit, k.detail.c_str());
  if (rep.checks.empty()) std::cout << "no checks enabled\n";
  return rep.all_pass() ? kPass : kAssertionFail;
}

int convergence_command(const std::string& source, int levels, int seeds, const std::string& out, int threads) {
  const RunConfig c = load_config(source);
  set_threads(threads, c.threads);
  const std::string dir = out_dir_for(out, c);
  std::filesystem::create_directories(dir);
  const auto rows = convergence_study(c, levels, seeds);
  write_convergence_csv(dir + "/convergence.csv", rows, c.hash);
  std::printf("%-24s %5s", "identity", "seed");
  for (int cells : rows.front().cells) std::printf(" %12s", ("h=2/" + std::to_string(cells)).c_str());
  std::printf(" %7s %9s\n", "order", "threshold");
  bool ok = true;
  for (const ConvergenceRow& r : rows) {
    std::printf("%-24s %5u", r.identity.c_str(), r.seed);
    for (double e : r.error) std::printf(" %12.4e", e);
    std::printf(" %7.3f %9.2f %s\n", r.order, r.threshold, r.pass() ? "PASS" : "FAIL");
    ok = ok && r.pass();
  }
  return ok ? kPass : kAssertionFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cone energy and multiplier-identity laboratory for the critical wave equation"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 0;
  std::string out;
  app.add_option("--threads", threads, "OpenMP threads (0: config or runtime default)");
  app.add_option("--out", out, "Output directory (default out/<scenario>)");

  std::string source;
  auto* run = app.add_subcommand("run", "Run a config file or built-in scenario and evaluate its checks");
  run->add_option("config", source, "INI file or built-in scenario name")->required();

  int levels = 3, seeds = 2;
  auto* conv = app.add_subcommand("convergence", "Measured orders of the discrete identities over dyadic levels");
  conv->add_option("config", source, "INI file or built-in scenario name")->required();
  conv->add_option("--levels", levels, "Number of dyadic levels ending at the config grid")->check(CLI::Range(2, 6));
  conv->add_option("--seeds", seeds, "Random smooth fields per identity")->check(CLI::Range(1, 50));

  auto* list = app.add_subcommand("list", "List built-in scenarios");
  std::string name;
  auto* desc = app.add_subcommand("describe", "Describe a built-in scenario");
  desc->add_option("name", name, "Scenario name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kConfigError;
  }

  try {
    if (*list) {
      for (const std::string& n : list_scenarios()) std::cout << n << "\n";
      return kPass;
    }
    if (*desc) {
      std::cout << describe(name);
      return kPass;
    }
    if (*run) return run_command(source, out, threads);
    if (*conv) return convergence_command(source, levels, seeds, out, threads);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return kNumericalAbort;
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericalAbort;
  }
  return kPass;
}
