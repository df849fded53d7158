#include <chrono>
#include <iostream>

#include "CLI11.hpp"
#include "saddle/experiments.hpp"

namespace lab = saddle::lab;

namespace {

void list_experiments(std::ostream& os) {
  os << "experiments:\n";
  for (const auto& name : lab::experiment_names()) os << "  " << name << '\n';
}

int run(const std::string& config_path, unsigned jobs, const std::string& out) {
  lab::ExperimentConfig config = lab::load_config(config_path);
  lab::apply_env_overrides(config);
  lab::RunOptions options;
  options.jobs = jobs;
  options.out = out;
  const auto start = std::chrono::steady_clock::now();
  const lab::ExperimentResult result = lab::run_experiment(config, options);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::cout << lab::to_string(config.experiment()) << ": " << result.trials << " trials, "
            << result.failed_trials << " failed, " << seconds << " s\n";
  if (result.summary.contains("stats")) {
    for (const auto& [label, st] : result.summary["stats"]["labels"].items()) {
      std::cout << "  " << label << ": " << st["count"] << " (p = " << st["probability"].get<double>()
                << " +- " << st["std_error"].get<double>() << ")\n";
    }
  }
  std::cout << "results in " << result.out_dir.string() << '\n';
  if (result.all_failed()) {
    std::cerr << "error: every trial failed\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Saddle-point avoidance experiments for projected gradient descent on manifolds", "saddle_lab"};
  app.require_subcommand(0, 1);

  auto* run_cmd = app.add_subcommand("run", "Run an experiment from a key=value config file");
  std::string config_path;
  unsigned jobs = 1;
  std::string out;
  run_cmd->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--jobs,-j", jobs, "Worker threads (0 = all cores)");
  run_cmd->add_option("--out,-o", out, "Output directory (overrides the config's out key)");

  auto* describe_cmd = app.add_subcommand("describe", "Describe an experiment, or list them");
  std::string name;
  describe_cmd->add_option("name", name, "Experiment name");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return run(config_path, jobs, out);
    if (*describe_cmd) {
      if (name.empty()) {
        std::cerr << "usage: " << app.get_name() << " describe <name>\n";
        list_experiments(std::cerr);
        return 2;
      }
      const auto e = lab::parse_experiment(name);
      if (!e) {
        std::cerr << "unknown experiment '" << name << "'\n";
        list_experiments(std::cerr);
        return 2;
      }
      std::cout << lab::describe(*e);
      return 0;
    }
    std::cerr << app.help();
    list_experiments(std::cerr);
    return 2;
  } catch (const lab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
