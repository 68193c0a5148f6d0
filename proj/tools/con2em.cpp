#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "con2em/experiment.hpp"

using namespace con2em;

namespace {

// Exit codes: 0 ok, 1 run failure, 2 config error.
constexpr int kOk = 0;
constexpr int kRunFailure = 1;
constexpr int kConfigError = 2;

ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::uint64_t>& seeds,
                             int target, const std::string& method,
                             const std::vector<std::string>& ablate,
                             const std::string& out) {
  auto cfg = ExperimentConfig::from_json_file(path);
  if (!seeds.empty()) cfg.seeds = seeds;
  if (target >= 0) cfg.target_domain = target;
  if (!method.empty()) cfg.method = parse_method(method);
  for (const auto& a : ablate) {
    if (a == "no_dist_loss") cfg.ablation.no_dist_loss = true;
    else if (a == "no_dist_mixup") cfg.ablation.no_dist_mixup = true;
    else throw ConfigError("--ablate: unknown flag '" + a +
                           "' (expected no_dist_loss or no_dist_mixup)");
  }
  if (!out.empty()) cfg.out_dir = out;
  cfg.validate();
  return cfg;
}

void print_table(const ResultsTable& table) {
  std::printf("%-16s %-7s %-6s %-12s %-12s\n", "method", "target", "seed",
              "target_acc", "best_val_acc");
  for (const auto& r : table.rows) {
    std::printf("%-16s %-7d %-6llu %-12.4f %-12.4f\n", r.method.c_str(),
                r.target, static_cast<unsigned long long>(r.seed),
                r.target_acc, r.best_val_acc);
  }
  std::printf("\naggregate (mean +- std over seeds):\n");
  for (const auto& a : table.aggregate()) {
    std::printf("%-16s target %-3d  %.4f +- %.4f  (n=%zu)\n", a.method.c_str(),
                a.target, a.mean, a.stddev, a.n);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"con2em: domain-generalization experiments on synthetic multi-domain data"};
  app.require_subcommand(1);

  std::string config_path, method, out_dir, param;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> ablate;
  int target = -1;

  auto* run = app.add_subcommand("run", "train and evaluate per the config");
  run->add_option("--config", config_path, "JSON experiment config")->required();
  run->add_option("--seed", seeds, "override the config's seed list");
  run->add_option("--target", target, "override the held-out target domain");
  run->add_option("--method", method, "override method (erm|erm_mixup|con2em)");
  run->add_option("--ablate", ablate,
                  "con2em ablation flags (no_dist_loss, no_dist_mixup)");
  run->add_option("--out", out_dir, "override the output directory");

  std::string results_a, results_b, method_a, method_b;
  auto* compare = app.add_subcommand(
      "compare", "paired per-target comparison of two results_raw.tsv files");
  compare->add_option("results_a", results_a, "first results_raw.tsv")->required();
  compare->add_option("results_b", results_b, "second results_raw.tsv")->required();
  compare->add_option("--method-a", method_a, "row label to select from A");
  compare->add_option("--method-b", method_b, "row label to select from B");

  std::vector<double> values;
  auto* sweep = app.add_subcommand("sweep", "sweep one training parameter");
  sweep->add_option("--config", config_path, "JSON experiment config")->required();
  sweep->add_option("--param", param, "lambda_mix, beta, alpha or lr")->required();
  sweep->add_option("--values", values, "parameter values")->required();
  sweep->add_option("--seed", seeds, "override the config's seed list");
  sweep->add_option("--target", target, "override the held-out target domain");
  sweep->add_option("--out", out_dir, "override the output directory");

  std::string log_path, plot_path;
  auto* emit = app.add_subcommand("emit-plot-data",
                                  "re-emit a steps log as plot columns");
  emit->add_option("--log", log_path, "steps .tsv written by run")->required();
  emit->add_option("--out", plot_path, "output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (run->parsed()) {
      auto cfg = load_config(config_path, seeds, target, method, ablate, out_dir);
      auto table = run_experiment(cfg);
      print_table(table);
      std::printf("\nartifacts under %s\n", resolve_out_dir(cfg.out_dir).c_str());
    } else if (compare->parsed()) {
      auto a = load_results(results_a);
      auto b = load_results(results_b);
      auto report = compare_results(a, b, method_a, method_b);
      std::printf("%-7s %-4s %-10s %-10s %-11s %-6s %-6s %-5s\n", "target",
                  "n", "mean_a", "mean_b", "mean_diff", "a>b", "b>a", "ties");
      for (const auto& r : report) {
        std::printf("%-7d %-4zu %-10.4f %-10.4f %+-11.4f %-6zu %-6zu %-5zu\n",
                    r.target, r.n, r.mean_a, r.mean_b, r.mean_diff, r.a_wins,
                    r.b_wins, r.ties);
      }
    } else if (sweep->parsed()) {
      auto cfg = load_config(config_path, seeds, target, "", {}, out_dir);
      auto points = run_sweep(cfg, param, values);
      std::printf("%-12s %-6s %-16s %-16s\n", param.c_str(), "n", "mean_acc",
                  "std_acc");
      for (const auto& pt : points) {
        std::printf("%-12g %-6zu %-16.4f %-16.4f\n", pt.value, pt.n,
                    pt.mean_target_acc, pt.stddev);
      }
    } else if (emit->parsed()) {
      emit_plot_data(log_path, plot_path);
      std::printf("wrote %s\n", plot_path.c_str());
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRunFailure;
  }
  return kOk;
}
