#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "con2em/data.hpp"
#include "con2em/train.hpp"

namespace con2em {

// Invalid or malformed user configuration; the CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Method { erm, erm_mixup, con2em };
std::string method_name(Method m);
Method parse_method(const std::string& name);

struct AblationFlags {
  bool no_dist_loss = false;
  bool no_dist_mixup = false;
};

struct DatasetSpec {
  std::string generator;  // shifted_blobs | rotated_moons | correlation_flip | file
  std::uint64_t seed = 0;
  // shifted_blobs
  int n_domains = 4;
  int n_classes = 3;
  int n_per_cell = 200;
  std::size_t input_dim = 2;
  double shift_scale = 6.0;
  // rotated_moons
  std::vector<double> angles{0, 15, 30, 45};
  int n_per_domain = 300;
  double noise_std = 0.2;
  // correlation_flip
  std::vector<double> rates{0.9, 0.8, -0.9};
  // file
  std::string path;

  DomainDataset build() const;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  Method method = Method::con2em;
  AblationFlags ablation;
  bool ablation_sweep = false;  // run the four Table-IV style rows
  TrainConfig train;
  int target_domain = -1;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;

  static ExperimentConfig from_json_file(const std::string& path);
  static ExperimentConfig from_json_text(const std::string& text,
                                         const std::string& origin);
  void validate() const;
};

// Resolve method + ablation flags into trainer switches.
TrainConfig apply_method(TrainConfig base, Method m, const AblationFlags& f);

// Row label written to results files ("baseline", "wo_dist_loss",
// "wo_dist_mixup", "con2em", "erm", "erm_mixup", ...).
std::string row_label(Method m, const AblationFlags& f, bool sweep_row);

struct ResultRow {
  std::string method;
  int target = -1;
  std::uint64_t seed = 0;
  double target_acc = 0.0;
  double best_val_acc = 0.0;
  std::int64_t best_iter = 0;
  double wall_s = 0.0;  // written only to the timing file
};

struct Aggregate {
  std::string method;
  int target = -1;
  std::size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;
};

struct ResultsTable {
  std::vector<ResultRow> rows;
  std::vector<Aggregate> aggregate() const;
};

// Runs every (method row, seed) combination: fit on the source domains,
// evaluate the best-validation checkpoint on the held-out target, and write
// raw rows, the aggregate table, per-step logs, checkpoints and timing under
// the config's output directory (prefixed by $CON2EM_OUT_ROOT when set and
// the path is relative). The deterministic metrics files are
// results_raw.tsv and results_agg.tsv; timing lives in timing.tsv.
ResultsTable run_experiment(const ExperimentConfig& cfg);

ResultsTable load_results(const std::string& raw_tsv_path);

struct CompareRow {
  int target = -1;
  std::size_t n = 0;
  double mean_a = 0.0;
  double mean_b = 0.0;
  double mean_diff = 0.0;  // a - b
  std::size_t a_wins = 0;
  std::size_t b_wins = 0;
  std::size_t ties = 0;
};

// Paired per-target comparison over the shared seed set. method_a/method_b
// select the row label when a file holds several; empty means "the only one".
std::vector<CompareRow> compare_results(const ResultsTable& a,
                                        const ResultsTable& b,
                                        const std::string& method_a = "",
                                        const std::string& method_b = "");

// Sweep one numeric training parameter (lambda_mix, beta, alpha or lr) over
// the given values; per-value artifacts land in <out>/<param>_<value>/ and a
// summary table in <out>/sweep_summary.tsv.
struct SweepPoint {
  double value = 0.0;
  std::size_t n = 0;
  double mean_target_acc = 0.0;
  double stddev = 0.0;
};
std::vector<SweepPoint> run_sweep(const ExperimentConfig& cfg,
                                  const std::string& param,
                                  const std::vector<double>& values);

// Re-emit a per-step log as plain plot columns
// (iter, l_ins, l_dis, l_total, train_acc, val_acc).
void emit_plot_data(const std::string& steps_tsv_path,
                    const std::string& out_path);
void write_steps_file(const std::string& path,
                      const std::vector<TrainRecord>& log);

std::string resolve_out_dir(const std::string& out_dir);

}  // namespace con2em
