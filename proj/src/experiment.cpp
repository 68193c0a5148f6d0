#include "con2em/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace con2em {

namespace {

using nlohmann::json;

std::string fmt_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double_field(const std::string& s, const std::string& where) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc()) {
    throw std::runtime_error(where + ": bad numeric field '" + s + "'");
  }
  return v;
}

void check_keys(const json& obj, const std::string& path,
                const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("config: unknown key '" + path + "." + key + "'");
    }
  }
}

template <typename T>
void read_field(const json& obj, const std::string& path, const char* key,
                T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config: bad value for '" + path + "." + key +
                      "': " + e.what());
  }
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::erm: return "erm";
    case Method::erm_mixup: return "erm_mixup";
    case Method::con2em: return "con2em";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  if (name == "erm") return Method::erm;
  if (name == "erm_mixup") return Method::erm_mixup;
  if (name == "con2em") return Method::con2em;
  throw ConfigError("config: unknown method '" + name +
                    "' (expected erm, erm_mixup or con2em)");
}

DomainDataset DatasetSpec::build() const {
  if (generator == "shifted_blobs") {
    return gen_shifted_blobs(n_domains, n_classes, n_per_cell, input_dim,
                             shift_scale, seed);
  }
  if (generator == "rotated_moons") {
    return gen_rotated_moons(angles, n_per_domain, noise_std, seed);
  }
  if (generator == "correlation_flip") {
    return gen_correlation_flip(rates, n_per_domain, seed);
  }
  if (generator == "file") {
    if (path.empty()) throw ConfigError("config: dataset.path required for generator 'file'");
    return load_dataset(path);
  }
  throw ConfigError("config: unknown dataset.generator '" + generator + "'");
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return from_json_text(os.str(), path);
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text,
                                                  const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  check_keys(root, "$",
             {"dataset", "method", "ablation", "ablation_sweep", "train",
              "target_domain", "seeds", "out_dir"});

  ExperimentConfig cfg;
  if (!root.contains("dataset")) throw ConfigError("config: missing 'dataset'");
  {
    const auto& d = root.at("dataset");
    check_keys(d, "$.dataset",
               {"generator", "seed", "n_domains", "n_classes", "n_per_cell",
                "input_dim", "shift_scale", "angles", "n_per_domain",
                "noise_std", "rates", "path"});
    read_field(d, "$.dataset", "generator", cfg.dataset.generator);
    if (cfg.dataset.generator.empty()) {
      throw ConfigError("config: missing '$.dataset.generator'");
    }
    read_field(d, "$.dataset", "seed", cfg.dataset.seed);
    read_field(d, "$.dataset", "n_domains", cfg.dataset.n_domains);
    read_field(d, "$.dataset", "n_classes", cfg.dataset.n_classes);
    read_field(d, "$.dataset", "n_per_cell", cfg.dataset.n_per_cell);
    read_field(d, "$.dataset", "input_dim", cfg.dataset.input_dim);
    read_field(d, "$.dataset", "shift_scale", cfg.dataset.shift_scale);
    read_field(d, "$.dataset", "angles", cfg.dataset.angles);
    read_field(d, "$.dataset", "n_per_domain", cfg.dataset.n_per_domain);
    read_field(d, "$.dataset", "noise_std", cfg.dataset.noise_std);
    read_field(d, "$.dataset", "rates", cfg.dataset.rates);
    read_field(d, "$.dataset", "path", cfg.dataset.path);
  }
  {
    std::string m = "con2em";
    read_field(root, "$", "method", m);
    cfg.method = parse_method(m);
  }
  if (root.contains("ablation")) {
    const auto& a = root.at("ablation");
    check_keys(a, "$.ablation", {"no_dist_loss", "no_dist_mixup"});
    read_field(a, "$.ablation", "no_dist_loss", cfg.ablation.no_dist_loss);
    read_field(a, "$.ablation", "no_dist_mixup", cfg.ablation.no_dist_mixup);
  }
  read_field(root, "$", "ablation_sweep", cfg.ablation_sweep);
  if (root.contains("train")) {
    const auto& t = root.at("train");
    check_keys(t, "$.train",
               {"preset", "lr", "batch_size", "alpha", "beta", "rho",
                "lambda_mix", "max_iters", "hidden_dim", "latent_dim",
                "stats_dim", "eval_every", "warmup", "bandwidth_scales"});
    std::string preset;
    read_field(t, "$.train", "preset", preset);
    if (!preset.empty()) {
      if (preset == "con2em") {
        cfg.train.batch_size = 32;
      } else if (preset == "con2em-l") {
        cfg.train.batch_size = 88;
      } else {
        throw ConfigError("config: unknown train.preset '" + preset + "'");
      }
    }
    read_field(t, "$.train", "lr", cfg.train.lr);
    read_field(t, "$.train", "batch_size", cfg.train.batch_size);
    read_field(t, "$.train", "alpha", cfg.train.alpha);
    read_field(t, "$.train", "beta", cfg.train.beta);
    read_field(t, "$.train", "rho", cfg.train.rho);
    read_field(t, "$.train", "lambda_mix", cfg.train.lambda_mix);
    read_field(t, "$.train", "max_iters", cfg.train.max_iters);
    read_field(t, "$.train", "hidden_dim", cfg.train.hidden_dim);
    read_field(t, "$.train", "latent_dim", cfg.train.latent_dim);
    read_field(t, "$.train", "stats_dim", cfg.train.stats_dim);
    read_field(t, "$.train", "eval_every", cfg.train.eval_every);
    read_field(t, "$.train", "warmup", cfg.train.warmup);
    read_field(t, "$.train", "bandwidth_scales", cfg.train.bandwidth_scales);
  }
  if (!root.contains("target_domain")) {
    throw ConfigError("config: missing 'target_domain'");
  }
  read_field(root, "$", "target_domain", cfg.target_domain);
  read_field(root, "$", "seeds", cfg.seeds);
  read_field(root, "$", "out_dir", cfg.out_dir);
  cfg.validate();
  return cfg;
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("config: 'seeds' must be non-empty");
  if (target_domain < 0) {
    throw ConfigError("config: 'target_domain' must be a valid domain id");
  }
  if ((ablation.no_dist_loss || ablation.no_dist_mixup) &&
      method != Method::con2em) {
    throw ConfigError("config: ablation flags are valid only with method=con2em");
  }
  if (ablation_sweep && method != Method::con2em) {
    throw ConfigError("config: ablation_sweep requires method=con2em");
  }
  try {
    train.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: $.train invalid: ") + e.what());
  }
}

TrainConfig apply_method(TrainConfig base, Method m, const AblationFlags& f) {
  switch (m) {
    case Method::erm:
      base.augment = false;
      base.dist_loss = false;
      base.dist_mixup = false;
      base.instance_mixup = false;
      base.beta = 0.0;
      break;
    case Method::erm_mixup:
      base.augment = false;
      base.dist_loss = false;
      base.dist_mixup = false;
      base.instance_mixup = true;
      base.beta = 0.0;
      break;
    case Method::con2em:
      base.augment = true;
      base.instance_mixup = false;
      base.dist_loss = !f.no_dist_loss;
      base.dist_mixup = !f.no_dist_mixup;
      break;
  }
  return base;
}

std::string row_label(Method m, const AblationFlags& f, bool sweep_row) {
  if (m != Method::con2em) {
    return sweep_row && m == Method::erm ? "baseline" : method_name(m);
  }
  if (f.no_dist_loss && f.no_dist_mixup) return "con2em-no_dist_loss-no_dist_mixup";
  if (f.no_dist_loss) return sweep_row ? "wo_dist_loss" : "con2em-no_dist_loss";
  if (f.no_dist_mixup) return sweep_row ? "wo_dist_mixup" : "con2em-no_dist_mixup";
  return "con2em";
}

std::vector<Aggregate> ResultsTable::aggregate() const {
  std::vector<Aggregate> out;
  for (const auto& row : rows) {
    Aggregate* agg = nullptr;
    for (auto& a : out) {
      if (a.method == row.method && a.target == row.target) agg = &a;
    }
    if (!agg) {
      out.push_back({row.method, row.target, 0, 0.0, 0.0});
      agg = &out.back();
    }
    ++agg->n;
  }
  for (auto& a : out) {
    double sum = 0.0;
    for (const auto& row : rows) {
      if (row.method == a.method && row.target == a.target) {
        sum += row.target_acc;
      }
    }
    a.mean = sum / static_cast<double>(a.n);
    if (a.n > 1) {
      double ss = 0.0;
      for (const auto& row : rows) {
        if (row.method == a.method && row.target == a.target) {
          const double d = row.target_acc - a.mean;
          ss += d * d;
        }
      }
      a.stddev = std::sqrt(ss / static_cast<double>(a.n - 1));
    }
  }
  return out;
}

std::string resolve_out_dir(const std::string& out_dir) {
  const char* root = std::getenv("CON2EM_OUT_ROOT");
  if (root && root[0] != '\0' &&
      !std::filesystem::path(out_dir).is_absolute()) {
    return (std::filesystem::path(root) / out_dir).string();
  }
  return out_dir;
}

void write_steps_file(const std::string& path,
                      const std::vector<TrainRecord>& log) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_steps_file: cannot open " + path);
  os << "iter\tl_ins\tl_dis\tl_total\ttrain_acc\tval_acc\twall_ms\n";
  for (const auto& r : log) {
    os << r.iter << '\t' << fmt_double(r.l_ins) << '\t' << fmt_double(r.l_dis)
       << '\t' << fmt_double(r.l_total) << '\t' << fmt_double(r.train_acc)
       << '\t' << fmt_double(r.val_acc) << '\t' << fmt_double(r.wall_ms)
       << '\n';
  }
}

namespace {

void write_results_files(const std::string& dir, const ResultsTable& table) {
  {
    std::ofstream os(dir + "/results_raw.tsv");
    if (!os) throw std::runtime_error("run: cannot write results_raw.tsv");
    os << "method\ttarget\tseed\ttarget_acc\tbest_val_acc\tbest_iter\n";
    for (const auto& r : table.rows) {
      os << r.method << '\t' << r.target << '\t' << r.seed << '\t'
         << fmt_double(r.target_acc) << '\t' << fmt_double(r.best_val_acc)
         << '\t' << r.best_iter << '\n';
    }
  }
  {
    std::ofstream os(dir + "/results_agg.tsv");
    if (!os) throw std::runtime_error("run: cannot write results_agg.tsv");
    os << "method\ttarget\tn\tmean_target_acc\tstd_target_acc\n";
    for (const auto& a : table.aggregate()) {
      os << a.method << '\t' << a.target << '\t' << a.n << '\t'
         << fmt_double(a.mean) << '\t' << fmt_double(a.stddev) << '\n';
    }
  }
  {
    std::ofstream os(dir + "/timing.tsv");
    if (!os) throw std::runtime_error("run: cannot write timing.tsv");
    os << "method\ttarget\tseed\twall_s\n";
    for (const auto& r : table.rows) {
      os << r.method << '\t' << r.target << '\t' << r.seed << '\t'
         << fmt_double(r.wall_s) << '\n';
    }
  }
}

}  // namespace

ResultsTable run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.out_dir.empty()) {
    throw ConfigError("config: 'out_dir' is required for run");
  }
  const std::string dir = resolve_out_dir(cfg.out_dir);
  std::filesystem::create_directories(dir);

  const DomainDataset ds = cfg.dataset.build();
  ds.domain(cfg.target_domain);  // validate the id against the dataset
  if (ds.n_domains() < 3) {
    throw ConfigError("config: LODO needs at least two source domains");
  }

  struct RowSpec {
    Method method;
    AblationFlags flags;
    std::string label;
  };
  std::vector<RowSpec> specs;
  if (cfg.ablation_sweep) {
    specs.push_back({Method::erm, {}, "baseline"});
    specs.push_back({Method::con2em, {true, false}, "wo_dist_loss"});
    specs.push_back({Method::con2em, {false, true}, "wo_dist_mixup"});
    specs.push_back({Method::con2em, {false, false}, "con2em"});
  } else {
    specs.push_back(
        {cfg.method, cfg.ablation, row_label(cfg.method, cfg.ablation, false)});
  }

  ResultsTable table;
  for (const auto& spec : specs) {
    for (const auto seed : cfg.seeds) {
      const auto t0 = std::chrono::steady_clock::now();
      TrainConfig tc = apply_method(cfg.train, spec.method, spec.flags);
      tc.seed = seed;
      auto plan = split_lodo(ds, cfg.target_domain, seed);
      Trainer trainer(ds, plan, tc);
      auto fit = trainer.fit();

      const auto& target = ds.domain(cfg.target_domain);
      const double acc = evaluate(
          fit.best.model, domain_tensor(target, ds.input_dim), target.y);

      ResultRow row;
      row.method = spec.label;
      row.target = cfg.target_domain;
      row.seed = seed;
      row.target_acc = acc;
      row.best_val_acc = fit.best_val_acc;
      row.best_iter = fit.best_iter;
      row.wall_s = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
      table.rows.push_back(row);

      const std::string stem =
          dir + "/" + spec.label + "_s" + std::to_string(seed);
      write_steps_file(stem + ".steps.tsv", fit.log);
      save_checkpoint(stem + ".ckpt.txt", fit.best);
    }
  }
  write_results_files(dir, table);
  return table;
}

ResultsTable load_results(const std::string& raw_tsv_path) {
  std::ifstream is(raw_tsv_path);
  if (!is) throw std::runtime_error("load_results: cannot open " + raw_tsv_path);
  std::string line;
  if (!std::getline(is, line) ||
      line.rfind("method\ttarget\tseed", 0) != 0) {
    throw std::runtime_error("load_results: bad header in " + raw_tsv_path);
  }
  ResultsTable table;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    ResultRow r;
    std::string acc, val;
    row >> r.method >> r.target >> r.seed >> acc >> val >> r.best_iter;
    if (!row) throw std::runtime_error("load_results: malformed row: " + line);
    r.target_acc = parse_double_field(acc, "load_results");
    r.best_val_acc = parse_double_field(val, "load_results");
    table.rows.push_back(std::move(r));
  }
  return table;
}

namespace {

std::string pick_method(const ResultsTable& t, const std::string& requested,
                        const char* which) {
  std::set<std::string> labels;
  for (const auto& r : t.rows) labels.insert(r.method);
  if (!requested.empty()) {
    if (!labels.count(requested)) {
      throw ConfigError(std::string("compare: results ") + which +
                        " has no method '" + requested + "'");
    }
    return requested;
  }
  if (labels.size() != 1) {
    throw ConfigError(std::string("compare: results ") + which +
                      " holds several methods; pass an explicit selector");
  }
  return *labels.begin();
}

}  // namespace

std::vector<CompareRow> compare_results(const ResultsTable& a,
                                        const ResultsTable& b,
                                        const std::string& method_a,
                                        const std::string& method_b) {
  const std::string ma = pick_method(a, method_a, "A");
  const std::string mb = pick_method(b, method_b, "B");
  std::map<std::pair<int, std::uint64_t>, double> accs_a, accs_b;
  for (const auto& r : a.rows) {
    if (r.method == ma) accs_a[{r.target, r.seed}] = r.target_acc;
  }
  for (const auto& r : b.rows) {
    if (r.method == mb) accs_b[{r.target, r.seed}] = r.target_acc;
  }
  {
    std::set<std::pair<int, std::uint64_t>> ka, kb;
    for (const auto& [k, v] : accs_a) ka.insert(k);
    for (const auto& [k, v] : accs_b) kb.insert(k);
    if (ka != kb) {
      throw ConfigError("compare: seed/target sets differ between A and B");
    }
  }
  std::map<int, CompareRow> by_target;
  for (const auto& [key, va] : accs_a) {
    const double vb = accs_b.at(key);
    auto& row = by_target[key.first];
    row.target = key.first;
    ++row.n;
    row.mean_a += va;
    row.mean_b += vb;
    if (va > vb) ++row.a_wins;
    else if (vb > va) ++row.b_wins;
    else ++row.ties;
  }
  std::vector<CompareRow> out;
  for (auto& [t, row] : by_target) {
    row.mean_a /= static_cast<double>(row.n);
    row.mean_b /= static_cast<double>(row.n);
    row.mean_diff = row.mean_a - row.mean_b;
    out.push_back(row);
  }
  return out;
}

std::vector<SweepPoint> run_sweep(const ExperimentConfig& cfg,
                                  const std::string& param,
                                  const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("sweep: no values given");
  if (cfg.ablation_sweep) {
    throw ConfigError("sweep: ablation_sweep cannot be combined with a parameter sweep");
  }
  auto set_param = [&](TrainConfig& tc, double v) {
    if (param == "lambda_mix") tc.lambda_mix = v;
    else if (param == "beta") tc.beta = v;
    else if (param == "alpha") tc.alpha = v;
    else if (param == "lr") tc.lr = v;
    else throw ConfigError("sweep: unsupported parameter '" + param + "'");
  };
  const std::string root = resolve_out_dir(cfg.out_dir);
  std::filesystem::create_directories(root);
  std::vector<SweepPoint> points;
  for (const double v : values) {
    ExperimentConfig sub = cfg;
    set_param(sub.train, v);
    sub.out_dir = root + "/" + param + "_" + fmt_double(v);
    auto table = run_experiment(sub);
    SweepPoint pt;
    pt.value = v;
    for (const auto& a : table.aggregate()) {
      pt.n = a.n;
      pt.mean_target_acc = a.mean;
      pt.stddev = a.stddev;
    }
    points.push_back(pt);
  }
  std::ofstream os(root + "/sweep_summary.tsv");
  if (!os) throw std::runtime_error("sweep: cannot write sweep_summary.tsv");
  os << "param\tvalue\tn\tmean_target_acc\tstd_target_acc\n";
  for (const auto& pt : points) {
    os << param << '\t' << fmt_double(pt.value) << '\t' << pt.n << '\t'
       << fmt_double(pt.mean_target_acc) << '\t' << fmt_double(pt.stddev)
       << '\n';
  }
  return points;
}

void emit_plot_data(const std::string& steps_tsv_path,
                    const std::string& out_path) {
  std::ifstream is(steps_tsv_path);
  if (!is) throw std::runtime_error("emit_plot_data: cannot open " + steps_tsv_path);
  std::string header;
  if (!std::getline(is, header) ||
      header.rfind("iter\tl_ins\tl_dis\tl_total", 0) != 0) {
    throw std::runtime_error("emit_plot_data: bad steps header");
  }
  std::vector<std::string> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    // Drop the trailing wall_ms column; everything else passes through.
    const auto cut = line.find_last_of('\t');
    rows.push_back(line.substr(0, cut));
  }
  if (rows.empty()) {
    throw std::runtime_error("emit_plot_data: empty log " + steps_tsv_path);
  }
  std::ofstream os(out_path);
  if (!os) throw std::runtime_error("emit_plot_data: cannot open " + out_path);
  os << "iter\tl_ins\tl_dis\tl_total\ttrain_acc\tval_acc\n";
  for (const auto& r : rows) os << r << '\n';
}

}  // namespace con2em
