#include "con2em/train.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace con2em {

namespace {

constexpr std::uint64_t kInitTag = 1;
constexpr std::uint64_t kBatchTag = 2;
constexpr std::uint64_t kGammaTag = 3;
constexpr std::uint64_t kEpsTag = 4;
constexpr std::uint64_t kImixTag = 5;

std::string fmt_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc()) {
    throw std::runtime_error("checkpoint: bad numeric field '" + s + "'");
  }
  return v;
}

std::vector<double> parse_doubles(std::istream& is, std::size_t n) {
  std::vector<double> out;
  out.reserve(n);
  std::string tok;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(is >> tok)) throw std::runtime_error("checkpoint: truncated values");
    out.push_back(parse_double(tok));
  }
  return out;
}

void write_doubles(std::ostream& os, std::span<const double> v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ' ';
    os << fmt_double(v[i]);
  }
  os << '\n';
}

double accuracy(std::span<const int> pred, std::span<const int> truth) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == truth[i]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be > 0");
  if (batch_size == 0) {
    throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  }
  if (!(alpha > 0.0)) throw std::invalid_argument("TrainConfig: alpha must be > 0");
  if (beta < 0.0) throw std::invalid_argument("TrainConfig: beta must be >= 0");
  if (!(rho >= 0.0 && rho < 1.0)) {
    throw std::invalid_argument("TrainConfig: rho must lie in [0,1)");
  }
  if (!(lambda_mix > 0.0 && lambda_mix < 1.0)) {
    throw std::invalid_argument("TrainConfig: lambda_mix must lie in (0,1)");
  }
  if (hidden_dim == 0 || latent_dim == 0 || stats_dim == 0 || eval_every == 0) {
    throw std::invalid_argument("TrainConfig: dimensions must be positive");
  }
  if (bandwidth_scales.empty()) {
    throw std::invalid_argument("TrainConfig: bandwidth_scales must be non-empty");
  }
}

InstanceLossOut instance_loss(const EncoderModel& model, const ad::Tensor& x,
                              const ad::Tensor& targets,
                              std::span<const PseudoBatch> pseudo) {
  if (x.rank() != 2 || x.shape()[0] == 0) {
    throw std::invalid_argument("instance_loss: real batch must be non-empty");
  }
  const auto n_real = static_cast<double>(x.shape()[0]);
  InstanceLossOut out;
  auto z = model.encode(x);
  out.real_logits = model.class_logits(z);
  out.loss = ad::softmax_cross_entropy(out.real_logits, targets);
  if (!pseudo.empty()) {
    std::vector<ad::Tensor> parts;
    std::vector<int> labels;
    parts.reserve(pseudo.size());
    for (const auto& pb : pseudo) {
      parts.push_back(pb.latents);
      const std::size_t rows = pb.latents.shape()[0];
      labels.insert(labels.end(), rows, pb.label);
    }
    auto latents = ad::concat_rows(parts);
    auto logits = model.class_logits(model.adapt(latents));
    auto ce = ad::softmax_cross_entropy(
        logits, ad::onehot_rows(labels, static_cast<int>(model.cfg.n_classes)));
    // Both terms share the 1/n_real normalizer.
    out.loss = ad::add(out.loss,
                       ad::scale(ce, static_cast<double>(labels.size()) / n_real));
  }
  return out;
}

ad::Tensor distribution_loss(std::span<const ConditionalGaussian> batch_cells,
                             std::span<const AugmentedDistribution> aug_cells,
                             std::span<const AugmentedDistribution> mixup_cells,
                             const StatsBank& bank, const KernelConfig& cfg,
                             const ProjectionHead& head) {
  const int n_classes = static_cast<int>(head.out_dim());
  const double denom = static_cast<double>(bank.n_cells());
  ad::Tensor total = ad::Tensor::scalar(0.0);

  auto add_term = [&](const std::vector<ad::Tensor>& logit_rows,
                      const ad::Tensor& targets) {
    auto logits = ad::concat_rows(logit_rows);
    auto ce = ad::softmax_cross_entropy(logits, targets);
    const double w = static_cast<double>(logit_rows.size()) / denom;
    total = ad::add(total, ad::scale(ce, w));
  };

  if (!batch_cells.empty()) {
    std::vector<ad::Tensor> rows;
    std::vector<int> labels;
    for (const auto& cell : batch_cells) {
      rows.push_back(classify_distribution(cell, bank, cfg, head));
      labels.push_back(cell.cls);
    }
    add_term(rows, ad::onehot_rows(labels, n_classes));
  }
  if (!aug_cells.empty()) {
    std::vector<ad::Tensor> rows;
    std::vector<int> labels;
    for (const auto& aug : aug_cells) {
      rows.push_back(classify_distribution(aug.gaussian, bank, cfg, head));
      labels.push_back(aug.label);
    }
    add_term(rows, ad::onehot_rows(labels, n_classes));
  }
  if (!mixup_cells.empty()) {
    std::vector<ad::Tensor> rows;
    std::vector<double> soft;
    for (const auto& mix : mixup_cells) {
      if (mix.soft_label.size() != static_cast<std::size_t>(n_classes)) {
        throw std::invalid_argument("distribution_loss: bad soft label width");
      }
      rows.push_back(classify_distribution(mix.gaussian, bank, cfg, head));
      soft.insert(soft.end(), mix.soft_label.begin(), mix.soft_label.end());
    }
    add_term(rows, ad::Tensor::from_data(
                       {mixup_cells.size(), static_cast<std::size_t>(n_classes)},
                       std::move(soft)));
  }
  return total;
}

double evaluate(const EncoderModel& model, const ad::Tensor& x,
                std::span<const int> y) {
  if (x.rank() != 2 || x.shape()[0] == 0 || x.shape()[0] != y.size()) {
    throw std::invalid_argument("evaluate: empty or mismatched instance set");
  }
  auto logits = model.class_logits(model.encode(x));
  return accuracy(ad::argmax_rows(logits), y);
}

ad::Tensor domain_tensor(const DomainData& d, std::size_t input_dim) {
  return ad::Tensor::from_data({d.n(), input_dim}, d.x);
}

// ---- Trainer ----------------------------------------------------------------

Trainer::Trainer(const DomainDataset& ds, const SplitPlan& split,
                 TrainConfig cfg)
    : ds_(ds),
      cfg_(std::move(cfg)),
      bank_(1, 1, 1, 0.0),
      batch_rng_(cfg_.seed, kBatchTag),
      gamma_rng_(cfg_.seed, kGammaTag),
      eps_rng_(cfg_.seed, kEpsTag),
      imix_rng_(cfg_.seed, kImixTag) {
  cfg_.validate();
  if (split.sources.size() < 2) {
    throw std::invalid_argument("Trainer: need at least two source domains");
  }

  for (const auto& [id, part] : split.sources) {
    domain_id_to_index_[id] = static_cast<int>(source_domain_ids_.size());
    source_domain_ids_.push_back(id);
    (void)part;
  }

  const int n_sources = static_cast<int>(source_domain_ids_.size());
  model_cfg_.input_dim = ds.input_dim;
  model_cfg_.n_classes = static_cast<std::size_t>(ds.n_classes);
  model_cfg_.n_domains = static_cast<std::size_t>(n_sources);
  model_cfg_.hidden_dim = cfg_.hidden_dim;
  model_cfg_.latent_dim = cfg_.latent_dim;
  model_cfg_.stats_dim = cfg_.stats_dim;

  RandomStream init_rng(cfg_.seed, kInitTag);
  model_ = EncoderModel::init(model_cfg_, init_rng);
  bank_ = StatsBank(n_sources, ds.n_classes, cfg_.stats_dim, cfg_.rho);
  opt_.emplace(model_.parameters(),
               ad::AdamConfig{cfg_.lr, 0.9, 0.999, 1e-8});

  // Per-(domain, class) training pools and the pooled validation split.
  std::vector<double> val_rows;
  for (const auto& [id, part] : split.sources) {
    int pos = -1;
    for (std::size_t i = 0; i < ds.domains.size(); ++i) {
      if (ds.domains[i].domain_id == id) pos = static_cast<int>(i);
    }
    if (pos < 0) throw std::invalid_argument("Trainer: split references unknown domain");
    const auto& dom = ds.domains[static_cast<std::size_t>(pos)];
    for (int k = 0; k < ds.n_classes; ++k) {
      Cell cell;
      cell.domain_pos = pos;
      cell.domain_id = id;
      cell.cls = k;
      for (auto i : part.train) {
        if (dom.y[i] == k) cell.idx.push_back(i);
      }
      if (cell.idx.empty()) {
        throw std::invalid_argument(
            "Trainer: degenerate dataset, class " + std::to_string(k) +
            " missing from training split of domain " + std::to_string(id));
      }
      cells_.push_back(std::move(cell));
    }
    for (auto i : part.val) {
      for (std::size_t j = 0; j < ds.input_dim; ++j) {
        val_rows.push_back(dom.x[i * ds.input_dim + j]);
      }
      val_y_.push_back(dom.y[i]);
    }
  }
  if (val_y_.empty()) {
    throw std::invalid_argument("Trainer: validation split is empty");
  }
  val_x_ = ad::Tensor::from_data({val_y_.size(), ds.input_dim},
                                 std::move(val_rows));
}

Trainer::Batch Trainer::sample_batch() {
  const std::size_t n_cells = cells_.size();
  const std::size_t base = cfg_.batch_size / n_cells;
  const std::size_t rem = cfg_.batch_size % n_cells;

  std::vector<std::size_t> order(n_cells);
  for (std::size_t i = 0; i < n_cells; ++i) order[i] = i;
  batch_rng_.shuffle(order);
  std::vector<std::size_t> quota(n_cells, base);
  for (std::size_t i = 0; i < rem; ++i) quota[order[i]] += 1;

  Batch b;
  std::vector<double> rows;
  rows.reserve(cfg_.batch_size * ds_.input_dim);
  for (std::size_t c = 0; c < n_cells; ++c) {
    const auto& cell = cells_[c];
    const auto& dom = ds_.domains[static_cast<std::size_t>(cell.domain_pos)];
    for (std::size_t q = 0; q < quota[c]; ++q) {
      const std::size_t i = cell.idx[batch_rng_.index(cell.idx.size())];
      for (std::size_t j = 0; j < ds_.input_dim; ++j) {
        rows.push_back(dom.x[i * ds_.input_dim + j]);
      }
      b.labels.push_back(cell.cls);
      b.domains.push_back(domain_id_to_index_.at(cell.domain_id));
    }
  }
  const std::size_t n = b.labels.size();
  if (cfg_.instance_mixup) {
    // Classic input-space mixup: pair each row with a shuffled partner and
    // blend inputs and one-hot targets with gamma ~ Beta(alpha, alpha).
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    imix_rng_.shuffle(perm);
    const std::size_t d = ds_.input_dim;
    std::vector<double> mixed(rows.size());
    std::vector<double> targets(n * static_cast<std::size_t>(ds_.n_classes), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double g = imix_rng_.beta_symmetric(cfg_.alpha);
      const std::size_t p = perm[i];
      for (std::size_t j = 0; j < d; ++j) {
        mixed[i * d + j] = g * rows[i * d + j] + (1.0 - g) * rows[p * d + j];
      }
      targets[i * static_cast<std::size_t>(ds_.n_classes) +
              static_cast<std::size_t>(b.labels[i])] += g;
      targets[i * static_cast<std::size_t>(ds_.n_classes) +
              static_cast<std::size_t>(b.labels[p])] += 1.0 - g;
    }
    b.x = ad::Tensor::from_data({n, d}, std::move(mixed));
    b.targets = ad::Tensor::from_data(
        {n, static_cast<std::size_t>(ds_.n_classes)}, std::move(targets));
  } else {
    b.x = ad::Tensor::from_data({n, ds_.input_dim}, std::move(rows));
    b.targets = ad::onehot_rows(b.labels, ds_.n_classes);
  }
  return b;
}

TrainRecord Trainer::step() {
  const auto t0 = std::chrono::steady_clock::now();
  TrainRecord rec;
  rec.iter = ++iter_;

  Batch batch = sample_batch();
  const bool dist_on = cfg_.dist_loss && cfg_.beta > 0.0;
  const bool erm_path = !cfg_.augment && !dist_on;

  ad::Tensor l_ins, l_dis, total, real_logits;

  if (erm_path) {
    auto out = instance_loss(model_, batch.x, batch.targets, {});
    l_ins = out.loss;
    real_logits = out.real_logits;
    total = l_ins;
  } else {
    auto z = model_.encode(batch.x);
    auto [mu, sigma] = per_instance_stats(z, model_.stats);
    auto batch_cells = aggregate_by_cell(mu, sigma, batch.labels, batch.domains);
    bank_.momentum_update(batch_cells);

    const bool active = !cfg_.warmup || bank_.fully_initialized();
    if (active && dist_on && !kernel_ && bank_.n_initialized() >= 2) {
      kernel_ = KernelConfig::ladder(median_heuristic(bank_),
                                     cfg_.bandwidth_scales);
    }
    const bool dist_now = dist_on && active && kernel_.has_value();

    std::vector<AugmentedDistribution> aug_cells;
    std::vector<AugmentedDistribution> mixup_cells;
    std::vector<PseudoBatch> pseudos;
    if (active) {
      const auto universum = build_universum(bank_);
      std::map<std::pair<int, int>, const ConditionalGaussian*> fresh;
      for (const auto& cell : batch_cells) {
        fresh[{cell.domain, cell.cls}] = &cell;
      }
      // One generated distribution per initialized bank cell. The semantic
      // partner is the batch-fresh cell when the cell is present in this
      // batch (keeping the reparameterized gradient path alive) and the bank
      // entry otherwise.
      for (int d = 0; d < bank_.n_domains(); ++d) {
        for (int k = 0; k < bank_.n_classes(); ++k) {
          if (!bank_.initialized(d, k)) continue;
          auto it = fresh.find({d, k});
          const ConditionalGaussian& partner =
              it != fresh.end() ? *it->second : bank_.cell(d, k);
          aug_cells.push_back(
              universum_mix(universum, partner, cfg_.lambda_mix));
        }
      }
      if (dist_now && cfg_.dist_mixup) {
        auto cells = bank_.initialized_cells();
        if (cells.size() >= 2) {
          for (std::size_t i = 0; i < bank_.n_cells(); ++i) {
            const std::size_t a = gamma_rng_.index(cells.size());
            std::size_t b = gamma_rng_.index(cells.size() - 1);
            if (b >= a) ++b;
            const double gamma = gamma_rng_.beta_symmetric(cfg_.alpha);
            mixup_cells.push_back(distribution_mixup(
                *cells[a], *cells[b], gamma, ds_.n_classes));
          }
        }
      }
      if (dist_now) {
        l_dis = distribution_loss(batch_cells, aug_cells, mixup_cells, bank_,
                                  *kernel_, model_.head);
      }
      if (cfg_.augment && !aug_cells.empty()) {
        const std::size_t m =
            (cfg_.batch_size + aug_cells.size() - 1) / aug_cells.size();
        pseudos.reserve(aug_cells.size());
        for (const auto& aug : aug_cells) {
          pseudos.push_back(resample(aug, m, eps_rng_));
        }
      }
    }
    auto out = instance_loss(model_, batch.x, batch.targets, pseudos);
    l_ins = out.loss;
    real_logits = out.real_logits;
    total = l_dis.defined() ? ad::add(l_ins, ad::scale(l_dis, cfg_.beta))
                            : l_ins;
  }

  ad::backward(total);
  opt_->step();
  opt_->zero_grad();

  rec.l_ins = l_ins.item();
  rec.l_dis = l_dis.defined() ? l_dis.item() : 0.0;
  rec.l_total = total.item();
  rec.train_acc = accuracy(ad::argmax_rows(real_logits), batch.labels);
  rec.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  return rec;
}

double Trainer::validation_accuracy() const {
  return evaluate(model_, val_x_, val_y_);
}

FitResult Trainer::fit() {
  FitResult res;
  res.best_val_acc = validation_accuracy();
  res.best_iter = iter_;
  res.best = snapshot();
  double last_val = res.best_val_acc;
  for (std::size_t t = 0; t < cfg_.max_iters; ++t) {
    TrainRecord rec = step();
    const bool eval_now = (iter_ % static_cast<std::int64_t>(cfg_.eval_every)) == 0 ||
                          t + 1 == cfg_.max_iters;
    if (eval_now) {
      last_val = validation_accuracy();
      if (last_val > res.best_val_acc) {
        res.best_val_acc = last_val;
        res.best_iter = iter_;
        res.best = snapshot();
      }
    }
    rec.val_acc = last_val;
    res.log.push_back(rec);
  }
  return res;
}

TrainerSnapshot Trainer::snapshot() const {
  TrainerSnapshot snap;
  snap.model_cfg = model_cfg_;
  snap.model = model_.clone();
  snap.bank = bank_;
  snap.kernel = kernel_;
  snap.adam_step = opt_->step_count();
  snap.adam_m = opt_->m();
  snap.adam_v = opt_->v();
  snap.rng_states = {{"batch", batch_rng_.serialize()},
                     {"gamma", gamma_rng_.serialize()},
                     {"eps", eps_rng_.serialize()},
                     {"imix", imix_rng_.serialize()}};
  snap.iter = iter_;
  return snap;
}

void Trainer::restore(const TrainerSnapshot& snap) {
  if (snap.model_cfg.input_dim != model_cfg_.input_dim ||
      snap.model_cfg.n_classes != model_cfg_.n_classes ||
      snap.model_cfg.n_domains != model_cfg_.n_domains) {
    throw std::invalid_argument("Trainer::restore: incompatible model config");
  }
  model_ = snap.model.clone();
  bank_ = snap.bank;
  kernel_ = snap.kernel;
  opt_.emplace(model_.parameters(), ad::AdamConfig{cfg_.lr, 0.9, 0.999, 1e-8});
  opt_->restore(snap.adam_step, snap.adam_m, snap.adam_v);
  batch_rng_ = RandomStream::deserialize(snap.rng_states.at("batch"));
  gamma_rng_ = RandomStream::deserialize(snap.rng_states.at("gamma"));
  eps_rng_ = RandomStream::deserialize(snap.rng_states.at("eps"));
  imix_rng_ = RandomStream::deserialize(snap.rng_states.at("imix"));
  iter_ = snap.iter;
}

// ---- checkpoint io ----------------------------------------------------------

void save_checkpoint(const std::string& path, const TrainerSnapshot& snap) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
  const auto& mc = snap.model_cfg;
  os << "con2em-checkpoint v1\n";
  os << "model " << mc.input_dim << ' ' << mc.n_classes << ' ' << mc.n_domains
     << ' ' << mc.hidden_dim << ' ' << mc.latent_dim << ' ' << mc.stats_dim
     << '\n';
  os << "iter " << snap.iter << '\n';

  const auto named = named_parameters(snap.model);
  os << "params " << named.size() << '\n';
  for (const auto& [name, t] : named) {
    os << "param " << name << ' ' << t.rank();
    for (auto e : t.shape()) os << ' ' << e;
    os << '\n';
    write_doubles(os, t.data());
  }

  const auto& bank = snap.bank;
  os << "bank " << bank.n_domains() << ' ' << bank.n_classes() << ' '
     << bank.stats_dim() << ' ' << fmt_double(bank.rho()) << '\n';
  for (int d = 0; d < bank.n_domains(); ++d) {
    for (int k = 0; k < bank.n_classes(); ++k) {
      os << "bankcell " << d << ' ' << k << ' '
         << (bank.initialized(d, k) ? 1 : 0) << '\n';
      if (bank.initialized(d, k)) {
        write_doubles(os, bank.cell(d, k).mu.data());
        write_doubles(os, bank.cell(d, k).sigma.data());
      }
    }
  }

  if (snap.kernel) {
    os << "kernel " << snap.kernel->bandwidths.size() << '\n';
    write_doubles(os, snap.kernel->bandwidths);
  } else {
    os << "kernel 0\n";
  }

  os << "adam " << snap.adam_step << ' ' << snap.adam_m.size() << '\n';
  for (std::size_t i = 0; i < snap.adam_m.size(); ++i) {
    os << "adam_mv " << snap.adam_m[i].size() << '\n';
    write_doubles(os, snap.adam_m[i]);
    write_doubles(os, snap.adam_v[i]);
  }

  os << "rngs " << snap.rng_states.size() << '\n';
  for (const auto& [name, state] : snap.rng_states) {
    os << "rng " << name << '\n' << state << '\n';
  }
  os << "end\n";
}

TrainerSnapshot load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::string line, tok;
  if (!std::getline(is, line) || line != "con2em-checkpoint v1") {
    throw std::runtime_error("load_checkpoint: bad version header");
  }
  TrainerSnapshot snap;
  auto& mc = snap.model_cfg;
  is >> tok >> mc.input_dim >> mc.n_classes >> mc.n_domains >> mc.hidden_dim >>
      mc.latent_dim >> mc.stats_dim;
  if (tok != "model") throw std::runtime_error("load_checkpoint: missing model line");
  is >> tok >> snap.iter;
  if (tok != "iter") throw std::runtime_error("load_checkpoint: missing iter line");

  std::size_t n_params = 0;
  is >> tok >> n_params;
  if (tok != "params") throw std::runtime_error("load_checkpoint: missing params");
  std::map<std::string, ad::Tensor> by_name;
  for (std::size_t p = 0; p < n_params; ++p) {
    std::string name;
    std::size_t rank = 0;
    is >> tok >> name >> rank;
    if (tok != "param") throw std::runtime_error("load_checkpoint: missing param");
    ad::Shape shape(rank);
    for (auto& e : shape) is >> e;
    auto vals = parse_doubles(is, ad::shape_numel(shape));
    by_name.emplace(name, ad::Tensor::from_data(shape, std::move(vals), true));
  }
  auto take = [&](const std::string& name) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw std::runtime_error("load_checkpoint: missing parameter " + name);
    }
    return it->second;
  };
  auto affine = [&](const std::string& prefix) {
    Affine a;
    a.weight = take(prefix + ".weight");
    a.bias = take(prefix + ".bias");
    return a;
  };
  snap.model.cfg = mc;
  snap.model.enc1 = affine("enc1");
  snap.model.enc2 = affine("enc2");
  snap.model.enc3 = affine("enc3");
  snap.model.cls = affine("cls");
  snap.model.stats.fc_mu = affine("stats.fc_mu");
  snap.model.stats.fc_logvar = affine("stats.fc_logvar");
  snap.model.head = affine("head");
  if (by_name.count("adapter.weight")) snap.model.adapter = affine("adapter");

  int nd = 0, nk = 0;
  std::size_t sd = 0;
  std::string rho_text;
  is >> tok >> nd >> nk >> sd >> rho_text;
  if (tok != "bank") throw std::runtime_error("load_checkpoint: missing bank");
  snap.bank = StatsBank(nd, nk, sd, parse_double(rho_text));
  for (int i = 0; i < nd * nk; ++i) {
    int d = 0, k = 0, init = 0;
    is >> tok >> d >> k >> init;
    if (tok != "bankcell") throw std::runtime_error("load_checkpoint: missing bankcell");
    if (init) {
      ConditionalGaussian g;
      g.domain = d;
      g.cls = k;
      g.mu = ad::Tensor::from_data({sd}, parse_doubles(is, sd));
      g.sigma = ad::Tensor::from_data({sd}, parse_doubles(is, sd));
      snap.bank.set_cell(d, k, std::move(g));
    }
  }

  std::size_t n_bw = 0;
  is >> tok >> n_bw;
  if (tok != "kernel") throw std::runtime_error("load_checkpoint: missing kernel");
  if (n_bw > 0) {
    KernelConfig kc;
    kc.bandwidths = parse_doubles(is, n_bw);
    kc.validate();
    snap.kernel = std::move(kc);
  }

  std::size_t n_mv = 0;
  is >> tok >> snap.adam_step >> n_mv;
  if (tok != "adam") throw std::runtime_error("load_checkpoint: missing adam");
  for (std::size_t i = 0; i < n_mv; ++i) {
    std::size_t len = 0;
    is >> tok >> len;
    if (tok != "adam_mv") throw std::runtime_error("load_checkpoint: missing adam_mv");
    snap.adam_m.push_back(parse_doubles(is, len));
    snap.adam_v.push_back(parse_doubles(is, len));
  }

  std::size_t n_rng = 0;
  is >> tok >> n_rng;
  if (tok != "rngs") throw std::runtime_error("load_checkpoint: missing rngs");
  std::getline(is, line);  // consume end of count line
  for (std::size_t i = 0; i < n_rng; ++i) {
    std::getline(is, line);
    if (line.rfind("rng ", 0) != 0) {
      throw std::runtime_error("load_checkpoint: missing rng entry");
    }
    const std::string name = line.substr(4);
    std::string state;
    std::getline(is, state);
    snap.rng_states[name] = state;
  }
  return snap;
}

}  // namespace con2em
