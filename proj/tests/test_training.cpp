#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "con2em/data.hpp"
#include "con2em/train.hpp"
#include "test_util.hpp"

using namespace con2em;
using ad::Tensor;

namespace {

void zero_params(EncoderModel& m) {
  for (auto& p : m.parameters()) {
    for (auto& v : p.mutable_data()) v = 0.0;
  }
}

EncoderModel tiny_model(std::size_t input_dim, std::size_t n_classes,
                        std::size_t n_domains, std::uint64_t seed = 9) {
  ModelConfig mc;
  mc.input_dim = input_dim;
  mc.n_classes = n_classes;
  mc.n_domains = n_domains;
  mc.hidden_dim = 4;
  mc.latent_dim = 3;
  mc.stats_dim = 3;
  RandomStream rng(seed, 1);
  return EncoderModel::init(mc, rng);
}

std::string file_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

ConditionalGaussian cg(std::vector<double> mu, std::vector<double> sigma,
                       int d, int k) {
  ConditionalGaussian g;
  const std::size_t s = mu.size();
  g.mu = Tensor::from_data({s}, std::move(mu));
  g.sigma = Tensor::from_data({s}, std::move(sigma));
  g.domain = d;
  g.cls = k;
  return g;
}

}  // namespace

TEST_CASE("instance_loss: uniform logits give ln|Y| per term") {
  auto model = tiny_model(2, 7, 2);
  zero_params(model);
  auto x = Tensor::from_data({3, 2}, {1, 2, -1, 0.5, 0, 0});
  std::vector<int> y{0, 3, 6};
  auto out = instance_loss(model, x, ad::onehot_rows(y, 7), {});
  CHECK(out.loss.item() == doctest::Approx(std::log(7.0)).epsilon(1e-12));

  // A pseudo batch of the same size doubles the loss under the shared
  // normalizer.
  PseudoBatch pb;
  pb.latents = Tensor::from_data({3, 3}, {0.1, 0, 0, 0, 0.2, 0, 0, 0, 0.3});
  pb.label = 2;
  std::vector<PseudoBatch> pseudo{pb};
  auto with = instance_loss(model, x, ad::onehot_rows(y, 7), pseudo);
  CHECK(with.loss.item() == doctest::Approx(2.0 * std::log(7.0)).epsilon(1e-12));
}

TEST_CASE("instance_loss: empty pseudo batch reduces to plain ERM loss") {
  RandomStream rng(31, 2);
  auto model = tiny_model(2, 3, 2, 77);
  auto x = Tensor::from_data({4, 2}, rng.normals(8));
  std::vector<int> y{0, 1, 2, 1};
  auto targets = ad::onehot_rows(y, 3);
  auto erm = instance_loss(model, x, targets, {});
  auto manual = ad::softmax_cross_entropy(
      model.class_logits(model.encode(x)), targets);
  CHECK(erm.loss.item() == manual.item());
}

TEST_CASE("instance_loss: two-instance batch matches a scalar-loop oracle") {
  auto model = tiny_model(2, 2, 2, 5);
  auto x = Tensor::from_data({2, 2}, {0.7, -1.1, 0.2, 0.9});
  std::vector<int> y{1, 0};
  PseudoBatch pb;
  pb.latents = Tensor::from_data({1, 3}, {0.25, -0.5, 0.4});
  pb.label = 1;
  std::vector<PseudoBatch> pseudo{pb};
  auto out = instance_loss(model, x, ad::onehot_rows(y, 2), pseudo);

  // Oracle: recompute CLS(E(x)) and the cross-entropies with plain loops.
  auto ce_rows = [&](const Tensor& logits, const std::vector<int>& labels) {
    const std::size_t b = logits.shape()[0], c = logits.shape()[1];
    double total = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
      double mx = logits.at(i, 0);
      for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, logits.at(i, j));
      double z = 0.0;
      for (std::size_t j = 0; j < c; ++j) z += std::exp(logits.at(i, j) - mx);
      const double lse = mx + std::log(z);
      double dot = logits.at(i, static_cast<std::size_t>(labels[i]));
      total += lse - dot;
    }
    return total / static_cast<double>(b);
  };
  const double real_ce = ce_rows(model.class_logits(model.encode(x)), y);
  const double pseudo_ce =
      ce_rows(model.class_logits(model.adapt(pb.latents)), {1});
  const double expected = real_ce + pseudo_ce * (1.0 / 2.0);
  CHECK(out.loss.item() == expected);
}

TEST_CASE("distribution_loss: zeroed head yields ln|Y| per present term") {
  StatsBank bank(2, 2, 2, 0.95);
  std::vector<ConditionalGaussian> cells{
      cg({0, 0}, {1, 1}, 0, 0), cg({2, 0}, {1, 1}, 0, 1),
      cg({0, 2}, {1, 1}, 1, 0), cg({2, 2}, {1, 1}, 1, 1)};
  bank.momentum_update(cells);
  auto cfg = KernelConfig::ladder(1.0);
  ProjectionHead head;
  head.weight = Tensor::zeros({4, 2}, true);
  head.bias = Tensor::zeros({2}, true);

  const double ln2 = std::log(2.0);
  auto l_obs = distribution_loss(cells, {}, {}, bank, cfg, head);
  CHECK(l_obs.item() == doctest::Approx(ln2).epsilon(1e-12));

  std::vector<AugmentedDistribution> augs;
  auto u = build_universum(bank);
  for (const auto& c : cells) augs.push_back(universum_mix(u, c, 0.5));
  auto l_aug = distribution_loss({}, augs, {}, bank, cfg, head);
  CHECK(l_aug.item() == doctest::Approx(ln2).epsilon(1e-12));

  std::vector<AugmentedDistribution> mix{
      distribution_mixup(cells[0], cells[1], 0.3, 2),
      distribution_mixup(cells[2], cells[3], 0.7, 2),
      distribution_mixup(cells[0], cells[3], 0.5, 2),
      distribution_mixup(cells[1], cells[2], 0.9, 2)};
  auto l_mix = distribution_loss({}, {}, mix, bank, cfg, head);
  CHECK(l_mix.item() == doctest::Approx(ln2).epsilon(1e-12));

  // Without the mixup term the loss is exactly the first two terms
  // (the Table-IV style "w/o P-hat^aug" ablation).
  auto l_two = distribution_loss(cells, augs, {}, bank, cfg, head);
  auto l_all = distribution_loss(cells, augs, mix, bank, cfg, head);
  CHECK(l_two.item() == doctest::Approx(2.0 * ln2).epsilon(1e-12));
  CHECK(l_all.item() == doctest::Approx(3.0 * ln2).epsilon(1e-12));
}

TEST_CASE("distribution_loss: hand case matches a term-by-term loop oracle") {
  RandomStream rng(17, 6);
  StatsBank bank(2, 2, 3, 0.95);
  std::vector<ConditionalGaussian> cells;
  for (int d = 0; d < 2; ++d) {
    for (int k = 0; k < 2; ++k) {
      auto mu = rng.normals(3);
      auto sv = rng.normals(3);
      for (auto& v : sv) v = std::abs(v) + 0.2;
      cells.push_back(cg(mu, sv, d, k));
    }
  }
  bank.momentum_update(cells);
  auto cfg = KernelConfig::ladder(0.7);
  RandomStream hrng(18, 6);
  ProjectionHead head = Affine::init(4, 2, hrng);

  auto u = build_universum(bank);
  std::vector<AugmentedDistribution> augs;
  for (const auto& c : cells) augs.push_back(universum_mix(u, c, 0.5));
  std::vector<AugmentedDistribution> mix{
      distribution_mixup(cells[0], cells[3], 0.25, 2),
      distribution_mixup(cells[1], cells[2], 0.6, 2),
      distribution_mixup(cells[0], cells[2], 0.4, 2),
      distribution_mixup(cells[3], cells[1], 0.85, 2)};

  auto loss = distribution_loss(cells, augs, mix, bank, cfg, head);

  // Loop oracle: embedding entries, affine head, stable softmax CE, the
  // 1/(N|Y|) normalizer, term by term.
  auto embed_one = [&](const ConditionalGaussian& p) {
    std::vector<double> e(4, 0.0);
    for (int d = 0; d < 2; ++d) {
      for (int k = 0; k < 2; ++k) {
        const auto& c = bank.cell(d, k);
        double dmu2 = 0.0, ds2 = 0.0;
        for (std::size_t j = 0; j < 3; ++j) {
          const double dm = c.mu.at(j) - p.mu.at(j);
          dmu2 += dm * dm;
        }
        for (std::size_t j = 0; j < 3; ++j) {
          const double dsg = c.sigma.at(j) - p.sigma.at(j);
          ds2 += dsg * dsg;
        }
        const double d2 = dmu2 + ds2;
        double acc = 0.0;
        for (double h : cfg.bandwidths) acc += std::exp(d2 * (-1.0 / h));
        e[bank.flat_index(d, k)] = acc;
      }
    }
    return e;
  };
  auto logits_of = [&](const ConditionalGaussian& p) {
    auto e = embed_one(p);
    std::vector<double> out(2, 0.0);
    for (std::size_t j = 0; j < 2; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < 4; ++i) {
        acc += e[i] * head.weight.at(i, j);
      }
      out[j] = acc + head.bias.at(j);
    }
    return out;
  };
  auto ce_soft = [&](const std::vector<double>& logits,
                     const std::vector<double>& target) {
    double mx = std::max(logits[0], logits[1]);
    double z = std::exp(logits[0] - mx) + std::exp(logits[1] - mx);
    const double lse = mx + std::log(z);
    double dot = 0.0;
    for (std::size_t j = 0; j < 2; ++j) dot += target[j] * logits[j];
    return lse - dot;
  };
  double expected = 0.0;
  {
    double t1 = 0.0;
    for (const auto& c : cells) {
      std::vector<double> target{c.cls == 0 ? 1.0 : 0.0, c.cls == 1 ? 1.0 : 0.0};
      t1 += ce_soft(logits_of(c), target);
    }
    t1 /= 4.0;
    expected = expected + t1 * (4.0 / 4.0);
  }
  {
    double t2 = 0.0;
    for (const auto& a : augs) {
      std::vector<double> target{a.label == 0 ? 1.0 : 0.0,
                                 a.label == 1 ? 1.0 : 0.0};
      t2 += ce_soft(logits_of(a.gaussian), target);
    }
    t2 /= 4.0;
    expected = expected + t2 * (4.0 / 4.0);
  }
  {
    double t3 = 0.0;
    for (const auto& m : mix) {
      t3 += ce_soft(logits_of(m.gaussian), m.soft_label);
    }
    t3 /= 4.0;
    expected = expected + t3 * (4.0 / 4.0);
  }
  CHECK(loss.item() == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("train_step: beta=0 with augmentation off matches ERM bit-exactly") {
  auto ds = gen_rotated_moons({0, 20, 40}, 90, 0.15, 4);
  auto plan = split_lodo(ds, 2, 3);
  TrainConfig erm;
  erm.lr = 2e-3;
  erm.seed = 11;
  erm.augment = false;
  erm.dist_loss = false;
  erm.dist_mixup = false;
  erm.beta = 0.0;
  TrainConfig degen = erm;
  degen.dist_loss = true;   // con2em config with beta forced to 0
  degen.dist_mixup = true;
  degen.beta = 0.0;
  degen.augment = false;

  Trainer a(ds, plan, erm);
  Trainer b(ds, plan, degen);
  for (int i = 0; i < 30; ++i) {
    auto ra = a.step();
    auto rb = b.step();
    CHECK(ra.l_ins == rb.l_ins);
    CHECK(ra.l_dis == rb.l_dis);
    CHECK(ra.l_total == rb.l_total);
    CHECK(ra.train_acc == rb.train_acc);
  }
  auto pa = a.model().parameters();
  auto pb = b.model().parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    REQUIRE(pa[i].size() == pb[i].size());
    for (std::size_t j = 0; j < pa[i].size(); ++j) {
      CHECK(pa[i].at(j) == pb[i].at(j));
    }
  }
}

TEST_CASE("train_step: recorded total equals l_ins + beta * l_dis") {
  auto ds = gen_shifted_blobs(3, 2, 60, 2, 3.0, 8);
  auto plan = split_lodo(ds, 2, 2);
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.seed = 21;
  Trainer t(ds, plan, cfg);
  for (int i = 0; i < 25; ++i) {
    auto rec = t.step();
    CHECK(std::abs(rec.l_total - (rec.l_ins + cfg.beta * rec.l_dis)) <= 1e-12);
  }
}

TEST_CASE("train_step: ten-step golden trajectory on shifted blobs") {
  auto ds = gen_shifted_blobs(3, 2, 50, 2, 3.0, 42);
  auto plan = split_lodo(ds, 2, 5);
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.max_iters = 10;
  cfg.eval_every = 5;
  cfg.seed = 2024;
  Trainer t(ds, plan, cfg);
  const std::vector<std::array<double, 3>> golden{
      {1.8117402907485842, 6.5280857570398378, 1.8770211483189827},
      {1.9755011008177954, 6.6227367481031081, 2.0417284682988264},
      {1.6429943908168387, 8.6505122876691214, 1.7294995136935301},
      {1.7460239611454118, 5.8443751602955736, 1.8044677127483675},
      {1.8487430027591771, 5.678777494412973, 1.9055307777033068},
      {1.4520307809446105, 3.7579868236459708, 1.4896106491810701},
      {1.494066859752212, 3.5815749749643531, 1.5298826095018556},
      {1.3590220996100579, 5.0816642939638452, 1.4098387425496963},
      {1.3921820579385447, 6.8001085074854508, 1.4601831430133991},
      {1.4140573576445314, 6.7204847140137662, 1.4812622047846691},
  };
  for (const auto& g : golden) {
    auto rec = t.step();
    CHECK(std::abs(rec.l_ins - g[0]) < 1e-9);
    CHECK(std::abs(rec.l_dis - g[1]) < 1e-9);
    CHECK(std::abs(rec.l_total - g[2]) < 1e-9);
  }
}

TEST_CASE("fit: T=0 returns the initialized model and an empty log") {
  auto ds = gen_shifted_blobs(3, 2, 30, 2, 2.0, 6);
  auto plan = split_lodo(ds, 2, 1);
  TrainConfig cfg;
  cfg.max_iters = 0;
  cfg.seed = 33;
  Trainer t(ds, plan, cfg);
  auto res = t.fit();
  CHECK(res.log.empty());
  CHECK(res.best_iter == 0);

  Trainer fresh(ds, plan, cfg);
  auto pa = res.best.model.parameters();
  auto pb = fresh.model().parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    for (std::size_t j = 0; j < pa[i].size(); ++j) {
      CHECK(pa[i].at(j) == pb[i].at(j));
    }
  }
}

TEST_CASE("fit: ERM reaches high validation accuracy on separable blobs") {
  auto ds = gen_shifted_blobs(3, 3, 80, 2, 0.5, 12);
  auto plan = split_lodo(ds, 2, 7);
  TrainConfig cfg;
  cfg.lr = 5e-3;
  cfg.max_iters = 500;
  cfg.eval_every = 50;
  cfg.seed = 3;
  cfg.augment = false;
  cfg.dist_loss = false;
  cfg.beta = 0.0;
  Trainer t(ds, plan, cfg);
  auto res = t.fit();
  CHECK(res.best_val_acc > 0.95);
}

TEST_CASE("fit: ERM generalization gap exists on rotated moons") {
  auto ds = gen_rotated_moons({0, 15, 30, 45}, 200, 0.18, 9);
  auto plan = split_lodo(ds, 3, 2);
  TrainConfig cfg;
  cfg.lr = 3e-3;
  cfg.max_iters = 500;
  cfg.eval_every = 50;
  cfg.seed = 5;
  cfg.augment = false;
  cfg.dist_loss = false;
  cfg.beta = 0.0;
  Trainer t(ds, plan, cfg);
  auto res = t.fit();
  const auto& target = ds.domain(3);
  const double target_acc =
      evaluate(res.best.model, domain_tensor(target, ds.input_dim), target.y);
  CHECK(res.best_val_acc > target_acc);
}

TEST_CASE("checkpoint round trip: bit-exact logits and byte-stable re-save") {
  auto ds = gen_shifted_blobs(3, 2, 60, 2, 3.0, 77);
  auto plan = split_lodo(ds, 2, 4);
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.max_iters = 40;
  cfg.eval_every = 10;
  cfg.seed = 13;
  Trainer t(ds, plan, cfg);
  auto res = t.fit();

  const std::string p1 = "ckpt_roundtrip_1.txt";
  const std::string p2 = "ckpt_roundtrip_2.txt";
  save_checkpoint(p1, res.best);
  auto back = load_checkpoint(p1);
  save_checkpoint(p2, back);
  CHECK(file_bytes(p1) == file_bytes(p2));

  const auto& target = ds.domain(2);
  auto x = domain_tensor(target, ds.input_dim);
  auto before = res.best.model.class_logits(res.best.model.encode(x));
  auto after = back.model.class_logits(back.model.encode(x));
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(before.at(i) == after.at(i));
  }
  CHECK(evaluate(res.best.model, x, target.y) ==
        evaluate(back.model, x, target.y));

  CHECK(back.bank.n_initialized() == res.best.bank.n_initialized());
  REQUIRE(back.kernel.has_value() == res.best.kernel.has_value());
  if (back.kernel) {
    CHECK(back.kernel->bandwidths == res.best.kernel->bandwidths);
  }
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("fit is deterministic: identical checkpoints across runs") {
  auto ds = gen_rotated_moons({0, 25, 50}, 80, 0.15, 3);
  auto plan = split_lodo(ds, 2, 1);
  TrainConfig cfg;
  cfg.lr = 2e-3;
  cfg.max_iters = 35;
  cfg.eval_every = 10;
  cfg.seed = 19;

  auto run = [&]() {
    Trainer t(ds, plan, cfg);
    return t.fit();
  };
  auto r1 = run();
  auto r2 = run();
  REQUIRE(r1.log.size() == r2.log.size());
  for (std::size_t i = 0; i < r1.log.size(); ++i) {
    CHECK(r1.log[i].l_total == r2.log[i].l_total);
    CHECK(r1.log[i].l_ins == r2.log[i].l_ins);
    CHECK(r1.log[i].l_dis == r2.log[i].l_dis);
  }
  const std::string p1 = "ckpt_det_1.txt", p2 = "ckpt_det_2.txt";
  save_checkpoint(p1, r1.best);
  save_checkpoint(p2, r2.best);
  CHECK(file_bytes(p1) == file_bytes(p2));
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("evaluate: hand-built sign model is perfect, ties go to class 0") {
  ModelConfig mc;
  mc.input_dim = 1;
  mc.n_classes = 2;
  mc.n_domains = 2;
  mc.hidden_dim = 2;
  mc.latent_dim = 1;
  mc.stats_dim = 1;
  RandomStream rng(1, 1);
  auto model = EncoderModel::init(mc, rng);
  // enc1: h = [x, -x]; enc2: identity; enc3: z = relu(x) - relu(-x) = x;
  // cls: logits = [-z, z].
  model.enc1.weight = Tensor::from_data({1, 2}, {1, -1}, true);
  model.enc1.bias = Tensor::zeros({2}, true);
  model.enc2.weight = Tensor::from_data({2, 2}, {1, 0, 0, 1}, true);
  model.enc2.bias = Tensor::zeros({2}, true);
  model.enc3.weight = Tensor::from_data({2, 1}, {1, -1}, true);
  model.enc3.bias = Tensor::zeros({1}, true);
  model.cls.weight = Tensor::from_data({1, 2}, {-1, 1}, true);
  model.cls.bias = Tensor::zeros({2}, true);

  std::vector<double> xs{-3, -2, -1, -0.5, -4, 1, 2, 3, 0.5, 4};
  std::vector<int> ys;
  for (double v : xs) ys.push_back(v > 0 ? 1 : 0);
  auto x = Tensor::from_data({10, 1}, xs);
  CHECK(evaluate(model, x, ys) == 1.0);

  // Constant logits: every argmax ties and resolves to class 0.
  zero_params(model);
  std::vector<int> balanced{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
  CHECK(evaluate(model, x, balanced) == 0.5);

  CHECK_THROWS_AS(evaluate(model, Tensor::zeros({0, 1}), std::vector<int>{}),
                  std::invalid_argument);
}

TEST_CASE("losses and parameters stay finite across generators and seeds") {
  std::vector<DomainDataset> datasets;
  datasets.push_back(gen_shifted_blobs(3, 2, 40, 2, 4.0, 1));
  datasets.push_back(gen_rotated_moons({0, 20, 40}, 60, 0.2, 2));
  datasets.push_back(gen_correlation_flip({0.9, 0.8, -0.9}, 60, 3));
  for (const auto& ds : datasets) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto plan = split_lodo(ds, ds.n_domains() - 1, seed);
      TrainConfig cfg;
      cfg.lr = 2e-3;
      cfg.max_iters = 0;
      cfg.seed = seed;
      Trainer t(ds, plan, cfg);
      for (int i = 0; i < 40; ++i) {
        auto rec = t.step();
        REQUIRE(std::isfinite(rec.l_ins));
        REQUIRE(std::isfinite(rec.l_dis));
        REQUIRE(std::isfinite(rec.l_total));
      }
      for (const auto& p : t.model().parameters()) {
        for (double v : p.data()) REQUIRE(std::isfinite(v));
      }
    }
  }
}
