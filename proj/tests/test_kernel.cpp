#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "con2em/adam.hpp"
#include "con2em/kernel.hpp"
#include "con2em/rng.hpp"
#include "test_util.hpp"

using namespace con2em;
using ad::Tensor;

using testutil::embed_oracle;
using testutil::make_cg;
using testutil::random_bank;
using testutil::random_cg;

TEST_CASE("wasserstein2_sq closed form") {
  auto p = make_cg({1, 0}, {1, 1});
  auto q = make_cg({0, 0}, {1, 1});
  CHECK(wasserstein2_sq(p, p).item() == 0.0);
  CHECK(wasserstein2_sq(p, q).item() == 1.0);

  auto a = make_cg({2}, {1});
  auto b = make_cg({2}, {3});
  CHECK(wasserstein2_sq(a, b).item() == 4.0);

  CHECK_THROWS_AS(wasserstein2_sq(p, a), std::invalid_argument);
}

TEST_CASE("sqrt of wasserstein2_sq is a metric on random triples") {
  RandomStream rng(101, 7);
  for (int trial = 0; trial < 2000; ++trial) {
    auto p = random_cg(3, rng);
    auto q = random_cg(3, rng);
    auto r = random_cg(3, rng);
    const double dpq = std::sqrt(wasserstein2_sq(p, q).item());
    const double dqp = std::sqrt(wasserstein2_sq(q, p).item());
    const double dpr = std::sqrt(wasserstein2_sq(p, r).item());
    const double dqr = std::sqrt(wasserstein2_sq(q, r).item());
    CHECK(dpq >= 0.0);
    CHECK(std::abs(dpq - dqp) <= 1e-9);
    CHECK(std::sqrt(wasserstein2_sq(p, p).item()) == 0.0);
    CHECK(dpr <= dpq + dqr + 1e-9);
  }
}

TEST_CASE("embed: coincident cell and unit-distance values") {
  RandomStream rng(5, 1);
  StatsBank bank(1, 2, 2, 0.95);
  auto c0 = make_cg({0, 0}, {1, 1}, 0, 0);
  auto c1 = make_cg({10, 0}, {1, 1}, 0, 1);
  bank.momentum_update(std::vector<ConditionalGaussian>{c0, c1});

  KernelConfig cfg;
  cfg.bandwidths = {1.0, 2.0};
  auto e = embed(c0, bank, cfg);
  CHECK(e.at(0) == 2.0);  // exp(0) + exp(0)

  KernelConfig single;
  single.bandwidths = {1.0};
  auto p = make_cg({1, 0}, {1, 1});  // D^2 = 1 to cell (0,0)
  auto e2 = embed(p, bank, single);
  CHECK(e2.at(0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));

  KernelConfig empty;
  CHECK_THROWS_AS(embed(c0, bank, empty), std::invalid_argument);
}

TEST_CASE("embed matches the brute-force loop oracle exactly") {
  RandomStream rng(17, 3);
  for (int trial = 0; trial < 100; ++trial) {
    const bool full = trial % 2 == 0;
    auto bank = random_bank(2, 3, 4, rng, full);
    if (bank.n_initialized() == 0) continue;
    auto cfg = KernelConfig::ladder(rng.uniform(0.2, 3.0));
    auto p = random_cg(4, rng);
    auto e = embed(p, bank, cfg);
    auto oracle = embed_oracle(p, bank, cfg);
    REQUIRE(e.size() == oracle.size());
    for (std::size_t i = 0; i < oracle.size(); ++i) {
      CHECK(e.at(i) == oracle[i]);
    }
  }
}

TEST_CASE("embed bounds and monotonicity") {
  RandomStream rng(23, 5);
  auto bank = random_bank(2, 2, 3, rng);
  auto cfg = KernelConfig::ladder(1.0);
  const double nbw = static_cast<double>(cfg.bandwidths.size());

  // Bounds: entries in [0, |bandwidths|], the max attained only at
  // coincidence.
  for (int trial = 0; trial < 200; ++trial) {
    auto p = random_cg(3, rng);
    auto e = embed(p, bank, cfg);
    for (std::size_t i = 0; i < e.size(); ++i) {
      CHECK(e.at(i) >= 0.0);
      CHECK(e.at(i) <= nbw);
      CHECK(e.at(i) < nbw);  // random p never coincides
    }
  }
  auto coincide = bank.cell(1, 1).detached();
  auto e = embed(coincide, bank, cfg);
  CHECK(e.at(bank.flat_index(1, 1)) == nbw);

  // Monotonicity: moving p further from one reference cell strictly
  // decreases that entry.
  const auto base = bank.cell(0, 0).detached();
  double prev = nbw;
  for (int step = 1; step <= 10; ++step) {
    auto p = base.detached();
    auto data = p.mu.mutable_data();
    data[0] += 0.25 * step;
    const double entry = embed(p, bank, cfg).at(bank.flat_index(0, 0));
    CHECK(entry < prev);
    prev = entry;
  }
}

TEST_CASE("embed gradient w.r.t. p matches finite differences") {
  RandomStream rng(29, 6);
  auto bank = random_bank(2, 2, 3, rng);
  auto cfg = KernelConfig::ladder(0.8);
  auto mu = Tensor::from_data({3}, rng.normals(3), true);
  auto sv = rng.normals(3);
  for (auto& v : sv) v = std::abs(v) + 0.2;
  auto sigma = Tensor::from_data({3}, sv, true);
  auto build = [&]() {
    ConditionalGaussian p;
    p.mu = mu;
    p.sigma = sigma;
    return ad::sum(ad::square(embed(p, bank, cfg)));
  };
  auto res = testutil::check_gradients(build, {mu, sigma});
  CHECK_MESSAGE(res.ok, res.detail);
  CHECK(res.worst_rel < 1e-4);
}

TEST_CASE("classify_distribution: zero head and selector head") {
  RandomStream rng(31, 8);
  auto bank = random_bank(2, 2, 3, rng);
  auto cfg = KernelConfig::ladder(1.0);
  auto p = random_cg(3, rng);

  ProjectionHead zero;
  zero.weight = Tensor::zeros({4, 2}, true);
  zero.bias = Tensor::from_data({2}, {0.7, -0.3}, true);
  auto logits = classify_distribution(p, bank, cfg, zero);
  CHECK(logits.at(0) == 0.7);
  CHECK(logits.at(1) == -0.3);

  // One-hot row selector: logit_k picks out embedding entry k.
  ProjectionHead sel;
  std::vector<double> w(4 * 2, 0.0);
  w[0 * 2 + 0] = 1.0;  // logit 0 <- embedding entry 0
  w[3 * 2 + 1] = 1.0;  // logit 1 <- embedding entry 3
  sel.weight = Tensor::from_data({4, 2}, std::move(w), true);
  sel.bias = Tensor::zeros({2}, true);
  auto e = embed(p, bank, cfg);
  auto picked = classify_distribution(p, bank, cfg, sel);
  CHECK(picked.at(0) == e.at(0));
  CHECK(picked.at(1) == e.at(3));

  ProjectionHead bad;
  bad.weight = Tensor::zeros({3, 2}, true);
  bad.bias = Tensor::zeros({2}, true);
  CHECK_THROWS_AS(classify_distribution(p, bank, cfg, bad),
                  std::invalid_argument);
}

TEST_CASE("classify_distribution separates well-separated cells after training") {
  RandomStream rng(37, 9);
  // One domain, three classes far apart in stats space.
  StatsBank bank(1, 3, 2, 0.95);
  std::vector<ConditionalGaussian> cells{make_cg({0, 0}, {1, 1}, 0, 0),
                                         make_cg({6, 0}, {1, 1}, 0, 1),
                                         make_cg({0, 6}, {1, 1}, 0, 2)};
  bank.momentum_update(cells);
  auto cfg = KernelConfig::ladder(median_heuristic(bank));

  ProjectionHead head = Affine::init(3, 3, rng);
  ad::Adam opt({head.weight, head.bias}, {.lr = 0.05});
  auto perturbed = [&](int k, RandomStream& r) {
    auto g = bank.cell(0, k).detached();
    auto d = g.mu.mutable_data();
    for (auto& v : d) v += 0.4 * r.normal();
    return g;
  };
  for (int it = 0; it < 300; ++it) {
    const int k = static_cast<int>(rng.index(3));
    auto p = perturbed(k, rng);
    auto logits = classify_distribution(p, bank, cfg, head);
    std::vector<int> label{k};
    auto losses = ad::softmax_cross_entropy(ad::reshape(logits, {1, 3}),
                                            ad::onehot_rows(label, 3));
    opt.zero_grad();
    ad::backward(losses);
    opt.step();
  }
  RandomStream eval_rng(41, 10);
  int hits = 0;
  const int n_eval = 200;
  for (int t = 0; t < n_eval; ++t) {
    const int k = static_cast<int>(eval_rng.index(3));
    auto p = perturbed(k, eval_rng);
    auto logits = classify_distribution(p, bank, cfg, head);
    int best = 0;
    for (int j = 1; j < 3; ++j) {
      if (logits.at(static_cast<std::size_t>(j)) >
          logits.at(static_cast<std::size_t>(best))) {
        best = j;
      }
    }
    if (best == k) ++hits;
  }
  CHECK(static_cast<double>(hits) / n_eval >= 0.95);
}

TEST_CASE("median_heuristic") {
  StatsBank two(1, 2, 1, 0.95);
  two.momentum_update(std::vector<ConditionalGaussian>{
      make_cg({0}, {1}, 0, 0), make_cg({2}, {1}, 0, 1)});
  CHECK(median_heuristic(two) == 4.0);  // single pair

  StatsBank three(1, 3, 1, 0.95);
  three.momentum_update(std::vector<ConditionalGaussian>{
      make_cg({0}, {1}, 0, 0), make_cg({1}, {1}, 0, 1),
      make_cg({3}, {1}, 0, 2)});
  // pairwise D^2 = {1, 9, 4} -> median 4
  CHECK(median_heuristic(three) == 4.0);

  StatsBank degenerate(1, 3, 1, 0.95);
  degenerate.momentum_update(std::vector<ConditionalGaussian>{
      make_cg({1}, {1}, 0, 0), make_cg({1}, {1}, 0, 1),
      make_cg({1}, {1}, 0, 2)});
  CHECK(median_heuristic(degenerate) == 1e-6);

  StatsBank lone(1, 2, 1, 0.95);
  lone.momentum_update(std::vector<ConditionalGaussian>{make_cg({0}, {1}, 0, 0)});
  CHECK_THROWS_AS(median_heuristic(lone), std::runtime_error);
}

TEST_CASE("kernel config validation") {
  KernelConfig cfg;
  cfg.bandwidths = {1.0, 0.5};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.bandwidths = {0.0, 1.0};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  CHECK_THROWS_AS(KernelConfig::ladder(0.0), std::invalid_argument);
  auto ok = KernelConfig::ladder(2.0);
  CHECK(ok.bandwidths.size() == 5);
  CHECK(ok.bandwidths.front() == 0.5);
  CHECK(ok.bandwidths.back() == 8.0);
}
