#include "con2em/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace con2em {

KernelConfig KernelConfig::ladder(double base) {
  return ladder(base, {0.25, 0.5, 1.0, 2.0, 4.0});
}

KernelConfig KernelConfig::ladder(double base,
                                  const std::vector<double>& scales) {
  if (!(base > 0.0)) {
    throw std::invalid_argument("KernelConfig: base bandwidth must be > 0");
  }
  KernelConfig cfg;
  cfg.bandwidths.reserve(scales.size());
  for (double s : scales) cfg.bandwidths.push_back(s * base);
  cfg.validate();
  return cfg;
}

void KernelConfig::validate() const {
  if (bandwidths.empty()) {
    throw std::invalid_argument("KernelConfig: bandwidth list is empty");
  }
  double prev = 0.0;
  for (double h : bandwidths) {
    if (!(h > 0.0)) {
      throw std::invalid_argument("KernelConfig: bandwidths must be > 0");
    }
    if (h <= prev) {
      throw std::invalid_argument(
          "KernelConfig: bandwidths must be strictly increasing");
    }
    prev = h;
  }
}

ad::Tensor wasserstein2_sq(const ConditionalGaussian& p,
                           const ConditionalGaussian& q) {
  if (p.dim() != q.dim()) {
    throw std::invalid_argument("wasserstein2_sq: stats_dim mismatch");
  }
  return ad::add(ad::sum(ad::square(ad::sub(p.mu, q.mu))),
                 ad::sum(ad::square(ad::sub(p.sigma, q.sigma))));
}

KernelEmbedding embed(const ConditionalGaussian& p, const StatsBank& bank,
                      const KernelConfig& cfg) {
  cfg.validate();
  if (p.dim() != bank.stats_dim()) {
    throw std::invalid_argument("embed: stats_dim mismatch with bank");
  }
  const std::size_t r = bank.n_cells();
  const std::size_t s = bank.stats_dim();

  // Constant reference matrices in domain-major order. Uninitialized cells
  // hold zeros and are masked out of the result.
  std::vector<double> mu_ref(r * s, 0.0), sigma_ref(r * s, 0.0), mask(r, 0.0);
  for (int d = 0; d < bank.n_domains(); ++d) {
    for (int k = 0; k < bank.n_classes(); ++k) {
      if (!bank.initialized(d, k)) continue;
      const std::size_t i = bank.flat_index(d, k);
      const auto& cell = bank.cell(d, k);
      std::copy(cell.mu.data().begin(), cell.mu.data().end(),
                mu_ref.begin() + static_cast<std::ptrdiff_t>(i * s));
      std::copy(cell.sigma.data().begin(), cell.sigma.data().end(),
                sigma_ref.begin() + static_cast<std::ptrdiff_t>(i * s));
      mask[i] = 1.0;
    }
  }
  auto mu_m = ad::Tensor::from_data({r, s}, std::move(mu_ref));
  auto sigma_m = ad::Tensor::from_data({r, s}, std::move(sigma_ref));
  auto mask_t = ad::Tensor::from_data({r}, std::move(mask));

  // d2[i] = |mu_ref[i] - mu_p|^2 + |sigma_ref[i] - sigma_p|^2
  auto dmu = ad::add_rowvec(mu_m, ad::neg(p.mu));
  auto dsigma = ad::add_rowvec(sigma_m, ad::neg(p.sigma));
  auto d2 = ad::add(ad::row_sums(ad::square(dmu)),
                    ad::row_sums(ad::square(dsigma)));

  ad::Tensor e;
  for (double h : cfg.bandwidths) {
    auto term = ad::exp(ad::scale(d2, -1.0 / h));
    e = e.defined() ? ad::add(e, term) : term;
  }
  return ad::mul(e, mask_t);
}

ad::Tensor classify_distribution(const ConditionalGaussian& p,
                                 const StatsBank& bank, const KernelConfig& cfg,
                                 const ProjectionHead& head) {
  if (head.in_dim() != bank.n_cells()) {
    throw std::invalid_argument(
        "classify_distribution: head width does not match bank layout");
  }
  auto e = embed(p, bank, cfg);
  auto logits = head(ad::reshape(e, {1, e.size()}));
  return ad::reshape(logits, {logits.size()});
}

double median_heuristic(const StatsBank& bank) {
  auto cells = bank.initialized_cells();
  if (cells.size() < 2) {
    throw std::runtime_error(
        "median_heuristic: need at least two initialized cells");
  }
  std::vector<double> d2;
  d2.reserve(cells.size() * (cells.size() - 1) / 2);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::size_t j = i + 1; j < cells.size(); ++j) {
      d2.push_back(wasserstein2_sq(*cells[i], *cells[j]).item());
    }
  }
  std::sort(d2.begin(), d2.end());
  const std::size_t n = d2.size();
  const double med =
      n % 2 == 1 ? d2[n / 2] : 0.5 * (d2[n / 2 - 1] + d2[n / 2]);
  return std::max(med, 1e-6);
}

}  // namespace con2em
