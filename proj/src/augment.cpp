#include "con2em/augment.hpp"

#include <stdexcept>

namespace con2em {

void MixupConfig::validate() const {
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("MixupConfig: alpha must be > 0");
  }
  if (!(lambda_mix > 0.0 && lambda_mix < 1.0)) {
    throw std::invalid_argument("MixupConfig: lambda_mix must lie in (0,1)");
  }
}

UniversumDistribution build_universum(const StatsBank& bank) {
  auto cells = bank.initialized_cells();
  if (cells.empty()) {
    throw std::runtime_error("build_universum: bank has no initialized cells");
  }
  const std::size_t s = bank.stats_dim();
  std::vector<double> mu(s, 0.0), sigma(s, 0.0);
  for (const auto* c : cells) {
    const auto cm = c->mu.data(), cs = c->sigma.data();
    for (std::size_t j = 0; j < s; ++j) {
      mu[j] += cm[j];
      sigma[j] += cs[j];
    }
  }
  const double count = static_cast<double>(cells.size());
  for (std::size_t j = 0; j < s; ++j) {
    mu[j] /= count;
    sigma[j] /= count;
  }
  return {ad::Tensor::from_data({s}, std::move(mu)),
          ad::Tensor::from_data({s}, std::move(sigma))};
}

AugmentedDistribution universum_mix(const UniversumDistribution& u,
                                    const ConditionalGaussian& cell,
                                    double lambda) {
  if (u.dim() != cell.dim()) {
    throw std::invalid_argument("universum_mix: stats_dim mismatch");
  }
  AugmentedDistribution out;
  out.source = AugSource::universum_mix;
  out.label = cell.cls;
  out.gaussian.domain = cell.domain;
  out.gaussian.cls = cell.cls;
  out.gaussian.mu =
      ad::add(ad::scale(u.mu, 1.0 - lambda), ad::scale(cell.mu, lambda));
  out.gaussian.sigma =
      ad::add(ad::scale(u.sigma, 1.0 - lambda), ad::scale(cell.sigma, lambda));
  return out;
}

AugmentedDistribution distribution_mixup(const ConditionalGaussian& a,
                                         const ConditionalGaussian& b,
                                         double gamma, int n_classes) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("distribution_mixup: stats_dim mismatch");
  }
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("distribution_mixup: gamma must lie in [0,1]");
  }
  if (a.cls < 0 || a.cls >= n_classes || b.cls < 0 || b.cls >= n_classes) {
    throw std::invalid_argument("distribution_mixup: class out of range");
  }
  AugmentedDistribution out;
  out.source = AugSource::mixup;
  out.label = gamma >= 0.5 ? a.cls : b.cls;
  out.gaussian.mu = ad::add(ad::scale(a.mu, gamma), ad::scale(b.mu, 1.0 - gamma));
  out.gaussian.sigma =
      ad::add(ad::scale(a.sigma, gamma), ad::scale(b.sigma, 1.0 - gamma));
  out.soft_label.assign(static_cast<std::size_t>(n_classes), 0.0);
  out.soft_label[static_cast<std::size_t>(a.cls)] += gamma;
  out.soft_label[static_cast<std::size_t>(b.cls)] += 1.0 - gamma;
  return out;
}

PseudoBatch resample(const AugmentedDistribution& aug, std::size_t m,
                     RandomStream& rng) {
  if (m == 0) {
    throw std::invalid_argument("resample: need at least one sample");
  }
  const std::size_t s = aug.gaussian.dim();
  auto eps = ad::Tensor::from_data({m, s}, rng.normals(m * s));
  auto sigma = ad::clamp_min(aug.gaussian.sigma, 1e-8);
  PseudoBatch out;
  out.latents = ad::add_rowvec(ad::mul_rowvec(eps, sigma), aug.gaussian.mu);
  out.label = aug.label;
  return out;
}

}  // namespace con2em
