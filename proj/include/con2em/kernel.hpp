#pragma once

#include <vector>

#include "con2em/stats.hpp"
#include "con2em/tensor.hpp"

namespace con2em {

// Multi-bandwidth RBF configuration. Bandwidths must be positive and
// strictly increasing; the exponent always uses the squared 2-Wasserstein
// distance.
struct KernelConfig {
  std::vector<double> bandwidths;

  // Standard ladder {0.25, 0.5, 1, 2, 4} scaled by a base bandwidth.
  static KernelConfig ladder(double base);
  static KernelConfig ladder(double base, const std::vector<double>& scales);

  void validate() const;
};

// Squared 2-Wasserstein distance between diagonal Gaussians:
// |mu_p - mu_q|^2 + |sigma_p - sigma_q|^2. Scalar tensor, differentiable
// when the operands are tracked.
ad::Tensor wasserstein2_sq(const ConditionalGaussian& p,
                           const ConditionalGaussian& q);

// The multi-bandwidth RBF responses of `p` against every bank cell, one
// entry per cell in domain-major order: sum_i exp(-D^2(p, cell)/h_i).
// Uninitialized cells contribute a fixed 0. Length n_domains * n_classes;
// differentiable with respect to p.
using KernelEmbedding = ad::Tensor;
KernelEmbedding embed(const ConditionalGaussian& p, const StatsBank& bank,
                      const KernelConfig& cfg);

using ProjectionHead = Affine;  // (n_domains * n_classes) -> n_classes

// logits = head(embed(p, bank, cfg)), a {n_classes} tensor.
ad::Tensor classify_distribution(const ConditionalGaussian& p,
                                 const StatsBank& bank, const KernelConfig& cfg,
                                 const ProjectionHead& head);

// Median of pairwise squared Wasserstein distances over the initialized bank
// cells, floored at 1e-6. Requires at least two initialized cells.
double median_heuristic(const StatsBank& bank);

}  // namespace con2em
