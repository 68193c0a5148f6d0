#pragma once

#include <optional>
#include <vector>

#include "con2em/rng.hpp"
#include "con2em/stats.hpp"
#include "con2em/tensor.hpp"

namespace con2em {

// Semantic-free aggregate of all observed conditional distributions: the
// componentwise mean of every initialized bank cell.
struct UniversumDistribution {
  ad::Tensor mu;
  ad::Tensor sigma;
  std::size_t dim() const { return mu.size(); }
};

enum class AugSource { universum_mix, mixup };

struct AugmentedDistribution {
  ConditionalGaussian gaussian;
  int label = -1;  // hard class label; for mixup, the gamma-dominant parent
  AugSource source = AugSource::universum_mix;
  std::vector<double> soft_label;  // mixup only; sums to 1
};

struct MixupConfig {
  double alpha = 0.2;       // Beta(alpha, alpha) parameter
  double lambda_mix = 0.5;  // fixed Universum mixing coefficient
  void validate() const;
};

// Componentwise mean over all initialized bank cells; recomputed from the
// current bank each batch. Requires at least one initialized cell.
UniversumDistribution build_universum(const StatsBank& bank);

// (1 - lambda) * universum + lambda * cell on both mu and sigma. The result
// keeps the semantic parent's class label and stays differentiable through
// any tracked operand.
AugmentedDistribution universum_mix(const UniversumDistribution& u,
                                    const ConditionalGaussian& cell,
                                    double lambda);

// gamma * a + (1 - gamma) * b with soft label
// gamma * onehot(a.cls) + (1 - gamma) * onehot(b.cls).
AugmentedDistribution distribution_mixup(const ConditionalGaussian& a,
                                         const ConditionalGaussian& b,
                                         double gamma, int n_classes);

// m pseudo-instances drawn as mu + sigma (*) eps with eps ~ N(0, I) from the
// given stream. The noise is a constant, so gradients reach mu and sigma
// through the reparameterization path. sigma is floored at 1e-8.
struct PseudoBatch {
  ad::Tensor latents;  // {m, stats_dim}
  int label = -1;
};
PseudoBatch resample(const AugmentedDistribution& aug, std::size_t m,
                     RandomStream& rng);

}  // namespace con2em
