#pragma once

#include <span>
#include <utility>
#include <vector>

#include "con2em/rng.hpp"
#include "con2em/tensor.hpp"

namespace con2em {

// Trainable affine map {n,in} -> {n,out}.
struct Affine {
  ad::Tensor weight;  // {in,out}
  ad::Tensor bias;    // {out}

  static Affine init(std::size_t in, std::size_t out, RandomStream& rng);

  ad::Tensor operator()(const ad::Tensor& x) const;
  std::size_t in_dim() const { return weight.shape()[0]; }
  std::size_t out_dim() const { return weight.shape()[1]; }
};

// The two statistics heads producing per-instance first- and second-order
// statistics from latent representations.
struct StatsHeads {
  Affine fc_mu;
  Affine fc_logvar;

  static StatsHeads init(std::size_t latent_dim, std::size_t stats_dim,
                         RandomStream& rng);
  std::size_t latent_dim() const { return fc_mu.in_dim(); }
  std::size_t stats_dim() const { return fc_mu.out_dim(); }
};

// Diagonal Gaussian describing one domain-related class cluster. mu and
// sigma are {stats_dim} tensors; they carry gradients when produced by a
// tracked computation and are plain values otherwise (e.g. bank entries).
struct ConditionalGaussian {
  ad::Tensor mu;
  ad::Tensor sigma;  // standard deviations, strictly positive
  int domain = -1;
  int cls = -1;

  std::size_t dim() const { return mu.size(); }
  ConditionalGaussian detached() const;
};

// mu = fc_mu(z), sigma = exp(0.5 * fc_logvar(z)); both {B,stats_dim} and
// differentiable through z and the heads.
std::pair<ad::Tensor, ad::Tensor> per_instance_stats(const ad::Tensor& z,
                                                     const StatsHeads& heads);

// Average the per-instance statistics of every (domain, class) cell present
// in the batch. Cells absent from the batch are not emitted; output is
// ordered domain-major then class. Differentiable through mu/sigma.
std::vector<ConditionalGaussian> aggregate_by_cell(const ad::Tensor& mu,
                                                   const ad::Tensor& sigma,
                                                   std::span<const int> labels,
                                                   std::span<const int> domains);

// Momentum-smoothed table of per-(domain, class) Gaussians. Entries are
// detached from any graph; once a cell is initialized it persists.
class StatsBank {
 public:
  StatsBank(int n_domains, int n_classes, std::size_t stats_dim, double rho);

  int n_domains() const { return n_domains_; }
  int n_classes() const { return n_classes_; }
  std::size_t stats_dim() const { return stats_dim_; }
  double rho() const { return rho_; }
  std::size_t n_cells() const { return cells_.size(); }

  // Flat index in domain-major-then-class order, the layout every kernel
  // embedding uses.
  std::size_t flat_index(int domain, int cls) const;

  bool initialized(int domain, int cls) const;
  bool fully_initialized() const;
  std::size_t n_initialized() const { return n_initialized_; }

  const ConditionalGaussian& cell(int domain, int cls) const;

  // New cells are adopted verbatim; existing cells blend as
  // rho * old + (1 - rho) * fresh on both mu and sigma. Stored detached.
  void momentum_update(std::span<const ConditionalGaussian> fresh);

  std::vector<const ConditionalGaussian*> initialized_cells() const;

  // Checkpoint support.
  void set_cell(int domain, int cls, ConditionalGaussian g);

 private:
  int n_domains_;
  int n_classes_;
  std::size_t stats_dim_;
  double rho_;
  std::vector<ConditionalGaussian> cells_;
  std::vector<char> init_;
  std::size_t n_initialized_ = 0;
};

}  // namespace con2em
