#include "con2em/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace con2em {

Affine Affine::init(std::size_t in, std::size_t out, RandomStream& rng) {
  // Glorot-style normal init; bias starts at zero.
  const double sd = std::sqrt(2.0 / static_cast<double>(in + out));
  std::vector<double> w(in * out);
  for (auto& v : w) v = sd * rng.normal();
  Affine a;
  a.weight = ad::Tensor::from_data({in, out}, std::move(w), true);
  a.bias = ad::Tensor::zeros({out}, true);
  return a;
}

ad::Tensor Affine::operator()(const ad::Tensor& x) const {
  return ad::add_rowvec(ad::matmul(x, weight), bias);
}

StatsHeads StatsHeads::init(std::size_t latent_dim, std::size_t stats_dim,
                            RandomStream& rng) {
  StatsHeads h;
  h.fc_mu = Affine::init(latent_dim, stats_dim, rng);
  h.fc_logvar = Affine::init(latent_dim, stats_dim, rng);
  return h;
}

ConditionalGaussian ConditionalGaussian::detached() const {
  return {mu.detach(), sigma.detach(), domain, cls};
}

std::pair<ad::Tensor, ad::Tensor> per_instance_stats(const ad::Tensor& z,
                                                     const StatsHeads& heads) {
  if (z.rank() != 2 || z.shape()[1] != heads.latent_dim()) {
    throw std::invalid_argument("per_instance_stats: latent dim mismatch");
  }
  ad::Tensor mu = heads.fc_mu(z);
  ad::Tensor sigma = ad::exp(ad::scale(heads.fc_logvar(z), 0.5));
  return {std::move(mu), std::move(sigma)};
}

std::vector<ConditionalGaussian> aggregate_by_cell(
    const ad::Tensor& mu, const ad::Tensor& sigma, std::span<const int> labels,
    std::span<const int> domains) {
  if (mu.rank() != 2 || mu.shape() != sigma.shape()) {
    throw std::invalid_argument("aggregate_by_cell: mu/sigma shape mismatch");
  }
  const std::size_t b = mu.shape()[0];
  if (labels.size() != b || domains.size() != b) {
    throw std::invalid_argument("aggregate_by_cell: label/domain count mismatch");
  }
  std::map<std::pair<int, int>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < b; ++i) {
    groups[{domains[i], labels[i]}].push_back(i);
  }
  std::vector<ConditionalGaussian> out;
  out.reserve(groups.size());
  for (const auto& [key, idx] : groups) {
    ConditionalGaussian g;
    g.domain = key.first;
    g.cls = key.second;
    g.mu = ad::row_select_mean(mu, idx);
    g.sigma = ad::row_select_mean(sigma, idx);
    out.push_back(std::move(g));
  }
  return out;
}

StatsBank::StatsBank(int n_domains, int n_classes, std::size_t stats_dim,
                     double rho)
    : n_domains_(n_domains),
      n_classes_(n_classes),
      stats_dim_(stats_dim),
      rho_(rho) {
  if (n_domains <= 0 || n_classes <= 0 || stats_dim == 0) {
    throw std::invalid_argument("StatsBank: dimensions must be positive");
  }
  if (!(rho >= 0.0 && rho < 1.0)) {
    throw std::invalid_argument("StatsBank: rho must lie in [0,1)");
  }
  cells_.resize(static_cast<std::size_t>(n_domains) *
                static_cast<std::size_t>(n_classes));
  init_.assign(cells_.size(), 0);
}

std::size_t StatsBank::flat_index(int domain, int cls) const {
  if (domain < 0 || domain >= n_domains_ || cls < 0 || cls >= n_classes_) {
    throw std::out_of_range("StatsBank: (domain, class) out of range");
  }
  return static_cast<std::size_t>(domain) *
             static_cast<std::size_t>(n_classes_) +
         static_cast<std::size_t>(cls);
}

bool StatsBank::initialized(int domain, int cls) const {
  return init_[flat_index(domain, cls)] != 0;
}

bool StatsBank::fully_initialized() const {
  return n_initialized_ == cells_.size();
}

const ConditionalGaussian& StatsBank::cell(int domain, int cls) const {
  const std::size_t i = flat_index(domain, cls);
  if (!init_[i]) {
    throw std::logic_error("StatsBank: cell not initialized");
  }
  return cells_[i];
}

void StatsBank::momentum_update(std::span<const ConditionalGaussian> fresh) {
  for (const auto& f : fresh) {
    if (f.dim() != stats_dim_) {
      throw std::invalid_argument("StatsBank: stats_dim mismatch");
    }
    const std::size_t i = flat_index(f.domain, f.cls);
    if (!init_[i]) {
      cells_[i] = f.detached();
      init_[i] = 1;
      ++n_initialized_;
      continue;
    }
    auto& old = cells_[i];
    std::vector<double> mu(stats_dim_), sigma(stats_dim_);
    const auto om = old.mu.data(), os = old.sigma.data();
    const auto fm = f.mu.data(), fs = f.sigma.data();
    for (std::size_t j = 0; j < stats_dim_; ++j) {
      mu[j] = rho_ * om[j] + (1.0 - rho_) * fm[j];
      sigma[j] = rho_ * os[j] + (1.0 - rho_) * fs[j];
    }
    old.mu = ad::Tensor::from_data({stats_dim_}, std::move(mu));
    old.sigma = ad::Tensor::from_data({stats_dim_}, std::move(sigma));
  }
}

std::vector<const ConditionalGaussian*> StatsBank::initialized_cells() const {
  std::vector<const ConditionalGaussian*> out;
  out.reserve(n_initialized_);
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    if (init_[i]) out.push_back(&cells_[i]);
  }
  return out;
}

void StatsBank::set_cell(int domain, int cls, ConditionalGaussian g) {
  if (g.dim() != stats_dim_) {
    throw std::invalid_argument("StatsBank: stats_dim mismatch");
  }
  const std::size_t i = flat_index(domain, cls);
  g.domain = domain;
  g.cls = cls;
  if (!init_[i]) {
    init_[i] = 1;
    ++n_initialized_;
  }
  cells_[i] = g.detached();
}

}  // namespace con2em
