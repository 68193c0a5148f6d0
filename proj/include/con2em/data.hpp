#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "con2em/tensor.hpp"

namespace con2em {

struct DomainData {
  int domain_id = 0;
  std::vector<double> x;  // row-major, n * input_dim
  std::vector<int> y;
  std::size_t n() const { return y.size(); }
};

// Labeled instances partitioned by domain. All domains share the label space
// and every domain contains every class.
struct DomainDataset {
  std::string generator;
  std::uint64_t seed = 0;
  std::size_t input_dim = 0;
  int n_classes = 0;
  std::vector<DomainData> domains;
  std::map<std::string, std::string> params;  // generator parameters, echoed in files

  int n_domains() const { return static_cast<int>(domains.size()); }
  const DomainData& domain(int id) const;
};

// Per-cell means drawn once, then each domain applies its own random
// rotation and translation, both scaled by shift_scale (shift_scale = 0 is
// the identity transform, giving i.i.d. domains); instances add unit
// Gaussian noise around the transformed class centers.
DomainDataset gen_shifted_blobs(int n_domains, int n_classes, int n_per_cell,
                                std::size_t input_dim, double shift_scale,
                                std::uint64_t seed);

// Two interleaved moons per domain, rotated by the domain's angle (degrees).
// Labels are the moon ids.
DomainDataset gen_rotated_moons(const std::vector<double>& angles_deg,
                                int n_per_domain, double noise_std,
                                std::uint64_t seed);

// Binary labels with four weak signal dimensions (mean +-0.4) and one
// spurious dimension equal to the label with probability (1 + rate)/2 per
// domain, mirroring the correlation-flip structure of C-MNIST.
DomainDataset gen_correlation_flip(const std::vector<double>& rates,
                                   int n_per_domain, std::uint64_t seed);

// Leave-one-domain-out split: the target domain is untouched; every source
// domain is split 80/20 (train/val) stratified by class.
struct SplitPlan {
  int target_domain = -1;
  std::uint64_t seed = 0;
  struct Part {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
  };
  std::map<int, Part> sources;  // domain_id -> index lists
};

SplitPlan split_lodo(const DomainDataset& ds, int target_domain,
                     std::uint64_t seed);

// Columnar text round-trip (exact): header records generator, seed and
// dimensions; rows are "domain label f0 f1 ...".
void save_dataset(const DomainDataset& ds, const std::string& path);
DomainDataset load_dataset(const std::string& path);

}  // namespace con2em
