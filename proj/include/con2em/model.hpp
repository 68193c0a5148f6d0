#pragma once

#include <optional>
#include <vector>

#include "con2em/kernel.hpp"
#include "con2em/rng.hpp"
#include "con2em/stats.hpp"
#include "con2em/tensor.hpp"

namespace con2em {

struct ModelConfig {
  std::size_t input_dim = 0;
  std::size_t n_classes = 0;
  std::size_t n_domains = 0;
  std::size_t hidden_dim = 64;
  std::size_t latent_dim = 16;
  std::size_t stats_dim = 16;
};

// Encoder (MLP with two ReLU hidden layers), instance-level classifier,
// statistics heads, and the distribution-level projection head. When
// latent_dim != stats_dim, a linear adapter routes resampled pseudo-latents
// into the instance classifier's input space; with the default
// latent_dim == stats_dim the adapter is the identity and holds no
// parameters.
struct EncoderModel {
  ModelConfig cfg;
  Affine enc1, enc2, enc3;
  Affine cls;
  StatsHeads stats;
  ProjectionHead head;
  std::optional<Affine> adapter;

  static EncoderModel init(const ModelConfig& cfg, RandomStream& rng);

  ad::Tensor encode(const ad::Tensor& x) const;       // {B,input} -> {B,latent}
  ad::Tensor class_logits(const ad::Tensor& z) const; // {B,latent} -> {B,|Y|}
  ad::Tensor adapt(const ad::Tensor& pseudo) const;   // {m,stats} -> {m,latent}

  std::vector<ad::Tensor> parameters() const;
  EncoderModel clone() const;  // deep copy of parameter values
};

// Parameters with stable names, in the same order as parameters().
std::vector<std::pair<std::string, ad::Tensor>> named_parameters(
    const EncoderModel& m);

}  // namespace con2em
