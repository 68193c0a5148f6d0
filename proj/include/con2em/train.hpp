#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "con2em/adam.hpp"
#include "con2em/augment.hpp"
#include "con2em/data.hpp"
#include "con2em/kernel.hpp"
#include "con2em/model.hpp"
#include "con2em/rng.hpp"
#include "con2em/stats.hpp"
#include "con2em/tensor.hpp"

namespace con2em {

struct TrainConfig {
  double lr = 5e-5;
  std::size_t batch_size = 32;
  double alpha = 0.2;        // Beta distribution parameter
  double beta = 1e-2;        // trade-off on the distribution-level loss
  double rho = 0.95;         // bank momentum weight
  double lambda_mix = 0.5;   // Universum mixing coefficient
  std::size_t max_iters = 5000;
  std::uint64_t seed = 0;
  std::size_t hidden_dim = 64;
  std::size_t latent_dim = 16;
  std::size_t stats_dim = 16;
  std::size_t eval_every = 50;

  bool augment = true;      // Universum augmentation + pseudo-instance feedback
  bool dist_loss = true;    // include beta * L_dis
  bool dist_mixup = true;   // include the distribution-mixup smoothness term
  bool warmup = true;       // hold the distribution machinery off until the
                            // bank is fully initialized
  bool instance_mixup = false;  // input-space mixup (ERM+Mixup baseline)

  std::vector<double> bandwidth_scales{0.25, 0.5, 1.0, 2.0, 4.0};

  void validate() const;
};

struct TrainRecord {
  std::int64_t iter = 0;
  double l_ins = 0.0;
  double l_dis = 0.0;
  double l_total = 0.0;
  double train_acc = 0.0;
  double val_acc = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
};

// Instance-level loss: mean cross-entropy over the real batch plus the
// pseudo-instance cross-entropy, both normalized by the real-instance count.
// Also returns the real-batch logits so callers can derive batch accuracy
// without re-encoding.
struct InstanceLossOut {
  ad::Tensor loss;
  ad::Tensor real_logits;  // {B, |Y|}
};
InstanceLossOut instance_loss(const EncoderModel& model, const ad::Tensor& x,
                              const ad::Tensor& targets,
                              std::span<const PseudoBatch> pseudo);

// Distribution-level loss: cross-entropy of the kernel classifier on the
// observed batch cells, on the Universum-mixed cells, and (soft labels) on
// the mixup pairs. Each term is the sum over the cells present divided by
// the fixed cell count n_domains * n_classes. Empty groups contribute 0.
ad::Tensor distribution_loss(std::span<const ConditionalGaussian> batch_cells,
                             std::span<const AugmentedDistribution> aug_cells,
                             std::span<const AugmentedDistribution> mixup_cells,
                             const StatsBank& bank, const KernelConfig& cfg,
                             const ProjectionHead& head);

// Fraction of argmax(CLS(E(x))) == y; ties resolve to the lowest class.
double evaluate(const EncoderModel& model, const ad::Tensor& x,
                std::span<const int> y);

ad::Tensor domain_tensor(const DomainData& d, std::size_t input_dim);

// Full trainer state at one instant; what a checkpoint stores.
struct TrainerSnapshot {
  ModelConfig model_cfg;
  EncoderModel model;
  StatsBank bank{1, 1, 1, 0.0};
  std::optional<KernelConfig> kernel;  // set once bandwidths are frozen
  std::int64_t adam_step = 0;
  std::vector<std::vector<double>> adam_m, adam_v;
  std::map<std::string, std::string> rng_states;
  std::int64_t iter = 0;
};

void save_checkpoint(const std::string& path, const TrainerSnapshot& snap);
TrainerSnapshot load_checkpoint(const std::string& path);

struct FitResult {
  TrainerSnapshot best;  // state at the best validation accuracy
  double best_val_acc = 0.0;
  std::int64_t best_iter = 0;
  std::vector<TrainRecord> log;
};

// Orchestrates one Algorithm-1 iteration per step(): encode, per-instance
// statistics, per-cell aggregation, bank momentum update, Universum build and
// mix, distribution mixup, distribution loss, resampling, instance loss,
// total loss, backward, Adam.
class Trainer {
 public:
  Trainer(const DomainDataset& ds, const SplitPlan& split, TrainConfig cfg);

  TrainRecord step();
  FitResult fit();

  const EncoderModel& model() const { return model_; }
  const StatsBank& bank() const { return bank_; }
  const std::optional<KernelConfig>& kernel() const { return kernel_; }
  std::int64_t iter() const { return iter_; }

  TrainerSnapshot snapshot() const;
  void restore(const TrainerSnapshot& snap);

  // Pooled source-domain validation accuracy.
  double validation_accuracy() const;

 private:
  struct Batch {
    ad::Tensor x;
    ad::Tensor targets;
    std::vector<int> labels;
    std::vector<int> domains;
  };
  Batch sample_batch();

  const DomainDataset& ds_;
  TrainConfig cfg_;
  ModelConfig model_cfg_;
  EncoderModel model_;
  StatsBank bank_;
  std::optional<KernelConfig> kernel_;
  std::optional<ad::Adam> opt_;

  RandomStream batch_rng_, gamma_rng_, eps_rng_, imix_rng_;

  // (source domain, class) -> instance indices available for training.
  struct Cell {
    int domain_pos;  // position in ds_.domains
    int domain_id;
    int cls;
    std::vector<std::size_t> idx;
  };
  std::vector<Cell> cells_;
  std::vector<int> source_domain_ids_;
  std::map<int, int> domain_id_to_index_;  // dense ids used by bank/stats

  ad::Tensor val_x_;
  std::vector<int> val_y_;

  std::int64_t iter_ = 0;
};

}  // namespace con2em
