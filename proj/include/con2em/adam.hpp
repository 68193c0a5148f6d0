#pragma once

#include <cstdint>
#include <vector>

#include "con2em/tensor.hpp"

namespace con2em::ad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction over a fixed set of leaf parameters. Parameters
// with no gradient set are treated as having zero gradient.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg);

  void step();
  void zero_grad();

  std::int64_t step_count() const { return step_; }
  const std::vector<Tensor>& params() const { return params_; }

  // Checkpoint access to the moment buffers.
  const std::vector<std::vector<double>>& m() const { return m_; }
  const std::vector<std::vector<double>>& v() const { return v_; }
  void restore(std::int64_t step, std::vector<std::vector<double>> m,
               std::vector<std::vector<double>> v);

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  std::int64_t step_ = 0;
  AdamConfig cfg_;
};

}  // namespace con2em::ad
