#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace con2em {

// Deterministic random stream. The engine is a std::mt19937_64 (bit-exact by
// the standard); the distribution transforms are implemented here because the
// standard library's distributions are implementation-defined, which would
// break reproducibility of committed golden values across toolchains.
//
// Streams are split per purpose (batch sampling, mixup gamma, resampling
// noise, ...) via the `stream_tag` so that enabling or disabling one consumer
// never perturbs the draws seen by another.
class RandomStream {
 public:
  RandomStream() : RandomStream(0, 0) {}
  RandomStream(std::uint64_t seed, std::uint64_t stream_tag);

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);

  /// Standard normal via Box-Muller; the spare value is cached.
  double normal();
  std::vector<double> normals(std::size_t n);

  /// Beta(alpha, alpha) via Johnk's algorithm. Efficient for alpha <= 1,
  /// which covers the default alpha = 0.2.
  double beta_symmetric(double alpha);

  /// Uniform index in [0, n), rejection sampled (no modulo bias). n >= 1.
  std::size_t index(std::size_t n);

  /// Fisher-Yates shuffle driven by this stream.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

  /// Exact textual state (engine + cached spare) for checkpointing.
  std::string serialize() const;
  static RandomStream deserialize(const std::string& text);

  bool operator==(const RandomStream& other) const;

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace con2em
