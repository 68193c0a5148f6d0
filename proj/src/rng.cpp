#include "con2em/rng.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace con2em {

namespace {

std::string double_to_text(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double text_to_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc()) {
    throw std::runtime_error("RandomStream: bad serialized double '" + s + "'");
  }
  return v;
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_tag & 0xffffffffu),
                    static_cast<std::uint32_t>(stream_tag >> 32)};
  engine_.seed(seq);
}

double RandomStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double RandomStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::vector<double> RandomStream::normals(std::size_t n) {
  std::vector<double> out(n);
  for (auto& v : out) v = normal();
  return out;
}

double RandomStream::beta_symmetric(double alpha) {
  if (!(alpha > 0.0)) {
    throw std::domain_error("beta_symmetric: alpha must be > 0");
  }
  const double inv = 1.0 / alpha;
  for (;;) {
    const double x = std::pow(uniform(), inv);
    const double y = std::pow(uniform(), inv);
    const double s = x + y;
    if (s > 0.0 && s <= 1.0) return x / s;
  }
}

std::size_t RandomStream::index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("RandomStream::index: n must be >= 1");
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % static_cast<std::uint64_t>(n);
  std::uint64_t x = 0;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % static_cast<std::uint64_t>(n));
}

std::string RandomStream::serialize() const {
  std::ostringstream os;
  os << engine_ << ' ' << (has_spare_ ? 1 : 0) << ' ' << double_to_text(spare_);
  return os.str();
}

RandomStream RandomStream::deserialize(const std::string& text) {
  RandomStream rs;
  std::istringstream is(text);
  is >> rs.engine_;
  int spare_flag = 0;
  std::string spare_text;
  is >> spare_flag >> spare_text;
  if (!is) throw std::runtime_error("RandomStream: malformed serialized state");
  rs.has_spare_ = spare_flag != 0;
  rs.spare_ = text_to_double(spare_text);
  return rs;
}

bool RandomStream::operator==(const RandomStream& other) const {
  return engine_ == other.engine_ && has_spare_ == other.has_spare_ &&
         spare_ == other.spare_;
}

}  // namespace con2em
