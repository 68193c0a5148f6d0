#include "con2em/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "con2em/rng.hpp"

namespace con2em {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string fmt_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error("dataset: bad numeric field '" + s + "'");
  }
  return v;
}

std::vector<double> unit_direction(std::size_t dim, RandomStream& rng) {
  std::vector<double> v = rng.normals(dim);
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm < 1e-12) return unit_direction(dim, rng);
  for (double& x : v) x /= norm;
  return v;
}

}  // namespace

const DomainData& DomainDataset::domain(int id) const {
  for (const auto& d : domains) {
    if (d.domain_id == id) return d;
  }
  throw std::out_of_range("DomainDataset: unknown domain id " +
                          std::to_string(id));
}

DomainDataset gen_shifted_blobs(int n_domains, int n_classes, int n_per_cell,
                                std::size_t input_dim, double shift_scale,
                                std::uint64_t seed) {
  if (n_domains < 2 || n_classes < 2 || input_dim < 2 || n_per_cell < 1) {
    throw std::invalid_argument("gen_shifted_blobs: invalid counts");
  }
  RandomStream rng(seed, 0x626c6f62);  // "blob"

  // Class centers, shared by all domains before the per-domain transform.
  const double center_scale = 4.0;
  std::vector<std::vector<double>> centers(static_cast<std::size_t>(n_classes));
  for (auto& c : centers) {
    c = rng.normals(input_dim);
    for (auto& v : c) v *= center_scale;
  }

  DomainDataset ds;
  ds.generator = "shifted_blobs";
  ds.seed = seed;
  ds.input_dim = input_dim;
  ds.n_classes = n_classes;
  ds.params = {{"n_domains", std::to_string(n_domains)},
               {"n_classes", std::to_string(n_classes)},
               {"n_per_cell", std::to_string(n_per_cell)},
               {"shift_scale", fmt_double(shift_scale)}};

  for (int d = 0; d < n_domains; ++d) {
    // Plane rotation spanned by two random orthonormal axes, with angle and
    // translation both scaled by shift_scale so shift_scale = 0 is exactly
    // the identity.
    std::vector<double> u = unit_direction(input_dim, rng);
    std::vector<double> w = rng.normals(input_dim);
    double uw = 0.0;
    for (std::size_t i = 0; i < input_dim; ++i) uw += u[i] * w[i];
    double wn = 0.0;
    for (std::size_t i = 0; i < input_dim; ++i) {
      w[i] -= uw * u[i];
      wn += w[i] * w[i];
    }
    wn = std::sqrt(wn);
    for (auto& v : w) v /= std::max(wn, 1e-12);

    const double theta =
        shift_scale * rng.uniform(-1.0, 1.0) * (15.0 * kPi / 180.0);
    std::vector<double> t = unit_direction(input_dim, rng);
    for (auto& v : t) v *= shift_scale;

    auto transform = [&](const std::vector<double>& p) {
      double pu = 0.0, pw = 0.0;
      for (std::size_t i = 0; i < input_dim; ++i) {
        pu += p[i] * u[i];
        pw += p[i] * w[i];
      }
      const double c = std::cos(theta), s = std::sin(theta);
      std::vector<double> out(input_dim);
      for (std::size_t i = 0; i < input_dim; ++i) {
        out[i] = p[i] + (c - 1.0) * (pu * u[i] + pw * w[i]) +
                 s * (pu * w[i] - pw * u[i]) + t[i];
      }
      return out;
    };

    DomainData dom;
    dom.domain_id = d;
    dom.x.reserve(static_cast<std::size_t>(n_classes) *
                  static_cast<std::size_t>(n_per_cell) * input_dim);
    for (int k = 0; k < n_classes; ++k) {
      const auto center = transform(centers[static_cast<std::size_t>(k)]);
      for (int i = 0; i < n_per_cell; ++i) {
        for (std::size_t j = 0; j < input_dim; ++j) {
          dom.x.push_back(center[j] + rng.normal());
        }
        dom.y.push_back(k);
      }
    }
    ds.domains.push_back(std::move(dom));
  }
  return ds;
}

DomainDataset gen_rotated_moons(const std::vector<double>& angles_deg,
                                int n_per_domain, double noise_std,
                                std::uint64_t seed) {
  if (angles_deg.size() < 2) {
    throw std::invalid_argument("gen_rotated_moons: need at least two angles");
  }
  for (std::size_t i = 0; i < angles_deg.size(); ++i) {
    for (std::size_t j = i + 1; j < angles_deg.size(); ++j) {
      if (angles_deg[i] == angles_deg[j]) {
        throw std::invalid_argument("gen_rotated_moons: duplicate angle");
      }
    }
  }
  if (n_per_domain < 2 || noise_std < 0.0) {
    throw std::invalid_argument("gen_rotated_moons: invalid parameters");
  }
  RandomStream rng(seed, 0x6d6f6f6e);  // "moon"

  DomainDataset ds;
  ds.generator = "rotated_moons";
  ds.seed = seed;
  ds.input_dim = 2;
  ds.n_classes = 2;
  {
    std::ostringstream os;
    for (std::size_t i = 0; i < angles_deg.size(); ++i) {
      if (i) os << ',';
      os << fmt_double(angles_deg[i]);
    }
    ds.params = {{"angles", os.str()},
                 {"n_per_domain", std::to_string(n_per_domain)},
                 {"noise_std", fmt_double(noise_std)}};
  }

  for (std::size_t d = 0; d < angles_deg.size(); ++d) {
    const double a = angles_deg[d] * kPi / 180.0;
    const double ca = std::cos(a), sa = std::sin(a);
    const int n_up = (n_per_domain + 1) / 2;
    const int n_low = n_per_domain - n_up;
    DomainData dom;
    dom.domain_id = static_cast<int>(d);
    auto push = [&](double px, double py, int label) {
      px += noise_std * rng.normal();
      py += noise_std * rng.normal();
      dom.x.push_back(ca * px - sa * py);
      dom.x.push_back(sa * px + ca * py);
      dom.y.push_back(label);
    };
    for (int i = 0; i < n_up; ++i) {
      const double t = n_up > 1 ? kPi * i / (n_up - 1) : 0.0;
      push(std::cos(t), std::sin(t), 0);
    }
    for (int i = 0; i < n_low; ++i) {
      const double t = n_low > 1 ? kPi * i / (n_low - 1) : 0.0;
      push(1.0 - std::cos(t), 0.5 - std::sin(t), 1);
    }
    ds.domains.push_back(std::move(dom));
  }
  return ds;
}

DomainDataset gen_correlation_flip(const std::vector<double>& rates,
                                   int n_per_domain, std::uint64_t seed) {
  if (rates.size() < 2) {
    throw std::invalid_argument("gen_correlation_flip: need >= 2 domains");
  }
  for (double r : rates) {
    if (!(r >= -1.0 && r <= 1.0)) {
      throw std::invalid_argument("gen_correlation_flip: rate outside [-1,1]");
    }
  }
  if (n_per_domain < 2) {
    throw std::invalid_argument("gen_correlation_flip: invalid count");
  }
  constexpr std::size_t kSignalDims = 4;
  constexpr double kSignalShift = 0.4;
  RandomStream rng(seed, 0x666c6970);  // "flip"

  DomainDataset ds;
  ds.generator = "correlation_flip";
  ds.seed = seed;
  ds.input_dim = kSignalDims + 1;
  ds.n_classes = 2;
  {
    std::ostringstream os;
    for (std::size_t i = 0; i < rates.size(); ++i) {
      if (i) os << ',';
      os << fmt_double(rates[i]);
    }
    ds.params = {{"rates", os.str()},
                 {"n_per_domain", std::to_string(n_per_domain)}};
  }

  for (std::size_t d = 0; d < rates.size(); ++d) {
    const double p_match = (1.0 + rates[d]) / 2.0;
    DomainData dom;
    dom.domain_id = static_cast<int>(d);
    for (int i = 0; i < n_per_domain; ++i) {
      const int y = i % 2;  // exactly balanced classes
      const double mean = y == 1 ? kSignalShift : -kSignalShift;
      for (std::size_t j = 0; j < kSignalDims; ++j) {
        dom.x.push_back(mean + rng.normal());
      }
      const int s = rng.uniform() < p_match ? y : 1 - y;
      dom.x.push_back(static_cast<double>(s));
      dom.y.push_back(y);
    }
    ds.domains.push_back(std::move(dom));
  }
  return ds;
}

SplitPlan split_lodo(const DomainDataset& ds, int target_domain,
                     std::uint64_t seed) {
  ds.domain(target_domain);  // throws on unknown id
  SplitPlan plan;
  plan.target_domain = target_domain;
  plan.seed = seed;
  for (const auto& dom : ds.domains) {
    if (dom.domain_id == target_domain) continue;
    RandomStream rng(seed, 0x73706c00u + static_cast<std::uint64_t>(dom.domain_id));
    SplitPlan::Part part;
    for (int k = 0; k < ds.n_classes; ++k) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < dom.n(); ++i) {
        if (dom.y[i] == k) idx.push_back(i);
      }
      rng.shuffle(idx);
      const auto n_val = static_cast<std::size_t>(
          std::llround(0.2 * static_cast<double>(idx.size())));
      for (std::size_t i = 0; i < idx.size(); ++i) {
        (i < n_val ? part.val : part.train).push_back(idx[i]);
      }
    }
    std::sort(part.train.begin(), part.train.end());
    std::sort(part.val.begin(), part.val.end());
    plan.sources[dom.domain_id] = std::move(part);
  }
  if (plan.sources.empty()) {
    throw std::invalid_argument("split_lodo: dataset has no source domains");
  }
  return plan;
}

void save_dataset(const DomainDataset& ds, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_dataset: cannot open " + path);
  os << "# con2em-dataset v1\n";
  os << "# generator=" << ds.generator << "\n";
  os << "# seed=" << ds.seed << "\n";
  os << "# input_dim=" << ds.input_dim << "\n";
  os << "# n_classes=" << ds.n_classes << "\n";
  os << "# n_domains=" << ds.domains.size() << "\n";
  for (const auto& [k, v] : ds.params) {
    os << "# param:" << k << "=" << v << "\n";
  }
  os << "domain label";
  for (std::size_t j = 0; j < ds.input_dim; ++j) os << " f" << j;
  os << "\n";
  for (const auto& dom : ds.domains) {
    for (std::size_t i = 0; i < dom.n(); ++i) {
      os << dom.domain_id << ' ' << dom.y[i];
      for (std::size_t j = 0; j < ds.input_dim; ++j) {
        os << ' ' << fmt_double(dom.x[i * ds.input_dim + j]);
      }
      os << '\n';
    }
  }
}

DomainDataset load_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_dataset: cannot open " + path);
  DomainDataset ds;
  std::string line;
  if (!std::getline(is, line) || line != "# con2em-dataset v1") {
    throw std::runtime_error("load_dataset: bad or missing version header");
  }
  std::size_t n_domains_expected = 0;
  while (std::getline(is, line)) {
    if (line.rfind("# ", 0) == 0) {
      const std::string body = line.substr(2);
      const auto eq = body.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = body.substr(0, eq);
      const std::string val = body.substr(eq + 1);
      if (key == "generator") ds.generator = val;
      else if (key == "seed") ds.seed = std::stoull(val);
      else if (key == "input_dim") ds.input_dim = std::stoul(val);
      else if (key == "n_classes") ds.n_classes = std::stoi(val);
      else if (key == "n_domains") n_domains_expected = std::stoul(val);
      else if (key.rfind("param:", 0) == 0) ds.params[key.substr(6)] = val;
    } else {
      break;  // column header line
    }
  }
  std::map<int, DomainData> by_domain;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    int d = 0, y = 0;
    row >> d >> y;
    auto& dom = by_domain[d];
    dom.domain_id = d;
    dom.y.push_back(y);
    std::string field;
    std::size_t got = 0;
    while (row >> field) {
      dom.x.push_back(parse_double(field));
      ++got;
    }
    if (got != ds.input_dim) {
      throw std::runtime_error("load_dataset: row has wrong feature count");
    }
  }
  for (auto& [id, dom] : by_domain) ds.domains.push_back(std::move(dom));
  if (n_domains_expected != 0 && ds.domains.size() != n_domains_expected) {
    throw std::runtime_error("load_dataset: domain count mismatch");
  }
  return ds;
}

}  // namespace con2em
