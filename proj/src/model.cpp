#include "con2em/model.hpp"

#include <stdexcept>

namespace con2em {

EncoderModel EncoderModel::init(const ModelConfig& cfg, RandomStream& rng) {
  if (cfg.input_dim == 0 || cfg.n_classes == 0 || cfg.n_domains == 0 ||
      cfg.hidden_dim == 0 || cfg.latent_dim == 0 || cfg.stats_dim == 0) {
    throw std::invalid_argument("EncoderModel: all dimensions must be positive");
  }
  EncoderModel m;
  m.cfg = cfg;
  m.enc1 = Affine::init(cfg.input_dim, cfg.hidden_dim, rng);
  m.enc2 = Affine::init(cfg.hidden_dim, cfg.hidden_dim, rng);
  m.enc3 = Affine::init(cfg.hidden_dim, cfg.latent_dim, rng);
  m.cls = Affine::init(cfg.latent_dim, cfg.n_classes, rng);
  m.stats = StatsHeads::init(cfg.latent_dim, cfg.stats_dim, rng);
  m.head = Affine::init(cfg.n_domains * cfg.n_classes, cfg.n_classes, rng);
  if (cfg.latent_dim != cfg.stats_dim) {
    m.adapter = Affine::init(cfg.stats_dim, cfg.latent_dim, rng);
  }
  return m;
}

ad::Tensor EncoderModel::encode(const ad::Tensor& x) const {
  return enc3(ad::relu(enc2(ad::relu(enc1(x)))));
}

ad::Tensor EncoderModel::class_logits(const ad::Tensor& z) const {
  return cls(z);
}

ad::Tensor EncoderModel::adapt(const ad::Tensor& pseudo) const {
  return adapter ? (*adapter)(pseudo) : pseudo;
}

std::vector<ad::Tensor> EncoderModel::parameters() const {
  std::vector<ad::Tensor> ps;
  for (auto& [name, t] : named_parameters(*this)) ps.push_back(t);
  return ps;
}

std::vector<std::pair<std::string, ad::Tensor>> named_parameters(
    const EncoderModel& m) {
  std::vector<std::pair<std::string, ad::Tensor>> ps;
  auto put = [&](const std::string& name, const Affine& a) {
    ps.emplace_back(name + ".weight", a.weight);
    ps.emplace_back(name + ".bias", a.bias);
  };
  put("enc1", m.enc1);
  put("enc2", m.enc2);
  put("enc3", m.enc3);
  put("cls", m.cls);
  put("stats.fc_mu", m.stats.fc_mu);
  put("stats.fc_logvar", m.stats.fc_logvar);
  put("head", m.head);
  if (m.adapter) put("adapter", *m.adapter);
  return ps;
}

EncoderModel EncoderModel::clone() const {
  EncoderModel copy = *this;
  auto deep = [](Affine& a) {
    a.weight = ad::Tensor::from_data(a.weight.shape(),
                                     {a.weight.data().begin(), a.weight.data().end()},
                                     true);
    a.bias = ad::Tensor::from_data(a.bias.shape(),
                                   {a.bias.data().begin(), a.bias.data().end()},
                                   true);
  };
  deep(copy.enc1);
  deep(copy.enc2);
  deep(copy.enc3);
  deep(copy.cls);
  deep(copy.stats.fc_mu);
  deep(copy.stats.fc_logvar);
  deep(copy.head);
  if (copy.adapter) deep(*copy.adapter);
  return copy;
}

}  // namespace con2em
