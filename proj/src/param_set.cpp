#include "idql/param_set.hpp"

#include <cmath>

namespace idql {

Tensor& ParamSet::add(const std::string& path, Tensor t) {
  check(!path.empty(), "ParamSet::add: empty path");
  check(t.defined(), "ParamSet::add: undefined tensor for " + path);
  auto [it, inserted] = params_.emplace(path, std::move(t));
  check(inserted, "ParamSet::add: duplicate parameter path " + path);
  it->second.ensure_grad();
  return it->second;
}

Tensor& ParamSet::at(const std::string& path) {
  auto it = params_.find(path);
  check(it != params_.end(), "ParamSet: unknown parameter path " + path);
  return it->second;
}

const Tensor& ParamSet::at(const std::string& path) const {
  auto it = params_.find(path);
  check(it != params_.end(), "ParamSet: unknown parameter path " + path);
  return it->second;
}

std::size_t ParamSet::num_values() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.size();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& [_, t] : params_) t.zero_grad();
}

bool ParamSet::values_finite() const {
  for (const auto& [_, t] : params_)
    if (!t.finite()) return false;
  return true;
}

ParamSet ParamSet::clone() const {
  ParamSet out;
  out.step_count_ = step_count_;
  for (const auto& [path, t] : params_)
    out.add(path, Tensor(t.shape(), t.values()));
  return out;
}

std::vector<std::uint8_t> ParamSet::serialize() const {
  std::vector<std::uint8_t> out;
  put_u32(out, 1u);  // format version
  put_u64(out, static_cast<std::uint64_t>(params_.size()));
  for (const auto& [path, t] : params_) {
    put_u32(out, static_cast<std::uint32_t>(path.size()));
    out.insert(out.end(), path.begin(), path.end());
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put_u64(out, static_cast<std::uint64_t>(d));
    for (double v : t.values()) put_f64(out, v);
  }
  return out;
}

ParamSet ParamSet::deserialize(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    check(pos + n <= bytes.size(), "ParamSet::deserialize: truncated checkpoint");
  };
  need(12);
  const std::uint32_t version = get_u32(bytes.data() + pos);
  pos += 4;
  check(version == 1, "ParamSet::deserialize: unsupported version " + std::to_string(version));
  const std::uint64_t count = get_u64(bytes.data() + pos);
  pos += 8;
  ParamSet out;
  for (std::uint64_t i = 0; i < count; ++i) {
    need(4);
    const std::uint32_t path_len = get_u32(bytes.data() + pos);
    pos += 4;
    need(path_len);
    std::string path(reinterpret_cast<const char*>(bytes.data() + pos), path_len);
    pos += path_len;
    need(4);
    const std::uint32_t rank = get_u32(bytes.data() + pos);
    pos += 4;
    Shape shape(rank);
    for (std::uint32_t d = 0; d < rank; ++d) {
      need(8);
      shape[d] = static_cast<std::size_t>(get_u64(bytes.data() + pos));
      pos += 8;
    }
    const std::size_t n = shape_size(shape);
    std::vector<double> values(n);
    for (std::size_t k = 0; k < n; ++k) {
      need(8);
      values[k] = get_f64(bytes.data() + pos);
      pos += 8;
    }
    out.add(path, Tensor(std::move(shape), std::move(values)));
  }
  check(pos == bytes.size(), "ParamSet::deserialize: trailing bytes in checkpoint");
  return out;
}

void ParamSet::save(const std::string& path) const {
  auto bytes = serialize();
  write_file(path, bytes.data(), bytes.size());
}

ParamSet ParamSet::load(const std::string& path) { return deserialize(read_file(path)); }

double Adam::effective_lr() const {
  if (cfg_.cosine_decay_horizon == 0) return cfg_.lr;
  if (t_ >= cfg_.cosine_decay_horizon) return 0.0;
  const double frac =
      static_cast<double>(t_) / static_cast<double>(cfg_.cosine_decay_horizon);
  return cfg_.lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * frac));
}

void Adam::step(ParamSet& params) {
  const double lr = effective_lr();
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_ + 1));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_ + 1));
  for (auto& [path, tensor] : params) {
    auto& m = m_[path];
    auto& v = v_[path];
    if (m.empty()) {
      m.assign(tensor.size(), 0.0);
      v.assign(tensor.size(), 0.0);
    }
    check(m.size() == tensor.size(), "Adam: moment size mismatch for " + path);
    const auto& g = tensor.grad();
    auto& vals = tensor.values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      vals[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
  ++t_;
  params.bump_step_count();
  params.zero_grad();
}

void load_values(ParamSet& dst, const ParamSet& src) {
  check(dst.size() == src.size(), "load_values: parameter count mismatch (" +
                                      std::to_string(dst.size()) + " vs " +
                                      std::to_string(src.size()) + ")");
  auto it = dst.begin();
  auto jt = src.begin();
  for (; it != dst.end(); ++it, ++jt) {
    check(it->first == jt->first,
          "load_values: parameter path mismatch " + it->first + " vs " + jt->first);
    check(it->second.shape() == jt->second.shape(),
          "load_values: shape mismatch for " + it->first);
    it->second.values() = jt->second.values();
  }
}

void ema_update(ParamSet& target, const ParamSet& online, double rate) {
  check(target.size() == online.size(),
        "ema_update: parameter count mismatch (" + std::to_string(target.size()) + " vs " +
            std::to_string(online.size()) + ")");
  auto it = target.begin();
  auto jt = online.begin();
  for (; it != target.end(); ++it, ++jt) {
    check(it->first == jt->first,
          "ema_update: parameter path mismatch " + it->first + " vs " + jt->first);
    check(it->second.shape() == jt->second.shape(),
          "ema_update: shape mismatch for " + it->first);
    auto& tv = it->second.values();
    const auto& ov = jt->second.values();
    for (std::size_t i = 0; i < tv.size(); ++i)
      tv[i] = (1.0 - rate) * tv[i] + rate * ov[i];
  }
}

}  // namespace idql
