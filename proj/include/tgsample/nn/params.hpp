#pragma once

// Named trainable parameters, the Adam optimizer and binary checkpoints.
//
// Checkpoint layout: `<base>.manifest` holds one `name dtype shape offset`
// line per parameter (shape as comma-separated dims, offset in bytes) and
// `<base>.bin` holds the concatenated little-endian arrays.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <deque>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tgsample/error.hpp"
#include "tgsample/nn/tensor.hpp"
#include "tgsample/random.hpp"

namespace tgsample::nn {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;
  std::uint64_t adam_step = 0;
  bool trainable = true;
  bool has_grad = false;  // set when a backward pass reached this parameter

  void zero_grad() {
    grad.fill(0.0);
    has_grad = false;
  }
};

enum class LinearInit {
  InverseSqrtFanIn,  // U(-1/sqrt(d_in), 1/sqrt(d_in))
  SqrtFanIn,         // U(-sqrt(d_in), sqrt(d_in)), the literal reading of the hyperparameter note
};

/// Owns parameters with stable addresses. Initial values are drawn from a
/// stream keyed by (seed, name), so adding a parameter never changes the
/// initialization of another one.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) = default;
  ParamStore& operator=(ParamStore&&) = default;

  Parameter& add(const std::string& name, Shape shape) {
    require(!index_.contains(name), ErrorCode::InvalidArgument, "duplicate parameter '" + name + "'");
    auto& p = params_.emplace_back();
    p.name = name;
    p.value = Tensor(shape);
    p.grad = Tensor(shape);
    p.adam_m = Tensor(shape);
    p.adam_v = Tensor(shape);
    index_.emplace(name, &p);
    return p;
  }

  Parameter& add_uniform(const std::string& name, Shape shape, double bound) {
    auto& p = add(name, std::move(shape));
    Rng rng(derive_seed(seed_, name));
    for (auto& v : p.value.data) v = rng.uniform(-bound, bound);
    return p;
  }

  Parameter& add_normal(const std::string& name, Shape shape, double stddev = 1.0) {
    auto& p = add(name, std::move(shape));
    Rng rng(derive_seed(seed_, name));
    for (auto& v : p.value.data) v = stddev * rng.normal();
    return p;
  }

  Parameter& add_constant(const std::string& name, Shape shape, double value) {
    auto& p = add(name, std::move(shape));
    p.value.fill(value);
    return p;
  }

  /// Weight matrix [d_in, d_out] for a linear layer.
  Parameter& add_linear_weight(const std::string& name, std::size_t d_in, std::size_t d_out, LinearInit init) {
    const double d = static_cast<double>(std::max<std::size_t>(d_in, 1));
    const double bound = init == LinearInit::InverseSqrtFanIn ? 1.0 / std::sqrt(d) : std::sqrt(d);
    return add_uniform(name, {d_in, d_out}, bound);
  }

  [[nodiscard]] bool contains(const std::string& name) const { return index_.contains(name); }

  Parameter& get(const std::string& name) {
    const auto it = index_.find(name);
    require(it != index_.end(), ErrorCode::InvalidArgument, "no parameter '" + name + "'");
    return *it->second;
  }
  [[nodiscard]] const Parameter& get(const std::string& name) const {
    const auto it = index_.find(name);
    require(it != index_.end(), ErrorCode::InvalidArgument, "no parameter '" + name + "'");
    return *it->second;
  }

  std::deque<Parameter>& all() { return params_; }
  [[nodiscard]] const std::deque<Parameter>& all() const { return params_; }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  /// Freezes (or unfreezes) every parameter whose name starts with `prefix`.
  void set_trainable(const std::string& prefix, bool trainable) {
    for (auto& p : params_) {
      if (p.name.rfind(prefix, 0) == 0) p.trainable = trainable;
    }
  }

  [[nodiscard]] std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

 private:
  std::deque<Parameter> params_;
  std::map<std::string, Parameter*> index_;
  std::uint64_t seed_;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over every trainable parameter that received a
/// gradient since the last step; gradients are zeroed afterwards.
inline void adam_step(ParamStore& store, const AdamConfig& cfg = {}) {
  bool any = false;
  for (auto& p : store.all()) any = any || (p.trainable && p.has_grad);
  require(any, ErrorCode::MissingGradient, "adam_step called without populated gradients");
  for (auto& p : store.all()) {
    if (!p.trainable || !p.has_grad) {
      p.zero_grad();
      continue;
    }
    ++p.adam_step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p.adam_step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p.adam_step));
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      p.adam_m[i] = cfg.beta1 * p.adam_m[i] + (1.0 - cfg.beta1) * g;
      p.adam_v[i] = cfg.beta2 * p.adam_v[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = p.adam_m[i] / c1;
      const double v_hat = p.adam_v[i] / c2;
      p.value[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
    require(p.value.all_finite(), ErrorCode::NonFinite, "parameter '" + p.name + "' became non-finite");
    p.zero_grad();
  }
}

// ---------------------------------------------------------------------------
// Checkpoints

enum class Dtype { F32, F64 };

namespace detail {

inline void put_le(std::ostream& out, double v, Dtype dtype) {
  static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes a little-endian host");
  if (dtype == Dtype::F64) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(double));
  } else {
    const auto f = static_cast<float>(v);
    out.write(reinterpret_cast<const char*>(&f), sizeof(float));
  }
}

}  // namespace detail

inline void save_checkpoint(const ParamStore& store, const std::string& base, Dtype dtype = Dtype::F64) {
  std::ofstream manifest(base + ".manifest", std::ios::binary);
  std::ofstream blob(base + ".bin", std::ios::binary);
  require(manifest && blob, ErrorCode::Io, "cannot write checkpoint " + base);
  std::size_t offset = 0;
  const std::size_t width = dtype == Dtype::F64 ? 8 : 4;
  for (const auto& p : store.all()) {
    manifest << p.name << ' ' << (dtype == Dtype::F64 ? "f64" : "f32") << ' ';
    for (std::size_t i = 0; i < p.value.shape.size(); ++i) manifest << (i ? "," : "") << p.value.shape[i];
    manifest << ' ' << offset << '\n';
    for (const double v : p.value.data) detail::put_le(blob, v, dtype);
    offset += p.value.size() * width;
  }
  require(static_cast<bool>(manifest) && static_cast<bool>(blob), ErrorCode::Io, "short write to " + base);
}

/// Restores values of parameters already present in `store`; every manifest
/// entry must match an existing parameter by name and shape.
inline void load_checkpoint(ParamStore& store, const std::string& base) {
  std::ifstream manifest(base + ".manifest");
  require(static_cast<bool>(manifest), ErrorCode::CheckpointMismatch, "missing manifest " + base + ".manifest");
  std::ifstream blob(base + ".bin", std::ios::binary);
  require(static_cast<bool>(blob), ErrorCode::CheckpointMismatch, "missing blob " + base + ".bin");
  blob.seekg(0, std::ios::end);
  const auto blob_size = static_cast<std::size_t>(blob.tellg());
  std::string line;
  std::size_t restored = 0;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name, dtype_s, shape_s;
    std::size_t offset = 0;
    ls >> name >> dtype_s >> shape_s >> offset;
    require(static_cast<bool>(ls), ErrorCode::CheckpointMismatch, "bad manifest line: " + line);
    require(dtype_s == "f32" || dtype_s == "f64", ErrorCode::CheckpointMismatch, "unknown dtype " + dtype_s);
    Shape shape;
    std::istringstream ss(shape_s);
    for (std::string dim; std::getline(ss, dim, ',');) shape.push_back(std::stoull(dim));
    require(store.contains(name), ErrorCode::CheckpointMismatch, "checkpoint has unknown parameter " + name);
    auto& p = store.get(name);
    require(p.value.shape == shape, ErrorCode::CheckpointMismatch,
            "shape mismatch for " + name + ": " + shape_string(shape) + " vs " + shape_string(p.value.shape));
    const std::size_t width = dtype_s == "f64" ? 8 : 4;
    require(offset + p.value.size() * width <= blob_size, ErrorCode::CheckpointMismatch,
            "blob too short for " + name);
    blob.seekg(static_cast<std::streamoff>(offset));
    for (auto& v : p.value.data) {
      if (width == 8) {
        blob.read(reinterpret_cast<char*>(&v), 8);
      } else {
        float f = 0;
        blob.read(reinterpret_cast<char*>(&f), 4);
        v = f;
      }
    }
    require(static_cast<bool>(blob), ErrorCode::CheckpointMismatch, "read failure for " + name);
    ++restored;
  }
  require(restored == store.all().size(), ErrorCode::CheckpointMismatch,
          "checkpoint restored " + std::to_string(restored) + " of " + std::to_string(store.all().size()) +
              " parameters");
}

}  // namespace tgsample::nn
