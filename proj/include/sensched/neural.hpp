#pragma once

// Fully connected Q-network: ReLU hidden layers, linear output, squared-error
// backpropagation and Adam with an inverse-time learning-rate decay.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "sensched/checksum.hpp"
#include "sensched/errors.hpp"
#include "sensched/rng.hpp"

namespace sensched {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

/// Network weights, or anything shaped like them (gradients, Adam moments).
struct MlpParams {
  std::vector<std::size_t> layer_sizes;  // input, hidden..., output
  std::vector<DenseLayer> layers;

  std::size_t input_size() const { return layer_sizes.front(); }
  std::size_t output_size() const { return layer_sizes.back(); }

  static MlpParams zeros(std::vector<std::size_t> sizes) {
    if (sizes.size() < 2) throw InvalidArgument("mlp: need at least input and output sizes");
    MlpParams p;
    p.layer_sizes = std::move(sizes);
    for (std::size_t l = 1; l < p.layer_sizes.size(); ++l) {
      const auto out = static_cast<Eigen::Index>(p.layer_sizes[l]);
      const auto in = static_cast<Eigen::Index>(p.layer_sizes[l - 1]);
      p.layers.push_back({Matrix::Zero(out, in), Vector::Zero(out)});
    }
    return p;
  }

  /// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static MlpParams glorot(std::vector<std::size_t> sizes, RandomStream& rng) {
    MlpParams p = zeros(std::move(sizes));
    for (auto& layer : p.layers) {
      const double limit = std::sqrt(6.0 / static_cast<double>(layer.weight.rows() + layer.weight.cols()));
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = rng.uniform(-limit, limit);
    }
    return p;
  }

  MlpParams zeros_like() const { return zeros(layer_sizes); }

  bool all_finite() const {
    for (const auto& l : layers)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  friend bool operator==(const MlpParams& a, const MlpParams& b) {
    if (a.layer_sizes != b.layer_sizes) return false;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
      if (a.layers[l].weight != b.layers[l].weight || a.layers[l].bias != b.layers[l].bias) return false;
    }
    return true;
  }
};

/// Batched forward pass; inputs are columns. Throws NumericalError on
/// non-finite output.
inline Matrix mlp_forward_batch(const MlpParams& p, const Matrix& inputs) {
  if (static_cast<std::size_t>(inputs.rows()) != p.input_size()) {
    throw InvalidArgument("mlp_forward: input has " + std::to_string(inputs.rows()) + " rows, network expects " +
                          std::to_string(p.input_size()));
  }
  Matrix act = inputs;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    Matrix z = p.layers[l].weight * act;
    z.colwise() += p.layers[l].bias;
    if (l + 1 < p.layers.size()) z = z.cwiseMax(0.0);
    act = std::move(z);
  }
  if (!act.allFinite()) throw NumericalError("mlp_forward: non-finite output");
  return act;
}

inline Vector mlp_forward(const MlpParams& p, const Vector& input) {
  return mlp_forward_batch(p, input);
}

struct LossAndGradient {
  double loss = 0.0;
  MlpParams grad;
};

/// Mean over the batch of (z_j - Q(s_j, a_j))^2 and its gradient. Only the
/// chosen action's output unit contributes for each sample.
inline LossAndGradient loss_and_gradient(const MlpParams& p, const Matrix& inputs,
                                         std::span<const std::size_t> actions, std::span<const double> targets) {
  const auto batch = inputs.cols();
  if (batch == 0) throw InvalidArgument("loss_and_gradient: empty batch");
  if (static_cast<std::size_t>(batch) != actions.size() || actions.size() != targets.size()) {
    throw InvalidArgument("loss_and_gradient: batch size mismatch");
  }
  for (double z : targets)
    if (!std::isfinite(z)) throw NumericalError("loss_and_gradient: non-finite target");
  if (static_cast<std::size_t>(inputs.rows()) != p.input_size()) {
    throw InvalidArgument("loss_and_gradient: input size mismatch");
  }

  const std::size_t depth = p.layers.size();
  std::vector<Matrix> acts;  // acts[l] is the input to layer l
  acts.reserve(depth + 1);
  acts.push_back(inputs);
  for (std::size_t l = 0; l < depth; ++l) {
    Matrix z = p.layers[l].weight * acts.back();
    z.colwise() += p.layers[l].bias;
    if (l + 1 < depth) z = z.cwiseMax(0.0);
    acts.push_back(std::move(z));
  }
  const Matrix& q = acts.back();
  if (!q.allFinite()) throw NumericalError("loss_and_gradient: non-finite Q-values");

  Matrix delta = Matrix::Zero(q.rows(), batch);
  double loss = 0.0;
  const double inv_b = 1.0 / static_cast<double>(batch);
  for (Eigen::Index j = 0; j < batch; ++j) {
    const auto a = static_cast<Eigen::Index>(actions[static_cast<std::size_t>(j)]);
    if (a >= q.rows()) throw InvalidArgument("loss_and_gradient: action index out of range");
    const double err = targets[static_cast<std::size_t>(j)] - q(a, j);
    loss += err * err * inv_b;
    delta(a, j) = -2.0 * err * inv_b;
  }

  LossAndGradient out{loss, p.zeros_like()};
  for (std::size_t l = depth; l-- > 0;) {
    out.grad.layers[l].weight.noalias() = delta * acts[l].transpose();
    out.grad.layers[l].bias = delta.rowwise().sum();
    if (l > 0) {
      Matrix back = p.layers[l].weight.transpose() * delta;
      // ReLU derivative; acts[l] is the post-activation of layer l-1.
      delta = back.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
    }
  }
  return out;
}

/// alpha_t = alpha0 / (1 + decay * t).
struct LrSchedule {
  double alpha0 = 1e-4;
  double decay = 1e-3;
  double rate(std::uint64_t t) const { return alpha0 / (1.0 + decay * static_cast<double>(t)); }
};

struct AdamState {
  MlpParams first_moment;
  MlpParams second_moment;
  std::uint64_t timestep = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const MlpParams& p) { return {p.zeros_like(), p.zeros_like()}; }
};

/// Bias-corrected Adam step with rate sched.rate(timestep); timestep advances by one.
inline void adam_update(MlpParams& params, const MlpParams& grads, AdamState& opt, const LrSchedule& sched) {
  if (params.layer_sizes != grads.layer_sizes || params.layer_sizes != opt.first_moment.layer_sizes) {
    throw InvalidArgument("adam_update: shape mismatch");
  }
  const double alpha = sched.rate(opt.timestep);
  ++opt.timestep;
  const double t = static_cast<double>(opt.timestep);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  auto step = [&](auto& theta, const auto& g, auto& m, auto& v) {
    m = opt.beta1 * m + (1.0 - opt.beta1) * g;
    v = opt.beta2 * v + (1.0 - opt.beta2) * g.cwiseProduct(g);
    theta.array() -= alpha * (m.array() / c1) / ((v.array() / c2).sqrt() + opt.epsilon);
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    step(params.layers[l].weight, grads.layers[l].weight, opt.first_moment.layers[l].weight,
         opt.second_moment.layers[l].weight);
    step(params.layers[l].bias, grads.layers[l].bias, opt.first_moment.layers[l].bias,
         opt.second_moment.layers[l].bias);
  }
}

// ---------------------------------------------------------------------------
// Weight file (little-endian):
//   char[8]   magic "SSQNET\0\1"
//   u32       version (1)
//   u32       number of layer sizes L, then L x u64 sizes
//   u32       activation-name length, then that many bytes ("relu")
//   per layer: weights row-major (out x in) f64, then bias f64
//   u64       FNV-1a over every preceding byte
// ---------------------------------------------------------------------------

inline constexpr char kWeightMagic[8] = {'S', 'S', 'Q', 'N', 'E', 'T', '\0', '\1'};
inline constexpr std::uint32_t kWeightVersion = 1;

namespace detail {

template <typename T>
void put_le(std::string& buf, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
  buf.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > data_.size()) throw MalformedFile("weights: truncated file");
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, data_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
  }
  std::string_view take(std::size_t n) {
    if (pos_ + n > data_.size()) throw MalformedFile("weights: truncated file");
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string weights_to_bytes(const MlpParams& p) {
  std::string buf(kWeightMagic, sizeof kWeightMagic);
  detail::put_le(buf, kWeightVersion);
  detail::put_le(buf, static_cast<std::uint32_t>(p.layer_sizes.size()));
  for (auto s : p.layer_sizes) detail::put_le(buf, static_cast<std::uint64_t>(s));
  const std::string activation = "relu";
  detail::put_le(buf, static_cast<std::uint32_t>(activation.size()));
  buf += activation;
  for (const auto& layer : p.layers) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) detail::put_le(buf, layer.weight(r, c));
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) detail::put_le(buf, layer.bias(r));
  }
  detail::put_le(buf, fnv1a64(buf));
  return buf;
}

inline MlpParams weights_from_bytes(std::string_view data) {
  detail::Reader rd(data);
  if (data.size() < sizeof kWeightMagic || std::memcmp(data.data(), kWeightMagic, sizeof kWeightMagic) != 0) {
    throw MalformedFile("weights: bad magic");
  }
  rd.take(sizeof kWeightMagic);
  const auto version = rd.get<std::uint32_t>();
  if (version != kWeightVersion) {
    throw VersionMismatch("weights: file version " + std::to_string(version) + ", expected " +
                          std::to_string(kWeightVersion));
  }
  if (data.size() < 8) throw MalformedFile("weights: truncated file");
  const std::string_view body = data.substr(0, data.size() - 8);
  detail::Reader tail(data.substr(data.size() - 8));
  if (fnv1a64(body) != tail.get<std::uint64_t>()) throw ChecksumMismatch("weights: checksum mismatch");

  const auto count = rd.get<std::uint32_t>();
  if (count < 2 || count > 64) throw MalformedFile("weights: implausible layer count");
  std::vector<std::size_t> sizes;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto s = rd.get<std::uint64_t>();
    if (s == 0 || s > (1u << 24)) throw MalformedFile("weights: implausible layer size");
    sizes.push_back(static_cast<std::size_t>(s));
  }
  const auto name_len = rd.get<std::uint32_t>();
  if (rd.take(name_len) != "relu") throw MalformedFile("weights: unsupported activation");
  MlpParams p = MlpParams::zeros(sizes);
  for (auto& layer : p.layers) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = rd.get<double>();
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = rd.get<double>();
  }
  if (rd.remaining() != 8) throw MalformedFile("weights: trailing bytes");
  return p;
}

inline void save_weights(const MlpParams& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  const std::string bytes = weights_to_bytes(p);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for '" + path + "'");
}

inline MlpParams load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return weights_from_bytes(buf.str());
}

}  // namespace sensched
