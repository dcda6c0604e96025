#pragma once

// Analytic vs central-difference gradient comparison on a random ReLU net.
// Perturbations that flip any hidden activation straddle a kink, where the
// central difference is not a derivative estimate; those entries are skipped
// and counted.

#include "oracles.hpp"
#include "sensched/neural.hpp"

namespace gradcheck {

struct Result {
  double worst_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

inline Result run(std::vector<std::size_t> sizes, std::uint64_t seed, std::size_t batch, double h = 1e-4) {
  using namespace sensched;
  RandomStream rng(CounterRng(seed), 0);
  MlpParams p = MlpParams::glorot(sizes, rng);
  for (auto& l : p.layers)
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = rng.uniform(-0.5, 0.5);
  Matrix x(static_cast<Eigen::Index>(sizes.front()), static_cast<Eigen::Index>(batch));
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, j) = rng.uniform(-1.0, 1.0);
  std::vector<std::size_t> actions(batch);
  std::vector<double> targets(batch);
  for (std::size_t j = 0; j < batch; ++j) {
    actions[j] = rng.below(sizes.back());
    targets[j] = rng.uniform(-2.0, 2.0);
  }
  const auto analytic = loss_and_gradient(p, x, actions, targets).grad;

  auto patterns = [&] {
    std::vector<Eigen::MatrixXd> w;
    std::vector<Eigen::VectorXd> b;
    for (const auto& l : p.layers) {
      w.push_back(l.weight);
      b.push_back(l.bias);
    }
    std::vector<bool> all;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const Eigen::VectorXd col = x.col(j);
      const auto pat = oracle::relu_pattern_loops(w, b, std::vector<double>(col.data(), col.data() + col.size()));
      all.insert(all.end(), pat.begin(), pat.end());
    }
    return all;
  };

  Result res;
  auto compare = [&](double a, double& slot) {
    const double saved = slot;
    slot = saved + h;
    const auto up = patterns();
    slot = saved - h;
    const auto down = patterns();
    slot = saved;
    if (up != down) {
      ++res.skipped;
      return;
    }
    const double n = oracle::central_difference(
        [&](double v) {
          slot = v;
          const double l = loss_and_gradient(p, x, actions, targets).loss;
          slot = saved;
          return l;
        },
        saved, h);
    ++res.checked;
    const double scale = std::max(std::abs(a), std::abs(n));
    if (scale < 1e-7) return;  // both effectively zero
    res.worst_rel_error = std::max(res.worst_rel_error, std::abs(a - n) / scale);
  };
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    for (Eigen::Index r = 0; r < p.layers[l].weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.layers[l].weight.cols(); ++c)
        compare(analytic.layers[l].weight(r, c), p.layers[l].weight(r, c));
      compare(analytic.layers[l].bias(r), p.layers[l].bias(r));
    }
  }
  return res;
}

}  // namespace gradcheck
