#pragma once

// Linear process models, steady-state local Kalman filtering, and the
// open-loop covariance map h(X) = A X A' + W used by the remote estimator.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "sensched/errors.hpp"
#include "sensched/rng.hpp"

namespace sensched {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Rank with singular values below rel_tol * sigma_max treated as zero.
inline Eigen::Index numerical_rank(const Matrix& m, double rel_tol = 1e-8) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > rel_tol * s(0)) ++rank;
  }
  return rank;
}

/// Symmetric square root of a PSD matrix; tiny negative eigenvalues clamp to zero.
inline Matrix psd_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  const Vector roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}

/// Observability matrix [C; CA; ...; CA^{n-1}].
inline Matrix observability_matrix(const Matrix& a, const Matrix& c) {
  const Eigen::Index n = a.rows();
  Matrix obs(c.rows() * n, n);
  Matrix block = c;
  for (Eigen::Index k = 0; k < n; ++k) {
    obs.middleRows(k * c.rows(), c.rows()) = block;
    block = block * a;
  }
  return obs;
}

/// Controllability matrix [B, AB, ..., A^{n-1}B].
inline Matrix controllability_matrix(const Matrix& a, const Matrix& b) {
  const Eigen::Index n = a.rows();
  Matrix ctrb(n, b.cols() * n);
  Matrix block = b;
  for (Eigen::Index k = 0; k < n; ++k) {
    ctrb.middleCols(k * b.cols(), b.cols()) = block;
    block = a * block;
  }
  return ctrb;
}

/// x_{k+1} = A x_k + w_k,  y_k = C x_k + v_k,  w ~ N(0, W),  v ~ N(0, V).
///
/// The checked constructor enforces: W symmetric PSD, V symmetric PD,
/// (A, C) observable and (A, W^{1/2}) controllable.
class ProcessModel {
 public:
  ProcessModel(Matrix a, Matrix c, Matrix w, Matrix v)
      : ProcessModel(std::move(a), std::move(c), std::move(w), std::move(v), Unchecked{}) {
    validate();
  }

  /// Skips the noise and rank checks. Only shape conformity is enforced.
  /// Meant for degenerate setups such as noiseless tracking tests.
  static ProcessModel unchecked(Matrix a, Matrix c, Matrix w, Matrix v) {
    return ProcessModel(std::move(a), std::move(c), std::move(w), std::move(v), Unchecked{});
  }

  const Matrix& A() const { return a_; }
  const Matrix& C() const { return c_; }
  const Matrix& W() const { return w_; }
  const Matrix& V() const { return v_; }
  const Matrix& W_sqrt() const { return w_sqrt_; }
  const Matrix& V_sqrt() const { return v_sqrt_; }
  Eigen::Index state_dim() const { return a_.rows(); }
  Eigen::Index meas_dim() const { return c_.rows(); }

 private:
  struct Unchecked {};

  ProcessModel(Matrix a, Matrix c, Matrix w, Matrix v, Unchecked)
      : a_(std::move(a)), c_(std::move(c)), w_(std::move(w)), v_(std::move(v)) {
    const auto n = a_.rows();
    if (n == 0 || a_.cols() != n || c_.cols() != n || w_.rows() != n || w_.cols() != n ||
        v_.rows() != c_.rows() || v_.cols() != c_.rows()) {
      throw InvalidArgument("process model: non-conformable A, C, W, V");
    }
    w_sqrt_ = psd_sqrt(w_);
    v_sqrt_ = psd_sqrt(v_);
  }

  void validate() const {
    auto symmetric = [](const Matrix& m) {
      const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
      return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * scale;
    };
    if (!a_.allFinite() || !c_.allFinite() || !w_.allFinite() || !v_.allFinite()) {
      throw ModelError("process model: non-finite entries");
    }
    if (!symmetric(w_) || !symmetric(v_)) throw ModelError("process model: W or V not symmetric");
    const double w_tol = 1e-10 * std::max(1.0, w_.cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Matrix> w_eig(symmetrize(w_), Eigen::EigenvaluesOnly);
    if (w_eig.eigenvalues().minCoeff() < -w_tol) throw ModelError("process model: W not PSD");
    Eigen::SelfAdjointEigenSolver<Matrix> v_eig(symmetrize(v_), Eigen::EigenvaluesOnly);
    if (!(v_eig.eigenvalues().minCoeff() > 0.0)) throw ModelError("process model: V not PD");
    if (numerical_rank(observability_matrix(a_, c_)) < a_.rows()) {
      throw ModelError("process model: (A, C) not observable");
    }
    if (numerical_rank(controllability_matrix(a_, w_sqrt_)) < a_.rows()) {
      throw ModelError("process model: (A, W^1/2) not controllable");
    }
  }

  Matrix a_, c_, w_, v_;
  Matrix w_sqrt_, v_sqrt_;
};

/// h(P) = A P A' + W, symmetrized.
inline Matrix h_apply(const Matrix& a, const Matrix& w, const Matrix& p) {
  if (a.rows() != a.cols() || p.rows() != a.cols() || p.cols() != a.cols() ||
      w.rows() != a.rows() || w.cols() != a.rows()) {
    throw InvalidArgument("h_apply: dimension mismatch");
  }
  return symmetrize(a * p * a.transpose() + w);
}

inline Matrix h_apply(const ProcessModel& model, const Matrix& p) {
  return h_apply(model.A(), model.W(), p);
}

/// One predict + update of the posterior error covariance.
inline Matrix riccati_update(const ProcessModel& model, const Matrix& posterior) {
  const Matrix prior = h_apply(model, posterior);
  const Matrix& c = model.C();
  const Matrix innovation = c * prior * c.transpose() + model.V();
  const Matrix gain = innovation.ldlt().solve(c * prior).transpose();
  const Matrix identity = Matrix::Identity(prior.rows(), prior.cols());
  return symmetrize((identity - gain * c) * prior);
}

/// Steady-state posterior covariance, the matching gain, and the open-loop
/// powers h^n(Pbar). Powers are precomputed up to `depth` and extended on
/// demand; extension is guarded so a cache can be shared across threads.
class SteadyStateCache {
 public:
  SteadyStateCache() = default;
  SteadyStateCache(const ProcessModel& model, Matrix pbar, std::size_t depth)
      : pbar_(std::move(pbar)), a_(model.A()), w_(model.W()) {
    const Matrix prior = h_apply(model, pbar_);
    const Matrix& c = model.C();
    const Matrix innovation = c * prior * c.transpose() + model.V();
    gain_ = innovation.ldlt().solve(c * prior).transpose();
    powers_.reserve(depth + 1);
    powers_.push_back(pbar_);
    traces_.push_back(pbar_.trace());
    extend_to(depth);
  }

  SteadyStateCache(const SteadyStateCache& other) { copy_from(other); }
  SteadyStateCache& operator=(const SteadyStateCache& other) {
    if (this != &other) copy_from(other);
    return *this;
  }
  SteadyStateCache(SteadyStateCache&& other) noexcept { copy_from(other); }
  SteadyStateCache& operator=(SteadyStateCache&& other) noexcept {
    if (this != &other) copy_from(other);
    return *this;
  }

  const Matrix& pbar() const { return pbar_; }
  const Matrix& kalman_gain() const { return gain_; }

  /// Snapshot of tr h^n(Pbar) for the powers computed so far.
  std::vector<double> trace_powers() const {
    std::lock_guard lock(mu_);
    return traces_;
  }

  /// h^tau(Pbar).
  Matrix covariance_at(std::size_t tau) const {
    std::lock_guard lock(mu_);
    extend_to(tau);
    return powers_[tau];
  }

  /// tr h^tau(Pbar); +inf once the powers overflow (strongly unstable A).
  double trace_at(std::size_t tau) const {
    std::lock_guard lock(mu_);
    if (tau >= traces_.size()) {
      if (std::isinf(traces_.back())) return traces_.back();
      extend_to(tau);
    }
    return traces_[tau];
  }

 private:
  void extend_to(std::size_t tau) const {
    while (powers_.size() <= tau) {
      Matrix next = h_apply(a_, w_, powers_.back());
      double tr = next.trace();
      if (!std::isfinite(tr)) tr = std::numeric_limits<double>::infinity();
      powers_.push_back(std::move(next));
      traces_.push_back(tr);
    }
  }

  void copy_from(const SteadyStateCache& other) {
    std::lock_guard lock(other.mu_);
    pbar_ = other.pbar_;
    gain_ = other.gain_;
    a_ = other.a_;
    w_ = other.w_;
    powers_ = other.powers_;
    traces_ = other.traces_;
  }

  Matrix pbar_;
  Matrix gain_;
  Matrix a_, w_;
  mutable std::vector<Matrix> powers_;
  mutable std::vector<double> traces_;
  mutable std::mutex mu_;
};

struct RiccatiOptions {
  double tol = 1e-10;
  std::size_t max_iters = 100000;
  std::size_t cache_depth = 256;
};

/// Fixed-point iteration of the posterior Riccati recursion from P0 = W.
/// The returned Pbar satisfies max|Pbar - R(Pbar)| < tol.
inline SteadyStateCache steady_state_covariance(const ProcessModel& model,
                                                const RiccatiOptions& opts = {},
                                                const std::string& name = "process") {
  if (!(opts.tol > 0.0)) throw InvalidArgument("steady_state_covariance: tol must be positive");
  Matrix p = symmetrize(model.W());
  for (std::size_t it = 0; it < opts.max_iters; ++it) {
    Matrix next = riccati_update(model, p);
    if (!next.allFinite()) break;
    if ((next - p).cwiseAbs().maxCoeff() < opts.tol) return SteadyStateCache(model, p, opts.cache_depth);
    p = std::move(next);
  }
  throw ConvergenceError("steady_state_covariance: Riccati iteration for '" + name +
                         "' did not converge within " + std::to_string(opts.max_iters) + " iterations");
}

inline Matrix covariance_at_holding(const SteadyStateCache& cache, std::size_t tau) {
  return cache.covariance_at(tau);
}

struct KalmanState {
  Vector xhat;    // local posterior estimate
  Vector x_true;  // simulated state, for validation
};

/// Steady-state start: x_true = xhat + N(0, Pbar) so the local error already
/// has the stationary covariance.
inline KalmanState kalman_initial_state(const ProcessModel& model, const SteadyStateCache& cache,
                                        RandomStream& rng) {
  const auto n = model.state_dim();
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.normal();
  return {Vector::Zero(n), psd_sqrt(cache.pbar()) * z};
}

/// Advances the true state, draws a measurement, and updates the local
/// estimate with the fixed steady-state gain.
inline KalmanState local_kalman_step(const ProcessModel& model, const SteadyStateCache& cache,
                                     const KalmanState& state, RandomStream& rng) {
  const auto n = model.state_dim();
  const auto ny = model.meas_dim();
  Vector w(n), v(ny);
  for (Eigen::Index i = 0; i < n; ++i) w(i) = rng.normal();
  for (Eigen::Index i = 0; i < ny; ++i) v(i) = rng.normal();
  KalmanState next;
  next.x_true = model.A() * state.x_true + model.W_sqrt() * w;
  const Vector y = model.C() * next.x_true + model.V_sqrt() * v;
  const Vector predicted = model.A() * state.xhat;
  next.xhat = predicted + cache.kalman_gain() * (y - model.C() * predicted);
  return next;
}

/// Gateway estimate: the local estimate on delivery, open-loop prediction otherwise.
inline Vector remote_estimate_update(const ProcessModel& model, const KalmanState& local,
                                     const Vector& prev_remote, bool received) {
  if (local.xhat.size() != model.state_dim() || prev_remote.size() != model.state_dim()) {
    throw InvalidArgument("remote_estimate_update: dimension mismatch");
  }
  return received ? local.xhat : Vector(model.A() * prev_remote);
}

/// Empirical remote-error covariance grouped by holding time.
struct RemoteErrorStats {
  std::vector<Matrix> covariance;  // indexed by tau
  std::vector<std::size_t> count;
};

/// Simulates the local filter plus a gateway receiving each packet with
/// probability delivery_prob, and accumulates (x - xremote)(x - xremote)'
/// by holding time up to max_tau. Runs in error coordinates (local error
/// x - xhat and gateway lag xhat - xremote) so unstable processes do not
/// overflow over long runs.
inline RemoteErrorStats monte_carlo_remote_error(const ProcessModel& model,
                                                 const SteadyStateCache& cache,
                                                 double delivery_prob, std::size_t steps,
                                                 std::size_t max_tau, RandomStream& rng) {
  const auto n = model.state_dim();
  const auto ny = model.meas_dim();
  const Matrix& k_gain = cache.kalman_gain();
  RemoteErrorStats stats;
  stats.covariance.assign(max_tau + 1, Matrix::Zero(n, n));
  stats.count.assign(max_tau + 1, 0);
  const KalmanState start = kalman_initial_state(model, cache, rng);
  Vector local_err = start.x_true - start.xhat;
  Vector lag = Vector::Zero(n);
  Vector w(n), v(ny);
  std::size_t tau = 0;
  for (std::size_t k = 0; k < steps; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) w(i) = rng.normal();
    for (Eigen::Index i = 0; i < ny; ++i) v(i) = rng.normal();
    const Vector predicted_err = model.A() * local_err + model.W_sqrt() * w;
    const Vector innovation = model.C() * predicted_err + model.V_sqrt() * v;
    local_err = predicted_err - k_gain * innovation;
    const bool received = rng.bernoulli(delivery_prob);
    if (received) lag.setZero();
    else lag = model.A() * lag + k_gain * innovation;
    tau = received ? 0 : tau + 1;
    if (tau <= max_tau) {
      const Vector err = local_err + lag;
      stats.covariance[tau] += err * err.transpose();
      ++stats.count[tau];
    }
  }
  for (std::size_t t = 0; t <= max_tau; ++t) {
    if (stats.count[t] > 0) stats.covariance[t] /= static_cast<double>(stats.count[t]);
  }
  return stats;
}

}  // namespace sensched
