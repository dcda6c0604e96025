#pragma once

// A scheduling scenario: N process models, M channels, and their derived
// steady-state caches. Also random generation and the JSON file format.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sensched/channel.hpp"
#include "sensched/checksum.hpp"
#include "sensched/estimation.hpp"
#include "sensched/rng.hpp"
#include "sensched/stability.hpp"

namespace sensched {

struct Scenario {
  std::vector<ProcessModel> processes;
  std::vector<ChannelModel> channels;
  std::vector<SteadyStateCache> caches;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> metadata;

  std::size_t sensors() const { return processes.size(); }
  std::size_t channel_count() const { return channels.size(); }
};

/// Computes the steady-state caches and checks 1 <= M <= N.
inline Scenario make_scenario(std::vector<ProcessModel> processes, std::vector<ChannelModel> channels,
                              std::uint64_t seed = 0, const RiccatiOptions& opts = {}) {
  if (channels.empty() || channels.size() > processes.size()) {
    throw InvalidArgument("scenario: need 1 <= M <= N");
  }
  Scenario s;
  s.caches.reserve(processes.size());
  for (std::size_t i = 0; i < processes.size(); ++i) {
    s.caches.push_back(steady_state_covariance(processes[i], opts, "sensor " + std::to_string(i)));
  }
  s.processes = std::move(processes);
  s.channels = std::move(channels);
  s.seed = seed;
  return s;
}

inline StabilityReport stability_check(const Scenario& s) {
  return stability_check(std::span<const ProcessModel>(s.processes),
                         std::span<const ChannelModel>(s.channels));
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of diag(R) folded into Q.
inline Matrix random_orthogonal(Eigen::Index n, RandomStream& rng) {
  Matrix g(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) g(r, c) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < n; ++c) {
    if (r(c, c) < 0.0) q.col(c) = -q.col(c);
  }
  return q;
}

struct GenerationOptions {
  Eigen::Index state_dim = 2;
  Eigen::Index meas_dim = 1;
  double max_eigenvalue = 1.3;
  double noise_lo = 0.2;
  double noise_hi = 1.0;
  bool require_stable = true;
  std::size_t max_attempts = 1000;
};

namespace detail {

inline Matrix random_noise_covariance(Eigen::Index n, const GenerationOptions& o, RandomStream& rng) {
  Vector d(n);
  for (Eigen::Index i = 0; i < n; ++i) d(i) = rng.uniform_open(o.noise_lo, o.noise_hi);
  const Matrix q = random_orthogonal(n, rng);
  return symmetrize(q * d.asDiagonal() * q.transpose());
}

inline ProcessModel random_process(const GenerationOptions& o, RandomStream& rng) {
  const auto n = o.state_dim;
  Vector eig(n);
  for (Eigen::Index i = 0; i < n; ++i) eig(i) = rng.uniform_open(0.0, o.max_eigenvalue);
  const Matrix q = random_orthogonal(n, rng);
  Matrix a = q * eig.asDiagonal() * q.transpose();
  Matrix c(o.meas_dim, n);
  for (Eigen::Index r = 0; r < c.rows(); ++r)
    for (Eigen::Index k = 0; k < n; ++k) c(r, k) = rng.uniform_open(0.0, 1.0);
  Matrix w = random_noise_covariance(n, o, rng);
  Matrix v = random_noise_covariance(o.meas_dim, o, rng);
  return ProcessModel(std::move(a), std::move(c), std::move(w), std::move(v));
}

}  // namespace detail

/// Draws a scenario: eigenvalues of each A uniform on (0, max_eigenvalue)
/// with random orthogonal eigenvectors, C entries uniform on (0, 1), W and V
/// orthogonal conjugations of diagonals uniform on (noise_lo, noise_hi),
/// channel p and q uniform on (0, 1). The whole scenario is redrawn until the
/// models validate and, if required, the stability condition holds.
inline Scenario scenario_generate(std::size_t n_sensors, std::size_t n_channels, std::uint64_t seed,
                                  const GenerationOptions& opts = {}) {
  if (n_channels == 0 || n_channels > n_sensors) throw InvalidArgument("scenario_generate: need N >= M >= 1");
  RandomStream rng = make_stream(CounterRng(seed), Stream::kScenario);
  std::string last_failure = "none";
  for (std::size_t attempt = 0; attempt < opts.max_attempts; ++attempt) {
    try {
      std::vector<ProcessModel> procs;
      procs.reserve(n_sensors);
      for (std::size_t i = 0; i < n_sensors; ++i) procs.push_back(detail::random_process(opts, rng));
      std::vector<ChannelModel> chans;
      for (std::size_t m = 0; m < n_channels; ++m) {
        const double p = rng.uniform_open(0.0, 1.0);
        const double q = rng.uniform_open(0.0, 1.0);
        chans.emplace_back(p, q);
      }
      Scenario s = make_scenario(std::move(procs), std::move(chans), seed);
      if (opts.require_stable && !stability_check(s).satisfied) {
        last_failure = "stability condition violated";
        continue;
      }
      s.metadata["generator"] = "uniform-eigen";
      s.metadata["attempts"] = std::to_string(attempt + 1);
      return s;
    } catch (const ModelError& e) {
      last_failure = e.what();
    } catch (const ConvergenceError& e) {
      last_failure = e.what();
    }
  }
  throw GenerationError("scenario_generate: " + std::to_string(opts.max_attempts) +
                        " consecutive rejections (N=" + std::to_string(n_sensors) +
                        ", M=" + std::to_string(n_channels) + ", seed=" + std::to_string(seed) +
                        "); last failure: " + last_failure);
}

// ---------------------------------------------------------------------------
// File format
//
// {
//   "format": "sensched-scenario", "version": 1, "seed": S,
//   "metadata": {...},
//   "processes": [{"A": [[..],..], "C": ..., "W": ..., "V": ...}, ...],
//   "channels": [{"p": .., "q": ..}, ...],
//   "checksum": "<fnv1a64 hex of the compact dump of every other field>"
// }
// Matrices are arrays of rows. Caches are not stored; they are recomputed.
// ---------------------------------------------------------------------------

inline constexpr const char* kScenarioFormat = "sensched-scenario";
inline constexpr int kScenarioVersion = 1;

namespace detail {

using ojson = nlohmann::ordered_json;

inline ojson matrix_to_json(const Matrix& m) {
  ojson rows = ojson::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    ojson row = ojson::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const ojson& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw MalformedFile("scenario: matrix must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw MalformedFile("scenario: ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw MalformedFile("scenario: matrix entry is not a number");
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace detail

inline std::string scenario_to_string(const Scenario& s) {
  detail::ojson j;
  j["format"] = kScenarioFormat;
  j["version"] = kScenarioVersion;
  j["seed"] = s.seed;
  j["metadata"] = detail::ojson::object();
  for (const auto& [k, v] : s.metadata) j["metadata"][k] = v;
  j["processes"] = detail::ojson::array();
  for (const auto& p : s.processes) {
    detail::ojson pj;
    pj["A"] = detail::matrix_to_json(p.A());
    pj["C"] = detail::matrix_to_json(p.C());
    pj["W"] = detail::matrix_to_json(p.W());
    pj["V"] = detail::matrix_to_json(p.V());
    j["processes"].push_back(std::move(pj));
  }
  j["channels"] = detail::ojson::array();
  for (const auto& c : s.channels) j["channels"].push_back({{"p", c.p}, {"q", c.q}});
  j["checksum"] = detail::hex64(fnv1a64(j.dump()));
  return j.dump(2) + "\n";
}

inline Scenario scenario_from_string(const std::string& text) {
  detail::ojson j;
  try {
    j = detail::ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedFile(std::string("scenario: not valid JSON: ") + e.what());
  }
  try {
    if (!j.is_object() || j.value("format", "") != kScenarioFormat) throw MalformedFile("scenario: missing format tag");
    if (!j.contains("version") || !j["version"].is_number_integer()) throw MalformedFile("scenario: missing version");
    if (j["version"].get<int>() != kScenarioVersion) {
      throw VersionMismatch("scenario: file version " + std::to_string(j["version"].get<int>()) +
                            ", expected " + std::to_string(kScenarioVersion));
    }
    if (!j.contains("checksum") || !j["checksum"].is_string()) throw MalformedFile("scenario: missing checksum");
    const std::string stored = j["checksum"].get<std::string>();
    detail::ojson body = j;
    body.erase("checksum");
    if (detail::hex64(fnv1a64(body.dump())) != stored) throw ChecksumMismatch("scenario: checksum mismatch");

    std::vector<ProcessModel> procs;
    for (const auto& pj : j.at("processes")) {
      procs.emplace_back(detail::matrix_from_json(pj.at("A")), detail::matrix_from_json(pj.at("C")),
                         detail::matrix_from_json(pj.at("W")), detail::matrix_from_json(pj.at("V")));
    }
    std::vector<ChannelModel> chans;
    for (const auto& cj : j.at("channels")) chans.emplace_back(cj.at("p").get<double>(), cj.at("q").get<double>());
    Scenario s = make_scenario(std::move(procs), std::move(chans), j.at("seed").get<std::uint64_t>());
    for (const auto& [k, v] : j.at("metadata").items()) s.metadata[k] = v.get<std::string>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFile(std::string("scenario: ") + e.what());
  } catch (const ModelError& e) {
    throw MalformedFile(std::string("scenario: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw MalformedFile(std::string("scenario: ") + e.what());
  }
}

inline void save_scenario(const Scenario& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << scenario_to_string(s);
  if (!out) throw FormatError("write failed for '" + path + "'");
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return scenario_from_string(buf.str());
}

}  // namespace sensched
