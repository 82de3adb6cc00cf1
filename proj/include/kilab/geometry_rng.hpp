#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kilab/errors.hpp"

namespace kilab {

/// Labels appended to a SeedPath to separate the random draws of one cell.
enum class Purpose : std::uint64_t {
  design_points = 1,
  noise = 2,
  target_axis = 3,
  mc_test_points = 4,
  generic = 5,
};

/// Deterministic address of a random substream: a master seed plus labels.
///
/// The stream is a pure function of (master_seed, path). Streams are derived by
/// hashing, never by advancing a shared generator, so cells can run in any
/// order or on any number of workers.
class SeedPath {
 public:
  SeedPath() = default;
  explicit SeedPath(std::uint64_t master_seed, std::vector<std::uint64_t> path = {})
      : master_seed_(master_seed), path_(std::move(path)) {}

  [[nodiscard]] SeedPath child(std::uint64_t label) const {
    auto next = path_;
    next.push_back(label);
    return SeedPath(master_seed_, std::move(next));
  }
  [[nodiscard]] SeedPath child(Purpose purpose) const {
    return child(static_cast<std::uint64_t>(purpose));
  }

  [[nodiscard]] std::uint64_t master_seed() const { return master_seed_; }
  [[nodiscard]] const std::vector<std::uint64_t>& path() const { return path_; }

  /// 64-bit key of the substream.
  [[nodiscard]] std::uint64_t key() const {
    std::uint64_t h = splitmix64(master_seed_ ^ 0x6b696c6162ULL);
    for (std::uint64_t label : path_) {
      h = splitmix64(h ^ splitmix64(label + 0x9e3779b97f4a7c15ULL));
    }
    return h;
  }

  [[nodiscard]] std::mt19937_64 engine() const {
    const std::uint64_t k = key();
    std::seed_seq seq{static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32),
                      static_cast<std::uint32_t>(path_.size())};
    return std::mt19937_64(seq);
  }

  /// "master/l1/l2/..." for logs and CSV rows.
  [[nodiscard]] std::string to_string() const {
    std::string out = std::to_string(master_seed_);
    for (std::uint64_t label : path_) {
      out += '/';
      out += std::to_string(label);
    }
    return out;
  }

  friend bool operator==(const SeedPath&, const SeedPath&) = default;

  static constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  std::uint64_t master_seed_ = 0;
  std::vector<std::uint64_t> path_;
};

/// n points on the unit sphere S^d, stored as rows of an n x (d+1) matrix.
struct SpherePoints {
  int d = 0;
  Eigen::MatrixXd coordinates;

  [[nodiscard]] Eigen::Index count() const { return coordinates.rows(); }
  [[nodiscard]] int ambient_dim() const { return d + 1; }

  /// Matrix of pairwise inner products, clamped to [-1, 1].
  [[nodiscard]] Eigen::MatrixXd gram() const {
    Eigen::MatrixXd g = coordinates * coordinates.transpose();
    g = g.cwiseMax(-1.0).cwiseMin(1.0);
    g.diagonal().setOnes();
    return g;
  }

  /// Inner products between these points (rows) and `other` (columns).
  [[nodiscard]] Eigen::MatrixXd cross_gram(const SpherePoints& other) const {
    require(other.d == d, "sphere dimension mismatch");
    Eigen::MatrixXd g = coordinates * other.coordinates.transpose();
    return g.cwiseMax(-1.0).cwiseMin(1.0);
  }
};

/// Uniform i.i.d. points on S^d: normalized standard Gaussian vectors in R^{d+1}.
inline SpherePoints sample_sphere(int d, Eigen::Index n, const SeedPath& seed) {
  require(d >= 1, "sample_sphere: dimension d must be >= 1");
  require(n >= 1, "sample_sphere: count n must be >= 1");
  auto engine = seed.engine();
  std::normal_distribution<double> normal(0.0, 1.0);
  SpherePoints points;
  points.d = d;
  points.coordinates.resize(n, d + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    double norm_sq = 0.0;
    do {
      for (int j = 0; j <= d; ++j) {
        const double z = normal(engine);
        points.coordinates(i, j) = z;
      }
      norm_sq = points.coordinates.row(i).squaredNorm();
    } while (norm_sq < 1e-300);
    points.coordinates.row(i) /= std::sqrt(norm_sq);
  }
  return points;
}

/// Gaussian observation noise with the given variance.
inline Eigen::VectorXd sample_noise(Eigen::Index n, double sigma2, const SeedPath& seed) {
  require(sigma2 >= 0.0, "sample_noise: sigma2 must be >= 0");
  require(n >= 0, "sample_noise: negative count");
  Eigen::VectorXd eps = Eigen::VectorXd::Zero(n);
  if (sigma2 == 0.0) return eps;
  auto engine = seed.engine();
  std::normal_distribution<double> normal(0.0, std::sqrt(sigma2));
  for (Eigen::Index i = 0; i < n; ++i) eps(i) = normal(engine);
  return eps;
}

/// Uniform direction on S^d (a single sphere sample).
inline Eigen::VectorXd sample_direction(int d, const SeedPath& seed) {
  return sample_sphere(d, 1, seed).coordinates.row(0).transpose();
}

}  // namespace kilab
