#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace cqsat {

/// Counter-based seed derivation. A stage/instance seed is
/// splitmix64(master ^ splitmix64(hash(stage)) ^ splitmix64(index + 1)), so
/// every random stream is a pure function of (master seed, stage name, index)
/// and never of scheduling order.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, std::string_view stage, std::uint64_t index = 0);

/// mt19937_64 engine with portable transforms. The std distributions are
/// implementation-defined, which would break byte-level reproducibility
/// across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform();                          // [0, 1)
  double uniform(double lo, double hi);
  std::size_t below(std::size_t bound);      // [0, bound)
  double normal();
  std::complex<double> complex_normal();     // E|z|^2 = 1

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

  Eigen::MatrixXcd ginibre(Eigen::Index rows, Eigen::Index cols);
  /// GUE-distributed Hermitian matrix.
  Eigen::MatrixXcd hermitian(Eigen::Index dim);
  /// Haar-random unitary (QR of a Ginibre matrix with phase fix).
  Eigen::MatrixXcd unitary(Eigen::Index dim);
  /// Random unit vector.
  Eigen::VectorXcd unit_vector(Eigen::Index dim);
  /// Projection onto a uniformly random subspace of the given rank.
  Eigen::MatrixXcd projection(Eigen::Index dim, Eigen::Index rank);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cqsat
