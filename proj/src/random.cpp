#include "cqsat/random.hpp"

#include <cmath>
#include <cstdlib>
#include <numbers>

#include "cqsat/parallel.hpp"

namespace cqsat {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view stage, std::uint64_t index) {
  // FNV-1a over the stage name
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : stage) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(master ^ splitmix64(h) ^ splitmix64(index + 1));
}

unsigned default_workers() {
  if (const char* env = std::getenv("CQSAT_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1 && v <= 1024) return static_cast<unsigned>(v);
  }
  return 1;
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::size_t Rng::below(std::size_t bound) {
  // rejection sampling keeps the result unbiased
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
  has_spare_ = true;
  return r * std::cos(2.0 * std::numbers::pi * u2);
}

std::complex<double> Rng::complex_normal() {
  const double re = normal();
  const double im = normal();
  return {re * std::numbers::sqrt2 / 2.0, im * std::numbers::sqrt2 / 2.0};
}

Eigen::MatrixXcd Rng::ginibre(Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXcd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = complex_normal();
  return m;
}

Eigen::MatrixXcd Rng::hermitian(Eigen::Index dim) {
  const Eigen::MatrixXcd g = ginibre(dim, dim);
  return (g + g.adjoint()) / 2.0;
}

Eigen::MatrixXcd Rng::unitary(Eigen::Index dim) {
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(ginibre(dim, dim));
  Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(dim, dim);
  const Eigen::MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < dim; ++j) {
    const std::complex<double> diag = r(j, j);
    if (std::abs(diag) > 0) q.col(j) *= diag / std::abs(diag);
  }
  return q;
}

Eigen::VectorXcd Rng::unit_vector(Eigen::Index dim) {
  Eigen::VectorXcd v = ginibre(dim, 1).col(0);
  return v / v.norm();
}

Eigen::MatrixXcd Rng::projection(Eigen::Index dim, Eigen::Index rank) {
  if (rank <= 0) return Eigen::MatrixXcd::Zero(dim, dim);
  if (rank >= dim) return Eigen::MatrixXcd::Identity(dim, dim);
  const Eigen::MatrixXcd u = unitary(dim).leftCols(rank);
  return u * u.adjoint();
}

}  // namespace cqsat
