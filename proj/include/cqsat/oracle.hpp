#pragma once

#include <cstddef>
#include <cstdint>

#include "cqsat/instance.hpp"
#include "cqsat/rounding.hpp"
#include "cqsat/witness.hpp"

namespace cqsat {

/// Amplitudes in lexicographic vertex order, vertex 0 most significant.
struct GlobalState {
  int n = 0;
  int d = 0;
  Vector amplitudes;
};

inline constexpr std::size_t kDefaultOracleCap = std::size_t{1} << 14;

struct OracleOptions {
  std::size_t cap = kDefaultOracleCap;  // max basis states
  double residual_tol = 1e-8;           // ||H psi - E psi||
  int krylov_dim = 80;
  int max_restarts = 200;
  std::size_t dense_limit = 256;        // dense diagonalization up to this size
  std::uint64_t seed = 0x5eed;
  unsigned workers = 1;
};

struct GroundState {
  double energy = 0.0;
  GlobalState state;
  double residual = 0.0;
};

/// H psi with H = sum of embedded terms, applied term by term.
Vector apply_hamiltonian(const QsatInstance& instance, const Vector& psi, unsigned workers = 1);

/// Smallest eigenvalue of H by restarted Lanczos with full
/// reorthogonalization (dense solve for small spaces). Throws Error when
/// d^n exceeds options.cap.
GroundState exact_ground_energy(const QsatInstance& instance, const OracleOptions& options = {});

/// <psi|H|psi>. Throws Error above the cap, on a norm deviation > 1e-8, or
/// when the imaginary part exceeds 1e-10.
double state_energy(const GlobalState& state, const QsatInstance& instance,
                    std::size_t cap = kDefaultOracleCap, unsigned workers = 1);

/// Global vector of a witness: the product of edge and residual states,
/// mapped through every vertex isometry.
GlobalState expand_witness(const TensorNetworkWitness& witness, std::size_t cap = kDefaultOracleCap);

struct OracleRounding {
  VertexFamily family;
  double displacement = 0.0;  // max_{i,alpha} ||A - a||_F
  double residual = 0.0;      // max cross-group commutator
  int best_restart = -1;
};

struct NearestCommutingOptions {
  int restarts = 64;
  std::uint64_t seed = 0x0dac1e5;
  double noise = 0.05;            // relative size of the restart perturbation
  double target_residual = 1e-10;
};

/// Best-of-restarts penalty descent over unconstrained operator families
/// followed by a commutator-only Levenberg-Marquardt polish. Reference
/// upper bound for rounding quality; returns the best family found.
OracleRounding oracle_nearest_commuting(const VertexFamily& family,
                                        const NearestCommutingOptions& options = {});

}  // namespace cqsat
