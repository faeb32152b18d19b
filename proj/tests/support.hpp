#pragma once

#include <cstdint>
#include <vector>

#include "cqsat/instance.hpp"
#include "cqsat/random.hpp"
#include "cqsat/witness.hpp"

namespace testing_support {

using cqsat::Matrix;
using cqsat::Vector;

Matrix basis_projector(int dim, int i);
Matrix plus_projector();

cqsat::QuditGraph make_graph(int n, int d, int D, std::vector<std::pair<int, int>> edges);
cqsat::QuditGraph cycle_graph(int n, int d);
cqsat::QsatInstance make_instance(const cqsat::QuditGraph& g, std::vector<Matrix> terms,
                                  bool projective = true);

/// Antiferromagnet on an n-cycle: every edge term is |00><00| + |11><11|.
cqsat::QsatInstance cycle_antiferromagnet(int n);

/// Random projection of random rank 1 .. d^2 - 1 on every edge.
cqsat::QsatInstance random_instance(const cqsat::QuditGraph& g, cqsat::Rng& rng);

/// Random diagonal projection of the given rank on every edge.
cqsat::QsatInstance random_diagonal_instance(const cqsat::QuditGraph& g, int rank, cqsat::Rng& rng);

/// Min over all classical assignments of a diagonal instance's energy.
double classical_minimum(const cqsat::QsatInstance& inst);

/// Witness with random blocks, factorizations, isometries and states.
cqsat::TensorNetworkWitness random_witness(const cqsat::QuditGraph& g, cqsat::Rng& rng);

/// Global amplitude vector of a witness by summing over all virtual indices.
Vector brute_force_state(const cqsat::TensorNetworkWitness& w);

/// <psi| H |psi> with H built as a dense matrix.
double dense_energy(const cqsat::QsatInstance& inst, const Vector& psi);
Matrix dense_hamiltonian(const cqsat::QsatInstance& inst);

/// Largest singular value by power iteration on A^dagger A.
double power_iteration_norm(const Matrix& a, int iters = 2000);

}  // namespace testing_support
