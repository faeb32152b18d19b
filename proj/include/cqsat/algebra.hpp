#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cqsat/instance.hpp"
#include "cqsat/operators.hpp"

namespace cqsat {

/// A unital *-subalgebra of M_d, stored as an orthonormal Frobenius basis.
struct MatrixAlgebra {
  int d = 0;
  std::vector<Matrix> basis;
  bool unital = false;
  bool dagger_closed = false;
  bool product_closed = false;

  int dim() const { return static_cast<int>(basis.size()); }
  /// max over basis pairs of dist(b_i b_j, span) and over b of dist(b^dagger, span).
  double closure_residual() const;
};

/// Smallest unital *-algebra containing the generators: the span of
/// {1, generators, daggers} is grown by products and daggers until its
/// dimension stops changing. Directions below rel_tol are treated as noise.
MatrixAlgebra close_algebra(std::span<const Matrix> generators, double rel_tol = 1e-8);

/// Orthonormal basis of the center (null space of Z -> ([Z, b_j])_j).
std::vector<Matrix> center_basis(const MatrixAlgebra& algebra, double rel_tol = 1e-7);

struct AlgebraTolerances {
  double premise = 1e-9;         // max cross commutator between edge algebras
  double cluster_gap = 1e-6;     // eigenvalue gap separating blocks / matrix units
  double reconstruction = 1e-8;  // faithful-action residual
  double closure = 1e-8;         // rel_tol of close_algebra
};

/// One block of the vertex space. The isometry maps the virtual space
/// C^{k_1} (x) ... (x) C^{k_D} (x) C^{residual} (row-major index, slots in
/// incident-edge order) into C^d.
struct VertexBlock {
  Matrix isometry;
  std::vector<int> factor_dims;
  int residual = 1;

  int dim() const;
  /// Tensor dims of the virtual space: factor_dims followed by residual.
  std::vector<int> virtual_dims() const;
};

struct VertexStructure {
  int vertex = -1;
  int d = 0;
  std::vector<int> edges;  // incident edge ids, ascending = slot order
  std::vector<VertexBlock> blocks;
};

struct StructureCheck {
  double completeness = 0.0;    // ||sum_b V_b V_b^dagger - 1||_F
  double orthonormality = 0.0;  // max_b ||V_b^dagger V_b - 1||_F and max ||V_b^dagger V_b'||_F
  double faithful = 0.0;        // max reconstruction residual over algebras, basis elements, blocks
  bool dims_consistent = true;  // prod(factor dims) * residual == block dim
};

/// Common block decomposition of pairwise commuting edge algebras at one
/// vertex, with one tensor factor per algebra inside every block. `seed`
/// fixes the random central element and the generic elements used for
/// matrix units. Throws Error when the commutation premise fails, when
/// eigenvalue clusters are ambiguous, or when the result does not reproduce
/// the algebras.
VertexStructure block_decompose_vertex(std::span<const MatrixAlgebra> edge_algebras,
                                       std::uint64_t seed, const AlgebraTolerances& tol = {});

StructureCheck check_structure(const VertexStructure& structure,
                               std::span<const MatrixAlgebra> edge_algebras);

/// Algebras generated by the vertex-side Schmidt factors of each incident term.
std::vector<MatrixAlgebra> vertex_edge_algebras(const QsatInstance& instance, int vertex,
                                                double rel_tol = 1e-8);

/// Decomposes every vertex; vertex v uses derive_seed(seed, "algebra", v).
std::vector<VertexStructure> decompose_instance(const QsatInstance& instance, std::uint64_t seed,
                                                const AlgebraTolerances& tol = {},
                                                unsigned workers = 1);

}  // namespace cqsat
