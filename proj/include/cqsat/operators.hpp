#pragma once

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace cqsat {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

/// Where an operator acts. Tensor factors of a multi-vertex operator are
/// ordered as listed in `vertices` (instance terms always list them in
/// ascending vertex id). An empty vertex list means "abstract".
struct Support {
  std::vector<int> vertices;
  int edge = -1;

  static Support abstract() { return {}; }
  static Support vertex(int v) { return {{v}, -1}; }
  static Support on_edge(int id, int u, int v) { return {{u, v}, id}; }
};

struct Operator {
  Matrix matrix;
  Support support;
};

// ---- elementary kernel -------------------------------------------------

/// Tr(A^dagger B).
cplx frobenius_inner(const Matrix& a, const Matrix& b);
double frobenius_norm(const Matrix& a);
/// Largest singular value.
double operator_norm(const Matrix& a);
Matrix commutator(const Matrix& a, const Matrix& b);
Matrix kron(const Matrix& a, const Matrix& b);

double hermiticity_residual(const Matrix& a);  // ||A - A^dagger||_F
double projector_residual(const Matrix& a);    // ||A^2 - A||_F

Matrix pauli_x();
Matrix pauli_y();
Matrix pauli_z();

/// Pads `a` (whose factors are the vertices of `source`, in that order) with
/// identities on target \ source and reorders factors to the order of
/// `target`. Throws DimensionError when source is not contained in target or
/// a.rows() != d^|source|.
Matrix tensor_embed(const Matrix& a, std::span<const int> source, std::span<const int> target,
                    int d);

/// Applies `a` to the factors at `positions` (in that order) of a tensor
/// product space with factor dimensions `dims`, identity elsewhere.
Matrix embed_on_factors(const Matrix& a, std::span<const int> dims, std::span<const int> positions);

/// Reorders the tensor factors of `a`: factor k of the result is factor
/// perm[k] of the input.
Matrix permute_factors(const Matrix& a, std::span<const int> dims, std::span<const int> perm);

/// (1/dim(traced)) Tr_{others}(a), keeping factors listed in `keep` (in that order).
Matrix partial_trace(const Matrix& a, std::span<const int> dims, std::span<const int> keep);

// ---- operator spaces ---------------------------------------------------

/// Orthonormal (Frobenius) basis of span(family). Directions whose residual
/// after projection falls below rel_tol * (largest input norm) are dropped.
std::vector<Matrix> orthonormal_basis(std::span<const Matrix> family, double rel_tol = 1e-10);

/// Frobenius distance from x to span(basis); basis must be orthonormal.
double distance_to_span(const Matrix& x, std::span<const Matrix> basis);

/// max_F dist(F^dagger, span(family)); zero iff the span is closed under
/// conjugation. Throws Error on an empty family.
double conjugation_closure_residual(std::span<const Matrix> family);

// ---- operator Schmidt decomposition -----------------------------------

enum class PivotSide { Left, Right };

/// One term pivot (x) partner when the pivot is the left factor, partner (x)
/// pivot otherwise. The pivot carries the Schmidt coefficient:
/// ||pivot||_F = lambda, ||partner||_F = 1.
struct SchmidtTerm {
  Matrix pivot;
  Matrix partner;
};

struct SchmidtDecomposition {
  int d = 0;
  PivotSide side = PivotSide::Left;
  std::vector<SchmidtTerm> terms;

  Matrix reconstruct() const;
  std::vector<double> coefficients() const;
  std::vector<Matrix> pivots() const;
  std::vector<Matrix> partners() const;
};

/// Realignment of an operator on C^d (x) C^d: R[(i1 j1), (i2 j2)] =
/// Q[(i1 i2), (j1 j2)] with row-major pair indices. Q = sum A (x) B maps to
/// R = sum vec(A) vec(B)^T, so the operator Schmidt decomposition is the SVD
/// of R.
Matrix realign(const Matrix& q, int d);
Matrix unrealign(const Matrix& r, int d);

/// SVD of the realignment. Singular values below rank_cutoff * sigma_max are
/// dropped. Phases are fixed so the largest-modulus entry of every partner is
/// real and positive. Throws DimensionError unless q is d^2 x d^2.
SchmidtDecomposition schmidt_decompose(const Matrix& q, int d, PivotSide side,
                                       double rank_cutoff = 1e-12);

}  // namespace cqsat
