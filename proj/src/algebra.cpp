#include "cqsat/algebra.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "cqsat/error.hpp"
#include "cqsat/parallel.hpp"
#include "cqsat/random.hpp"

namespace cqsat {

namespace {

// Adds the part of x orthogonal to the basis when it exceeds rel_tol * scale.
// scale defaults to ||x||; products pass ||a|| ||b|| so that roundoff in a
// vanishing product is not mistaken for a new direction.
bool extend_basis(std::vector<Matrix>& basis, const Matrix& x, double rel_tol, double scale = -1.0) {
  const double nx = x.norm();
  if (nx == 0.0) return false;
  if (scale < nx) scale = nx;
  Matrix r = x;
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& b : basis) r -= frobenius_inner(b, r) * b;
  const double nr = r.norm();
  if (nr <= rel_tol * scale) return false;
  basis.push_back(r / nr);
  return true;
}

using Clusters = std::vector<std::pair<int, int>>;  // [begin, end) into sorted eigenvalues

// Splits ascending eigenvalues at gaps above `gap`. Gaps inside (gap/100, gap]
// are ambiguous and yield nullopt.
std::optional<Clusters> cluster_eigenvalues(const Eigen::VectorXd& values, double gap) {
  Clusters out;
  int begin = 0;
  for (int i = 1; i < values.size(); ++i) {
    const double g = values(i) - values(i - 1);
    if (g > gap) {
      out.push_back({begin, i});
      begin = i;
    } else if (g > gap * 1e-2) {
      return std::nullopt;
    }
  }
  out.push_back({begin, static_cast<int>(values.size())});
  return out;
}

Matrix random_hermitian_element(std::span<const Matrix> basis, Rng& rng) {
  const Eigen::Index n = basis.empty() ? 0 : basis.front().rows();
  Matrix h = Matrix::Zero(n, n);
  for (const auto& b : basis) {
    h += rng.normal() * (b + b.adjoint()) / 2.0;
    h += rng.normal() * cplx(0, 1) * (b - b.adjoint()) / 2.0;
  }
  return h;
}

struct Spectrum {
  Eigen::VectorXd values;
  Matrix vectors;
  Clusters clusters;
};

// Eigen-decomposition of a random Hermitian element, normalized to unit
// spectral radius, with clustered eigenvalues. Retries on ambiguous gaps.
std::optional<Spectrum> clustered_element(std::span<const Matrix> basis, Rng& rng, double gap,
                                         int attempts = 6) {
  for (int attempt = 0; attempt < attempts; ++attempt) {
    const Matrix h = random_hermitian_element(basis, rng);
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    Spectrum out;
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors();
    const double radius = out.values.cwiseAbs().maxCoeff();
    if (radius > 0.0) out.values /= radius;
    auto clusters = cluster_eigenvalues(out.values, gap);
    if (!clusters) continue;
    out.clusters = std::move(*clusters);
    return out;
  }
  return std::nullopt;
}

struct Peel {
  Matrix unitary;  // columns: (i, s) -> i * r + s
  int k = 1;
  int r = 1;
};

// Splits C^m = C^k (x) C^r so that the algebra (spanned by `basis`, which
// must be isomorphic to M_k (x) 1_r) acts on the first factor.
Peel peel_factor(std::span<const Matrix> basis, int m, Rng& rng, const AlgebraTolerances& tol) {
  Peel out;
  const int dim = static_cast<int>(basis.size());
  const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(dim))));
  if (k * k != dim || m % k != 0) {
    std::ostringstream os;
    os << "block_decompose_vertex: restricted edge algebra has dimension " << dim
       << " on a block of dimension " << m << ", which is not of the form M_k (x) 1";
    throw Error(os.str());
  }
  out.k = k;
  out.r = m / k;
  if (k == 1) {
    out.unitary = Matrix::Identity(m, m);
    return out;
  }
  const int r = out.r;
  std::optional<Spectrum> es;
  for (int attempt = 0; attempt < 6 && !es; ++attempt) {
    es = clustered_element(basis, rng, tol.cluster_gap, 1);
    if (!es) continue;
    bool ok = static_cast<int>(es->clusters.size()) == k;
    for (const auto& c : es->clusters) ok = ok && c.second - c.first == r;
    if (!ok) es.reset();
  }
  if (!es) {
    std::ostringstream os;
    os << "block_decompose_vertex: could not split a factor of dimension " << k
       << " (eigenvalue clusters ambiguous at gap " << tol.cluster_gap
       << "); try adjusting the cluster gap";
    throw Error(os.str());
  }
  std::vector<Matrix> y;
  for (const auto& c : es->clusters) y.push_back(es->vectors.middleCols(c.first, r));

  for (int attempt = 0;; ++attempt) {
    if (attempt == 6)
      throw Error("block_decompose_vertex: could not build matrix units for a factor");
    Matrix x = Matrix::Zero(m, m);
    for (const auto& b : basis) x += rng.complex_normal() * b;
    std::vector<Matrix> aligned{y[0]};
    bool ok = true;
    for (int j = 1; j < k && ok; ++j) {
      const Matrix s = y[0].adjoint() * x * y[j];
      if (s.norm() < 1e-6 * x.norm()) {
        ok = false;
        break;
      }
      Eigen::JacobiSVD<Matrix> svd(s, Eigen::ComputeFullU | Eigen::ComputeFullV);
      const Matrix u = svd.matrixU() * svd.matrixV().adjoint();
      aligned.push_back(y[j] * u.adjoint());
    }
    if (!ok) continue;
    out.unitary.resize(m, m);
    for (int i = 0; i < k; ++i) out.unitary.middleCols(i * r, r) = aligned[i];
    return out;
  }
}

}  // namespace

double MatrixAlgebra::closure_residual() const {
  double worst = 0.0;
  for (const auto& a : basis) {
    worst = std::max(worst, distance_to_span(a.adjoint(), basis));
    for (const auto& b : basis) worst = std::max(worst, distance_to_span(a * b, basis));
  }
  return worst;
}

MatrixAlgebra close_algebra(std::span<const Matrix> generators, double rel_tol) {
  MatrixAlgebra alg;
  if (generators.empty()) throw Error("close_algebra: at least one generator is required to fix d");
  alg.d = static_cast<int>(generators.front().rows());
  for (const auto& g : generators)
    if (g.rows() != alg.d || g.cols() != alg.d)
      throw DimensionError("close_algebra: generators of different dimensions");
  extend_basis(alg.basis, Matrix::Identity(alg.d, alg.d), rel_tol);
  for (const auto& g : generators) {
    extend_basis(alg.basis, g, rel_tol);
    extend_basis(alg.basis, g.adjoint(), rel_tol);
  }
  const std::size_t full = static_cast<std::size_t>(alg.d) * alg.d;
  for (std::size_t done = 0; done < alg.basis.size() && alg.basis.size() < full;) {
    // products of the newest element with everything before it, both orders
    const std::size_t j = done++;
    for (std::size_t i = 0; i <= j && alg.basis.size() < full; ++i) {
      const Matrix a = alg.basis[i];
      const Matrix b = alg.basis[j];
      extend_basis(alg.basis, a * b, rel_tol, 1.0);  // basis elements have unit norm
      extend_basis(alg.basis, b * a, rel_tol, 1.0);
      extend_basis(alg.basis, b.adjoint(), rel_tol);
    }
  }
  const double residual = alg.closure_residual();
  alg.unital = distance_to_span(Matrix::Identity(alg.d, alg.d), alg.basis) <= 1e-10;
  alg.product_closed = residual <= 1e-10;
  double dagger = 0.0;
  for (const auto& b : alg.basis) dagger = std::max(dagger, distance_to_span(b.adjoint(), alg.basis));
  alg.dagger_closed = dagger <= 1e-10;
  return alg;
}

std::vector<Matrix> center_basis(const MatrixAlgebra& algebra, double rel_tol) {
  const int k = algebra.dim();
  if (k == 0) return {};
  const Eigen::Index d2 = static_cast<Eigen::Index>(algebra.d) * algebra.d;
  Matrix map(d2 * k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      const Matrix c = commutator(algebra.basis[i], algebra.basis[j]);
      map.block(j * d2, i, d2, 1) = Eigen::Map<const Vector>(c.data(), d2);
    }
  Eigen::JacobiSVD<Matrix> svd(map, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double top = std::max(s.size() ? s(0) : 0.0, 1.0);
  std::vector<Matrix> center;
  for (int c = 0; c < k; ++c) {
    const double sigma = c < s.size() ? s(c) : 0.0;
    if (sigma > rel_tol * top) continue;
    Matrix z = Matrix::Zero(algebra.d, algebra.d);
    for (int i = 0; i < k; ++i) z += svd.matrixV()(i, c) * algebra.basis[i];
    center.push_back(z);
  }
  return center;
}

int VertexBlock::dim() const { return static_cast<int>(isometry.cols()); }

std::vector<int> VertexBlock::virtual_dims() const {
  std::vector<int> dims = factor_dims;
  dims.push_back(residual);
  return dims;
}

VertexStructure block_decompose_vertex(std::span<const MatrixAlgebra> edge_algebras,
                                       std::uint64_t seed, const AlgebraTolerances& tol) {
  if (edge_algebras.empty()) throw Error("block_decompose_vertex: no edge algebras");
  const int d = edge_algebras.front().d;
  for (const auto& a : edge_algebras)
    if (a.d != d) throw DimensionError("block_decompose_vertex: algebras of different dimensions");

  for (std::size_t i = 0; i < edge_algebras.size(); ++i)
    for (std::size_t j = i + 1; j < edge_algebras.size(); ++j) {
      double worst = 0.0;
      for (const auto& a : edge_algebras[i].basis)
        for (const auto& b : edge_algebras[j].basis) worst = std::max(worst, commutator(a, b).norm());
      if (worst > tol.premise) {
        std::ostringstream os;
        os << "block_decompose_vertex: edge algebras " << i << " and " << j
           << " do not commute (residual " << worst << " > " << tol.premise << ")";
        throw Error(os.str());
      }
    }

  Rng rng(seed);
  std::vector<Matrix> central;
  for (const auto& a : edge_algebras)
    for (auto& z : center_basis(a)) central.push_back(std::move(z));
  const auto es = clustered_element(central, rng, tol.cluster_gap);
  if (!es) {
    std::ostringstream os;
    os << "block_decompose_vertex: central eigenvalue clusters are ambiguous at gap "
       << tol.cluster_gap << "; consider adjusting the cluster gap";
    throw Error(os.str());
  }

  VertexStructure out;
  out.d = d;
  for (const auto& c : es->clusters) {
    const int m = c.second - c.first;
    const Matrix p = es->vectors.middleCols(c.first, m);
    // restricted algebras on the current (not yet factored) space
    std::vector<std::vector<Matrix>> restricted;
    for (const auto& a : edge_algebras) {
      std::vector<Matrix> r;
      for (const auto& b : a.basis) r.push_back(p.adjoint() * b * p);
      restricted.push_back(orthonormal_basis(r, tol.closure));
    }
    VertexBlock block;
    Matrix iso = p;
    int prefix = 1;
    int space = m;
    for (std::size_t e = 0; e < restricted.size(); ++e) {
      const Peel peel = peel_factor(restricted[e], space, rng, tol);
      block.factor_dims.push_back(peel.k);
      iso = iso * kron(Matrix::Identity(prefix, prefix), peel.unitary);
      const std::vector<int> dims{peel.k, peel.r};
      const std::vector<int> keep{1};
      for (std::size_t f = e + 1; f < restricted.size(); ++f) {
        std::vector<Matrix> reduced;
        for (const auto& b : restricted[f])
          reduced.push_back(partial_trace(peel.unitary.adjoint() * b * peel.unitary, dims, keep));
        restricted[f] = orthonormal_basis(reduced, tol.closure);
      }
      prefix *= peel.k;
      space = peel.r;
    }
    block.residual = space;
    block.isometry = std::move(iso);
    out.blocks.push_back(std::move(block));
  }

  const StructureCheck check = check_structure(out, edge_algebras);
  if (check.faithful > tol.reconstruction || check.orthonormality > 1e-10 ||
      check.completeness > 1e-10 || !check.dims_consistent) {
    std::ostringstream os;
    os << "block_decompose_vertex: decomposition does not reproduce the algebras (faithful "
       << check.faithful << ", orthonormality " << check.orthonormality << ", completeness "
       << check.completeness << ")";
    throw Error(os.str());
  }
  return out;
}

StructureCheck check_structure(const VertexStructure& structure,
                               std::span<const MatrixAlgebra> edge_algebras) {
  StructureCheck check;
  const int d = structure.d;
  Matrix sum = Matrix::Zero(d, d);
  for (std::size_t b = 0; b < structure.blocks.size(); ++b) {
    const auto& blk = structure.blocks[b];
    const Matrix& v = blk.isometry;
    if (v.rows() != d) {
      check.dims_consistent = false;
      continue;
    }
    sum += v * v.adjoint();
    check.orthonormality = std::max(
        check.orthonormality, (v.adjoint() * v - Matrix::Identity(v.cols(), v.cols())).norm());
    for (std::size_t c = b + 1; c < structure.blocks.size(); ++c)
      check.orthonormality =
          std::max(check.orthonormality, (v.adjoint() * structure.blocks[c].isometry).norm());
    int prod = blk.residual;
    for (int k : blk.factor_dims) prod *= k;
    if (prod != blk.dim() || blk.factor_dims.size() != edge_algebras.size()) {
      check.dims_consistent = false;
      continue;
    }
    const std::vector<int> dims = blk.virtual_dims();
    for (std::size_t e = 0; e < edge_algebras.size(); ++e) {
      const std::vector<int> pos{static_cast<int>(e)};
      for (const auto& a : edge_algebras[e].basis) {
        const Matrix t = v.adjoint() * a * v;
        const Matrix x = partial_trace(t, dims, pos);
        check.faithful = std::max(check.faithful, (t - embed_on_factors(x, dims, pos)).norm());
        for (std::size_t c = 0; c < structure.blocks.size(); ++c)
          if (c != b)
            check.faithful =
                std::max(check.faithful, (structure.blocks[c].isometry.adjoint() * a * v).norm());
      }
    }
  }
  check.completeness = (sum - Matrix::Identity(d, d)).norm();
  return check;
}

std::vector<MatrixAlgebra> vertex_edge_algebras(const QsatInstance& instance, int vertex,
                                                double rel_tol) {
  const auto& g = instance.graph;
  std::vector<MatrixAlgebra> out;
  for (int e : g.incident(vertex)) {
    const PivotSide side = g.edges[e].first == vertex ? PivotSide::Left : PivotSide::Right;
    auto pivots = schmidt_decompose(instance.terms[e], g.d, side).pivots();
    if (pivots.empty()) pivots.push_back(Matrix::Identity(g.d, g.d));
    out.push_back(close_algebra(pivots, rel_tol));
  }
  return out;
}

std::vector<VertexStructure> decompose_instance(const QsatInstance& instance, std::uint64_t seed,
                                                const AlgebraTolerances& tol, unsigned workers) {
  return parallel_map(static_cast<std::size_t>(instance.graph.n), workers, [&](std::size_t v) {
    const int vertex = static_cast<int>(v);
    const auto algebras = vertex_edge_algebras(instance, vertex, tol.closure);
    VertexStructure s;
    try {
      s = block_decompose_vertex(algebras, derive_seed(seed, "algebra", v), tol);
    } catch (const Error& e) {
      throw Error("vertex " + std::to_string(vertex) + ": " + e.what());
    }
    s.vertex = vertex;
    s.edges = instance.graph.incident(vertex);
    return s;
  });
}

}  // namespace cqsat
