#include "support.hpp"

#include <algorithm>
#include <limits>

#include "cqsat/operators.hpp"

namespace testing_support {

using namespace cqsat;

Matrix basis_projector(int dim, int i) {
  Matrix p = Matrix::Zero(dim, dim);
  p(i, i) = 1.0;
  return p;
}

Matrix plus_projector() { return Matrix::Constant(2, 2, 0.5); }

QuditGraph make_graph(int n, int d, int D, std::vector<std::pair<int, int>> edges) {
  QuditGraph g;
  g.n = n;
  g.d = d;
  g.D = D;
  for (auto& [u, v] : edges)
    if (u > v) std::swap(u, v);
  g.edges = std::move(edges);
  return g;
}

QuditGraph cycle_graph(int n, int d) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
  return make_graph(n, d, 2, edges);
}

QsatInstance make_instance(const QuditGraph& g, std::vector<Matrix> terms, bool projective) {
  QsatInstance inst;
  inst.graph = g;
  inst.terms = std::move(terms);
  inst.metadata.projective = projective;
  return inst;
}

QsatInstance cycle_antiferromagnet(int n) {
  const Matrix q = basis_projector(4, 0) + basis_projector(4, 3);
  return make_instance(cycle_graph(n, 2), std::vector<Matrix>(n, q));
}

QsatInstance random_instance(const QuditGraph& g, Rng& rng) {
  const int dd = g.d * g.d;
  std::vector<Matrix> terms;
  for (std::size_t e = 0; e < g.edges.size(); ++e)
    terms.push_back(rng.projection(dd, 1 + static_cast<int>(rng.below(dd - 1))));
  return make_instance(g, terms);
}

QsatInstance random_diagonal_instance(const QuditGraph& g, int rank, Rng& rng) {
  const int dd = g.d * g.d;
  std::vector<Matrix> terms;
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    std::vector<int> idx(dd);
    for (int i = 0; i < dd; ++i) idx[i] = i;
    rng.shuffle(idx);
    Matrix q = Matrix::Zero(dd, dd);
    for (int k = 0; k < rank; ++k) q(idx[k], idx[k]) = 1.0;
    terms.push_back(q);
  }
  return make_instance(g, terms);
}

double classical_minimum(const QsatInstance& inst) {
  const auto& g = inst.graph;
  long total = 1;
  for (int v = 0; v < g.n; ++v) total *= g.d;
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> x(g.n);
  for (long s = 0; s < total; ++s) {
    long t = s;
    for (int v = g.n - 1; v >= 0; --v) {
      x[v] = static_cast<int>(t % g.d);
      t /= g.d;
    }
    double e = 0.0;
    for (std::size_t k = 0; k < g.edges.size(); ++k) {
      const auto [u, v] = g.edges[k];
      const int i = x[u] * g.d + x[v];
      e += inst.terms[k](i, i).real();
    }
    best = std::min(best, e);
  }
  return best;
}

namespace {

std::vector<int> prime_factors(int s) {
  std::vector<int> out;
  for (int p = 2; p * p <= s; ++p)
    while (s % p == 0) {
      out.push_back(p);
      s /= p;
    }
  if (s > 1) out.push_back(s);
  return out;
}

}  // namespace

TensorNetworkWitness random_witness(const QuditGraph& g, Rng& rng) {
  TensorNetworkWitness w;
  w.graph = g;
  w.structures.resize(g.n);
  w.assignment.blocks.resize(g.n);
  w.residual_states.resize(g.n);
  for (int v = 0; v < g.n; ++v) {
    auto& s = w.structures[v];
    s.vertex = v;
    s.d = g.d;
    s.edges = g.incident(v);
    const int slots = static_cast<int>(s.edges.size());
    // random composition of d into blocks
    std::vector<int> sizes;
    int left = g.d;
    while (left > 0) {
      const int take = 1 + static_cast<int>(rng.below(left));
      sizes.push_back(take);
      left -= take;
    }
    const Matrix u = rng.unitary(g.d);
    int col = 0;
    for (int size : sizes) {
      VertexBlock b;
      b.factor_dims.assign(slots, 1);
      for (int p : prime_factors(size)) {
        const int k = static_cast<int>(rng.below(slots + 1));
        if (k == slots)
          b.residual *= p;
        else
          b.factor_dims[k] *= p;
      }
      b.isometry = u.middleCols(col, size);
      col += size;
      s.blocks.push_back(std::move(b));
    }
    const int pick = static_cast<int>(rng.below(s.blocks.size()));
    w.assignment.blocks[v] = pick;
    w.residual_states[v] = rng.unit_vector(s.blocks[pick].residual);
  }
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const int id = static_cast<int>(e);
    const auto [a, b] = g.edges[e];
    w.edge_states.push_back(rng.unit_vector(w.slot_dim(id, a) * w.slot_dim(id, b)));
  }
  return w;
}

Vector brute_force_state(const TensorNetworkWitness& w) {
  const auto& g = w.graph;
  const int m = static_cast<int>(g.edges.size());
  // radices: one per edge state, then one per residual state
  std::vector<int> radix;
  for (int e = 0; e < m; ++e) radix.push_back(static_cast<int>(w.edge_states[e].size()));
  for (int v = 0; v < g.n; ++v) radix.push_back(static_cast<int>(w.residual_states[v].size()));
  long total = 1;
  for (int r : radix) total *= r;
  long global = 1;
  for (int v = 0; v < g.n; ++v) global *= g.d;

  Vector psi = Vector::Zero(global);
  std::vector<int> digit(radix.size(), 0);
  for (long s = 0; s < total; ++s) {
    long t = s;
    for (std::size_t k = 0; k < radix.size(); ++k) {
      digit[k] = static_cast<int>(t % radix[k]);
      t /= radix[k];
    }
    cplx coeff = 1.0;
    for (int e = 0; e < m; ++e) coeff *= w.edge_states[e](digit[e]);
    for (int v = 0; v < g.n; ++v) coeff *= w.residual_states[v](digit[m + v]);
    if (coeff == cplx(0.0)) continue;
    Vector piece = Vector::Ones(1);
    for (int v = 0; v < g.n; ++v) {
      const auto& s = w.structures[v];
      const VertexBlock& b = w.block(v);
      // row-major virtual index: slot digits in incident order, then residual
      long col = 0;
      for (std::size_t k = 0; k < s.edges.size(); ++k) {
        const int e = s.edges[k];
        const auto [a, bb] = g.edges[e];
        const int kb = w.slot_dim(e, bb);
        const int idx = digit[e];
        const int mine = v == a ? idx / kb : idx % kb;
        col = col * b.factor_dims[k] + mine;
      }
      col = col * b.residual + digit[m + v];
      const Vector column = b.isometry.col(col);
      Vector next(piece.size() * column.size());
      for (Eigen::Index i = 0; i < piece.size(); ++i)
        next.segment(i * column.size(), column.size()) = piece(i) * column;
      piece = std::move(next);
    }
    psi += coeff * piece;
  }
  return psi;
}

Matrix dense_hamiltonian(const QsatInstance& inst) {
  const auto& g = inst.graph;
  long dim = 1;
  for (int v = 0; v < g.n; ++v) dim *= g.d;
  auto digit = [&](long x, int v) {
    for (int k = g.n - 1; k > v; --k) x /= g.d;
    return static_cast<int>(x % g.d);
  };
  Matrix h = Matrix::Zero(dim, dim);
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const auto [u, v] = g.edges[e];
    for (long x = 0; x < dim; ++x)
      for (long y = 0; y < dim; ++y) {
        bool rest_equal = true;
        for (int w = 0; w < g.n && rest_equal; ++w)
          if (w != u && w != v && digit(x, w) != digit(y, w)) rest_equal = false;
        if (!rest_equal) continue;
        const int i = digit(x, u) * g.d + digit(x, v);
        const int j = digit(y, u) * g.d + digit(y, v);
        h(x, y) += inst.terms[e](i, j);
      }
  }
  return h;
}

double dense_energy(const QsatInstance& inst, const Vector& psi) {
  return psi.dot(dense_hamiltonian(inst) * psi).real();
}

double power_iteration_norm(const Matrix& a, int iters) {
  const Matrix m = a.adjoint() * a;
  Rng rng(7);
  Vector x = rng.unit_vector(m.cols());
  double lambda = 0.0;
  for (int k = 0; k < iters; ++k) {
    Vector y = m * x;
    const double n = y.norm();
    if (n == 0.0) return 0.0;
    lambda = x.dot(y).real() / x.squaredNorm();
    x = y / n;
  }
  return std::sqrt(lambda);
}

}  // namespace testing_support
