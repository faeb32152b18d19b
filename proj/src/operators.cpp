#include "cqsat/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cqsat/error.hpp"

namespace cqsat {

namespace {

void require_same_dim(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream os;
    os << what << ": dimension mismatch (" << a.rows() << "x" << a.cols() << " vs " << b.rows()
       << "x" << b.cols() << ")";
    throw DimensionError(os.str());
  }
}

long ipow(long base, int exp) {
  long r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

// Mixed-radix digits, most significant first.
void to_digits(long index, std::span<const int> dims, std::vector<int>& digits) {
  digits.resize(dims.size());
  for (std::size_t k = dims.size(); k-- > 0;) {
    digits[k] = static_cast<int>(index % dims[k]);
    index /= dims[k];
  }
}

long from_digits(std::span<const int> digits, std::span<const int> dims) {
  long index = 0;
  for (std::size_t k = 0; k < dims.size(); ++k) index = index * dims[k] + digits[k];
  return index;
}

}  // namespace

cplx frobenius_inner(const Matrix& a, const Matrix& b) {
  require_same_dim(a, b, "frobenius_inner");
  return (a.conjugate().cwiseProduct(b)).sum();
}

double frobenius_norm(const Matrix& a) { return a.norm(); }

double operator_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  if (a.rows() == a.cols()) {
    const double scale = std::max(a.norm(), 1e-300);
    // Hermitian and anti-Hermitian inputs (commutators of Hermitian terms)
    // take the cheaper eigenvalue path.
    if ((a - a.adjoint()).norm() <= 1e-14 * scale) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
      return es.eigenvalues().cwiseAbs().maxCoeff();
    }
    if ((a + a.adjoint()).norm() <= 1e-14 * scale) {
      Matrix h = cplx(0, 1) * a;
      Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
      return es.eigenvalues().cwiseAbs().maxCoeff();
    }
  }
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues()(0);
}

Matrix commutator(const Matrix& a, const Matrix& b) {
  require_same_dim(a, b, "commutator");
  if (a.rows() != a.cols()) throw DimensionError("commutator: operands must be square");
  return a * b - b * a;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

double hermiticity_residual(const Matrix& a) { return (a - a.adjoint()).norm(); }

double projector_residual(const Matrix& a) { return (a * a - a).norm(); }

Matrix pauli_x() {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

Matrix pauli_y() {
  Matrix m(2, 2);
  m << 0, cplx(0, -1), cplx(0, 1), 0;
  return m;
}

Matrix pauli_z() {
  Matrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

Matrix embed_on_factors(const Matrix& a, std::span<const int> dims, std::span<const int> positions) {
  const int k = static_cast<int>(dims.size());
  const int s = static_cast<int>(positions.size());
  std::vector<int> dims_s(s);
  for (int p = 0; p < s; ++p) dims_s[p] = dims[positions[p]];
  std::vector<int> free_positions, dims_f;
  for (int j = 0; j < k; ++j)
    if (std::find(positions.begin(), positions.end(), j) == positions.end()) {
      free_positions.push_back(j);
      dims_f.push_back(dims[j]);
    }
  const long dim_s = std::accumulate(dims_s.begin(), dims_s.end(), 1L, std::multiplies<>());
  const long dim_free = std::accumulate(dims_f.begin(), dims_f.end(), 1L, std::multiplies<>());
  if (a.rows() != dim_s || a.cols() != dim_s)
    throw DimensionError("embed_on_factors: operator dimension does not match its factors");

  Matrix out = Matrix::Zero(dim_s * dim_free, dim_s * dim_free);
  std::vector<int> row(k), col(k), ds, fs;
  for (long f = 0; f < dim_free; ++f) {
    to_digits(f, dims_f, fs);
    for (std::size_t p = 0; p < free_positions.size(); ++p) row[free_positions[p]] = fs[p];
    for (long i = 0; i < dim_s; ++i) {
      to_digits(i, dims_s, ds);
      for (int p = 0; p < s; ++p) row[positions[p]] = ds[p];
      const long r = from_digits(row, dims);
      col = row;
      for (long j = 0; j < dim_s; ++j) {
        const cplx v = a(i, j);
        if (v == cplx(0.0)) continue;
        to_digits(j, dims_s, ds);
        for (int p = 0; p < s; ++p) col[positions[p]] = ds[p];
        out(r, from_digits(col, dims)) = v;
      }
    }
  }
  return out;
}

Matrix tensor_embed(const Matrix& a, std::span<const int> source, std::span<const int> target,
                    int d) {
  const int s = static_cast<int>(source.size());
  const int k = static_cast<int>(target.size());
  if (a.rows() != ipow(d, s) || a.cols() != a.rows()) {
    throw DimensionError("tensor_embed: operator dimension does not match d^|source|");
  }
  std::vector<int> where(s, -1);
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < k; ++j)
      if (target[j] == source[i]) where[i] = j;
    if (where[i] < 0) {
      std::ostringstream os;
      os << "tensor_embed: vertex " << source[i] << " of the source support is not in the target";
      throw DimensionError(os.str());
    }
  }
  std::vector<int> dims(k, d);
  return embed_on_factors(a, dims, where);
}

Matrix permute_factors(const Matrix& a, std::span<const int> dims, std::span<const int> perm) {
  const std::size_t k = dims.size();
  std::vector<int> out_dims(k);
  for (std::size_t i = 0; i < k; ++i) out_dims[i] = dims[perm[i]];
  const long total = std::accumulate(dims.begin(), dims.end(), 1L, std::multiplies<>());
  if (a.rows() != total || a.cols() != total)
    throw DimensionError("permute_factors: operator dimension does not match factor dims");
  // map output index -> input index
  std::vector<long> map(total);
  std::vector<int> od, id(k);
  for (long o = 0; o < total; ++o) {
    to_digits(o, out_dims, od);
    for (std::size_t i = 0; i < k; ++i) id[perm[i]] = od[i];
    map[o] = from_digits(id, dims);
  }
  Matrix out(total, total);
  for (long c = 0; c < total; ++c)
    for (long r = 0; r < total; ++r) out(r, c) = a(map[r], map[c]);
  return out;
}

Matrix partial_trace(const Matrix& a, std::span<const int> dims, std::span<const int> keep) {
  const std::size_t k = dims.size();
  std::vector<int> traced;
  for (int i = 0; i < static_cast<int>(k); ++i)
    if (std::find(keep.begin(), keep.end(), i) == keep.end()) traced.push_back(i);
  std::vector<int> perm(keep.begin(), keep.end());
  perm.insert(perm.end(), traced.begin(), traced.end());
  const Matrix p = permute_factors(a, dims, perm);
  long dk = 1, dt = 1;
  for (int i : keep) dk *= dims[i];
  for (int i : traced) dt *= dims[i];
  Matrix out = Matrix::Zero(dk, dk);
  for (long i = 0; i < dk; ++i)
    for (long j = 0; j < dk; ++j) {
      cplx acc = 0;
      for (long t = 0; t < dt; ++t) acc += p(i * dt + t, j * dt + t);
      out(i, j) = acc / static_cast<double>(dt);
    }
  return out;
}

std::vector<Matrix> orthonormal_basis(std::span<const Matrix> family, double rel_tol) {
  double scale = 0.0;
  for (const auto& f : family) scale = std::max(scale, f.norm());
  std::vector<Matrix> basis;
  if (scale == 0.0) return basis;
  for (const auto& f : family) {
    Matrix r = f;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis) r -= frobenius_inner(b, r) * b;
    const double nr = r.norm();
    if (nr > rel_tol * scale) basis.push_back(r / nr);
  }
  return basis;
}

double distance_to_span(const Matrix& x, std::span<const Matrix> basis) {
  Matrix r = x;
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& b : basis) r -= frobenius_inner(b, r) * b;
  return r.norm();
}

double conjugation_closure_residual(std::span<const Matrix> family) {
  if (family.empty()) throw Error("conjugation_closure_residual: empty family");
  const auto basis = orthonormal_basis(family, 1e-12);
  double worst = 0.0;
  for (const auto& f : family) worst = std::max(worst, distance_to_span(f.adjoint(), basis));
  return worst;
}

Matrix SchmidtDecomposition::reconstruct() const {
  Matrix q = Matrix::Zero(d * d, d * d);
  for (const auto& t : terms)
    q += side == PivotSide::Left ? kron(t.pivot, t.partner) : kron(t.partner, t.pivot);
  return q;
}

std::vector<double> SchmidtDecomposition::coefficients() const {
  std::vector<double> out;
  for (const auto& t : terms) out.push_back(t.pivot.norm());
  return out;
}

std::vector<Matrix> SchmidtDecomposition::pivots() const {
  std::vector<Matrix> out;
  for (const auto& t : terms) out.push_back(t.pivot);
  return out;
}

std::vector<Matrix> SchmidtDecomposition::partners() const {
  std::vector<Matrix> out;
  for (const auto& t : terms) out.push_back(t.partner);
  return out;
}

Matrix realign(const Matrix& q, int d) {
  Matrix r(d * d, d * d);
  for (int i1 = 0; i1 < d; ++i1)
    for (int i2 = 0; i2 < d; ++i2)
      for (int j1 = 0; j1 < d; ++j1)
        for (int j2 = 0; j2 < d; ++j2) r(i1 * d + j1, i2 * d + j2) = q(i1 * d + i2, j1 * d + j2);
  return r;
}

Matrix unrealign(const Matrix& r, int d) {
  Matrix q(d * d, d * d);
  for (int i1 = 0; i1 < d; ++i1)
    for (int i2 = 0; i2 < d; ++i2)
      for (int j1 = 0; j1 < d; ++j1)
        for (int j2 = 0; j2 < d; ++j2) q(i1 * d + i2, j1 * d + j2) = r(i1 * d + j1, i2 * d + j2);
  return q;
}

SchmidtDecomposition schmidt_decompose(const Matrix& q, int d, PivotSide side, double rank_cutoff) {
  if (d < 1 || q.rows() != static_cast<Eigen::Index>(d) * d || q.cols() != q.rows()) {
    std::ostringstream os;
    os << "schmidt_decompose: operator of dimension " << q.rows() << " is not d^2 for d=" << d;
    throw DimensionError(os.str());
  }
  Eigen::JacobiSVD<Matrix> svd(realign(q, d), Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  SchmidtDecomposition out;
  out.d = d;
  out.side = side;
  if (s.size() == 0 || s(0) == 0.0) return out;
  const double cut = rank_cutoff * s(0);
  for (Eigen::Index a = 0; a < s.size(); ++a) {
    if (s(a) <= cut) break;
    // R = U S V^dagger = sum s_a u_a conj(v_a)^T, so Q = sum s_a A_a (x) B_a with
    // vec(A_a) = u_a and vec(B_a) = conj(v_a).
    Matrix left(d, d), right(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        left(i, j) = svd.matrixU()(i * d + j, a);
        right(i, j) = std::conj(svd.matrixV()(i * d + j, a));
      }
    Matrix& partner = side == PivotSide::Left ? right : left;
    Matrix& pivot = side == PivotSide::Left ? left : right;
    Eigen::Index pr = 0, pc = 0;
    partner.cwiseAbs().maxCoeff(&pr, &pc);
    const cplx phase = partner(pr, pc) / std::abs(partner(pr, pc));
    partner *= std::conj(phase);
    pivot *= phase * s(a);
    out.terms.push_back({std::move(pivot), std::move(partner)});
  }
  return out;
}

}  // namespace cqsat
