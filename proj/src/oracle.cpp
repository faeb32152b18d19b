#include "cqsat/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <ceres/ceres.h>

#include "cqsat/error.hpp"
#include "cqsat/parallel.hpp"
#include "cqsat/random.hpp"

namespace cqsat {

namespace {

std::size_t checked_size(int n, int d, std::size_t cap, const char* who) {
  const double size = std::pow(static_cast<double>(d), n);
  if (size > static_cast<double>(cap)) {
    std::ostringstream os;
    os << who << ": d^n = " << d << "^" << n << " exceeds the oracle cap of " << cap << " basis states";
    throw Error(os.str());
  }
  return static_cast<std::size_t>(size);
}

std::size_t stride_of(int v, int n, int d) {
  std::size_t s = 1;
  for (int k = v + 1; k < n; ++k) s *= static_cast<std::size_t>(d);
  return s;
}

// Base indices (digits u and v zero) for a term on (u, v).
std::vector<std::size_t> term_bases(std::size_t size, std::size_t su, std::size_t sv, int d) {
  std::vector<std::size_t> out;
  out.reserve(size / (static_cast<std::size_t>(d) * d));
  for (std::size_t i = 0; i < size; ++i)
    if ((i / su) % d == 0 && (i / sv) % d == 0) out.push_back(i);
  return out;
}

Matrix tridiagonal(const std::vector<double>& alpha, const std::vector<double>& beta) {
  const int k = static_cast<int>(alpha.size());
  Matrix t = Matrix::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    t(i, i) = alpha[i];
    if (i + 1 < k) t(i, i + 1) = t(i + 1, i) = beta[i];
  }
  return t;
}

}  // namespace

Vector apply_hamiltonian(const QsatInstance& instance, const Vector& psi, unsigned workers) {
  const auto& g = instance.graph;
  const int d = g.d;
  const std::size_t size = static_cast<std::size_t>(psi.size());
  Vector out = Vector::Zero(psi.size());
  const int d2 = d * d;
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const auto [u, v] = g.edges[e];
    const std::size_t su = stride_of(u, g.n, d);
    const std::size_t sv = stride_of(v, g.n, d);
    const auto bases = term_bases(size, su, sv, d);
    std::vector<std::size_t> offsets(d2);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) offsets[a * d + b] = a * su + b * sv;
    const Matrix& q = instance.terms[e];
    const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(workers, bases.size()));
    parallel_map(chunks, workers, [&](std::size_t c) {
      const std::size_t lo = bases.size() * c / chunks;
      const std::size_t hi = bases.size() * (c + 1) / chunks;
      Vector x(d2);
      for (std::size_t k = lo; k < hi; ++k) {
        const std::size_t base = bases[k];
        for (int i = 0; i < d2; ++i) x(i) = psi(base + offsets[i]);
        const Vector y = q * x;
        for (int i = 0; i < d2; ++i) out(base + offsets[i]) += y(i);
      }
      return 0;
    });
  }
  return out;
}

GroundState exact_ground_energy(const QsatInstance& instance, const OracleOptions& options) {
  const auto& g = instance.graph;
  const std::size_t size = checked_size(g.n, g.d, options.cap, "exact_ground_energy");
  const auto n = static_cast<Eigen::Index>(size);
  auto h = [&](const Vector& x) { return apply_hamiltonian(instance, x, options.workers); };
  GroundState out;
  out.state.n = g.n;
  out.state.d = g.d;

  if (size <= options.dense_limit) {
    Matrix dense(n, n);
    for (Eigen::Index i = 0; i < n; ++i) dense.col(i) = h(Vector::Unit(n, i));
    dense = (dense + dense.adjoint()).eval() / 2.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(dense);
    out.energy = es.eigenvalues()(0);
    out.state.amplitudes = es.eigenvectors().col(0);
    out.residual = (h(out.state.amplitudes) - out.energy * out.state.amplitudes).norm();
    return out;
  }

  Rng rng(options.seed);
  Vector start = rng.unit_vector(n);
  const int kmax = static_cast<int>(std::min<Eigen::Index>(options.krylov_dim, n));
  for (int restart = 0; restart < options.max_restarts; ++restart) {
    std::vector<Vector> basis{start};
    std::vector<double> alpha, beta;
    for (int j = 0; j < kmax; ++j) {
      Vector w = h(basis[j]);
      alpha.push_back(basis[j].dot(w).real());
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& b : basis) w -= b.dot(w) * b;
      const double nb = w.norm();
      if (j + 1 == kmax || nb < 1e-12) break;
      beta.push_back(nb);
      basis.push_back(w / nb);
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(tridiagonal(alpha, beta));
    const Vector y = es.eigenvectors().col(0);
    Vector x = Vector::Zero(n);
    for (std::size_t i = 0; i < alpha.size(); ++i) x += y(static_cast<Eigen::Index>(i)) * basis[i];
    x.normalize();
    const Vector hx = h(x);
    const double energy = x.dot(hx).real();
    const double residual = (hx - energy * x).norm();
    out.energy = energy;
    out.state.amplitudes = x;
    out.residual = residual;
    if (residual <= options.residual_tol) return out;
    start = x;
    if (alpha.size() < static_cast<std::size_t>(kmax)) {
      // invariant subspace without convergence: inject a fresh direction
      start += 1e-3 * rng.unit_vector(n);
      start.normalize();
    }
  }
  std::ostringstream os;
  os << "exact_ground_energy: Lanczos did not reach residual " << options.residual_tol
     << " (best " << out.residual << ")";
  throw Error(os.str());
}

double state_energy(const GlobalState& state, const QsatInstance& instance, std::size_t cap,
                    unsigned workers) {
  const auto& g = instance.graph;
  const std::size_t size = checked_size(g.n, g.d, cap, "state_energy");
  if (state.n != g.n || state.d != g.d || static_cast<std::size_t>(state.amplitudes.size()) != size)
    throw DimensionError("state_energy: state does not match the instance");
  const double norm = state.amplitudes.norm();
  if (std::abs(norm - 1.0) > 1e-8) {
    std::ostringstream os;
    os << "state_energy: state norm deviates from 1 by " << std::abs(norm - 1.0);
    throw Error(os.str());
  }
  const cplx value = state.amplitudes.dot(apply_hamiltonian(instance, state.amplitudes, workers));
  if (std::abs(value.imag()) > 1e-10) {
    std::ostringstream os;
    os << "state_energy: imaginary part " << value.imag() << " exceeds 1e-10";
    throw Error(os.str());
  }
  return value.real();
}

namespace {

// Applies a (rows x dims[k]) map to tensor factor k of a vector.
Vector apply_on_factor(const Vector& psi, std::vector<long>& dims, std::size_t k, const Matrix& a) {
  long left = 1, right = 1;
  for (std::size_t i = 0; i < k; ++i) left *= dims[i];
  for (std::size_t i = k + 1; i < dims.size(); ++i) right *= dims[i];
  const long mid = dims[k];
  const long rows = a.rows();
  Vector out = Vector::Zero(left * rows * right);
  for (long l = 0; l < left; ++l)
    for (long r = 0; r < right; ++r)
      for (long j = 0; j < mid; ++j) {
        const cplx x = psi((l * mid + j) * right + r);
        if (x == cplx(0.0)) continue;
        for (long i = 0; i < rows; ++i) out((l * rows + i) * right + r) += a(i, j) * x;
      }
  dims[k] = rows;
  return out;
}

}  // namespace

GlobalState expand_witness(const TensorNetworkWitness& witness, std::size_t cap) {
  const auto& g = witness.graph;
  checked_size(g.n, g.d, cap, "expand_witness");
  // factor layout, vertex-major: vertex v owns [slots in incident order..., residual]
  std::vector<long> dims;
  std::vector<std::size_t> first(g.n);
  for (int v = 0; v < g.n; ++v) {
    first[v] = dims.size();
    for (int k : witness.block(v).virtual_dims()) dims.push_back(k);
  }
  std::size_t total = 1;
  for (long k : dims) total *= static_cast<std::size_t>(k);

  // amplitude of a virtual basis state = prod of edge and residual amplitudes
  Vector psi(static_cast<Eigen::Index>(total));
  std::vector<long> digit(dims.size());
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rest = idx;
    for (std::size_t f = dims.size(); f-- > 0;) {
      digit[f] = static_cast<long>(rest % dims[f]);
      rest /= dims[f];
    }
    cplx amp = 1.0;
    for (std::size_t e = 0; e < g.edges.size() && amp != cplx(0.0); ++e) {
      const auto [u, v] = g.edges[e];
      const int id = static_cast<int>(e);
      const long iu = digit[first[u] + witness.slot_index(id, u)];
      const long iv = digit[first[v] + witness.slot_index(id, v)];
      amp *= witness.edge_states[e](iu * witness.slot_dim(id, v) + iv);
    }
    for (int v = 0; v < g.n && amp != cplx(0.0); ++v) {
      const std::size_t res = first[v] + witness.structures[v].edges.size();
      amp *= witness.residual_states[v](digit[res]);
    }
    psi(static_cast<Eigen::Index>(idx)) = amp;
  }
  // merge each vertex's factors and map them into C^d; process from the
  // last vertex so earlier factor positions stay valid
  for (int v = g.n - 1; v >= 0; --v) {
    const std::size_t f0 = first[v];
    const std::size_t count = witness.structures[v].edges.size() + 1;
    long merged = 1;
    for (std::size_t f = f0; f < f0 + count; ++f) merged *= dims[f];
    dims.erase(dims.begin() + static_cast<long>(f0) + 1, dims.begin() + static_cast<long>(f0 + count));
    dims[f0] = merged;
    psi = apply_on_factor(psi, dims, f0, witness.block(v).isometry);
  }
  GlobalState out;
  out.n = g.n;
  out.d = g.d;
  out.amplitudes = std::move(psi);
  return out;
}

namespace {

using Groups = std::vector<std::vector<Matrix>>;

struct Layout {
  int d = 0;
  std::vector<std::pair<std::size_t, std::size_t>> ops;  // (group, index) in variable order
  std::vector<std::pair<int, int>> pairs;                 // cross-group variable pairs
};

Layout make_layout(const Groups& groups) {
  Layout l;
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (std::size_t k = 0; k < groups[g].size(); ++k) {
      l.ops.push_back({g, k});
      l.d = static_cast<int>(groups[g][k].rows());
    }
  for (std::size_t i = 0; i < l.ops.size(); ++i)
    for (std::size_t j = i + 1; j < l.ops.size(); ++j)
      if (l.ops[i].first != l.ops[j].first) l.pairs.push_back({static_cast<int>(i), static_cast<int>(j)});
  return l;
}

std::vector<Matrix> to_matrices(const double* x, const Layout& l) {
  const int n = l.d * l.d;
  std::vector<Matrix> out;
  for (std::size_t k = 0; k < l.ops.size(); ++k) {
    Matrix m(l.d, l.d);
    for (int e = 0; e < n; ++e) m.data()[e] = cplx(x[2 * n * k + e], x[2 * n * k + n + e]);
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<double> to_params(const std::vector<Matrix>& ops) {
  std::vector<double> x;
  for (const auto& m : ops) {
    for (Eigen::Index e = 0; e < m.size(); ++e) x.push_back(m.data()[e].real());
    for (Eigen::Index e = 0; e < m.size(); ++e) x.push_back(m.data()[e].imag());
  }
  return x;
}

double max_residual(const std::vector<Matrix>& ops, const Layout& l) {
  double worst = 0.0;
  for (const auto& [i, j] : l.pairs) worst = std::max(worst, commutator(ops[i], ops[j]).norm());
  return worst;
}

// sum ||a - A||^2 + mu sum ||[a_i, a_j]||^2 over cross-group pairs
class Penalty : public ceres::FirstOrderFunction {
 public:
  Penalty(const Layout& l, const std::vector<Matrix>& target, double mu) : l_(l), target_(target), mu_(mu) {}
  int NumParameters() const override { return static_cast<int>(l_.ops.size()) * 2 * l_.d * l_.d; }
  bool Evaluate(const double* x, double* cost, double* gradient) const override {
    const auto a = to_matrices(x, l_);
    std::vector<Matrix> grad(a.size());
    double f = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      grad[k] = a[k] - target_[k];
      f += grad[k].squaredNorm();
    }
    for (const auto& [i, j] : l_.pairs) {
      const Matrix c = a[i] * a[j] - a[j] * a[i];
      f += mu_ * c.squaredNorm();
      grad[i] += mu_ * (c * a[j].adjoint() - a[j].adjoint() * c);
      grad[j] += mu_ * (a[i].adjoint() * c - c * a[i].adjoint());
    }
    *cost = f;
    if (gradient) {
      const int n = l_.d * l_.d;
      for (std::size_t k = 0; k < grad.size(); ++k)
        for (int e = 0; e < n; ++e) {
          gradient[2 * n * k + e] = 2.0 * grad[k].data()[e].real();
          gradient[2 * n * k + n + e] = 2.0 * grad[k].data()[e].imag();
        }
    }
    return true;
  }

 private:
  const Layout& l_;
  const std::vector<Matrix>& target_;
  double mu_;
};

// Residuals: real and imaginary parts of every cross-group commutator.
class Commutators : public ceres::CostFunction {
 public:
  explicit Commutators(const Layout& l) : l_(l) {
    set_num_residuals(static_cast<int>(l.pairs.size()) * 2 * l.d * l.d);
    mutable_parameter_block_sizes()->push_back(static_cast<int>(l.ops.size()) * 2 * l.d * l.d);
  }
  bool Evaluate(double const* const* parameters, double* residuals, double** jacobians) const override {
    const int d = l_.d;
    const int n = d * d;
    const int cols = static_cast<int>(l_.ops.size()) * 2 * n;
    const auto a = to_matrices(parameters[0], l_);
    for (std::size_t p = 0; p < l_.pairs.size(); ++p) {
      const auto [i, j] = l_.pairs[p];
      const Matrix c = a[i] * a[j] - a[j] * a[i];
      for (int e = 0; e < n; ++e) {
        residuals[2 * n * p + e] = c.data()[e].real();
        residuals[2 * n * p + n + e] = c.data()[e].imag();
      }
    }
    if (!jacobians || !jacobians[0]) return true;
    double* jac = jacobians[0];
    std::fill(jac, jac + static_cast<std::size_t>(num_residuals()) * cols, 0.0);
    // d[a,b]/d a_{kl} = E_kl b - b E_kl ; d[a,b]/d b_{kl} = a E_kl - E_kl a
    for (std::size_t p = 0; p < l_.pairs.size(); ++p) {
      const auto [i, j] = l_.pairs[p];
      const Matrix& x = a[i];
      const Matrix& y = a[j];
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) {
          const int e = l * d + k;  // column-major index of E_kl
          // variable a_i, entry (k,l): derivative matrix D = E_kl y - y E_kl
          Matrix dx = Matrix::Zero(d, d);
          dx.row(k) += y.row(l);
          dx.col(l) -= y.col(k);
          Matrix dy = Matrix::Zero(d, d);
          dy.col(l) += x.col(k);
          dy.row(k) -= x.row(l);
          const int ci = 2 * n * i + e;
          const int cj = 2 * n * j + e;
          for (int r = 0; r < n; ++r) {
            const std::size_t re = (2 * n * p + r) * static_cast<std::size_t>(cols);
            const std::size_t im = (2 * n * p + n + r) * static_cast<std::size_t>(cols);
            const cplx gx = dx.data()[r];
            const cplx gy = dy.data()[r];
            jac[re + ci] = gx.real();
            jac[im + ci] = gx.imag();
            jac[re + ci + n] = -gx.imag();  // i * gx
            jac[im + ci + n] = gx.real();
            jac[re + cj] = gy.real();
            jac[im + cj] = gy.imag();
            jac[re + cj + n] = -gy.imag();
            jac[im + cj + n] = gy.real();
          }
        }
    }
    return true;
  }

 private:
  const Layout& l_;
};

struct Attempt {
  std::vector<Matrix> ops;
  double residual = 0.0;
  double displacement = 0.0;
};

// Stops the polish once the commutators are below the target.
class StopAtResidual : public ceres::IterationCallback {
 public:
  explicit StopAtResidual(double cost) : cost_(cost) {}
  ceres::CallbackReturnType operator()(const ceres::IterationSummary& s) override {
    return s.cost <= cost_ ? ceres::SOLVER_TERMINATE_SUCCESSFULLY : ceres::SOLVER_CONTINUE;
  }

 private:
  double cost_;
};

Attempt descend(const Layout& l, const std::vector<Matrix>& target, std::vector<double> x,
                double target_residual) {
  // penalty continuation until the commutators are small relative to the
  // input; the polish below removes the rest
  const double stop = std::max(1e-6, 1e-3 * max_residual(target, l));
  for (double mu = 1.0; mu < 1e14; mu *= 4.0) {
    ceres::GradientProblem problem(new Penalty(l, target, mu));
    ceres::GradientProblemSolver::Options options;
    options.line_search_direction_type = ceres::LBFGS;
    options.max_num_iterations = 2000;
    options.function_tolerance = 1e-15;
    options.gradient_tolerance = 1e-13;
    options.parameter_tolerance = 1e-15;
    options.logging_type = ceres::SILENT;
    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(options, problem, x.data(), &summary);
    if (max_residual(to_matrices(x.data(), l), l) <= stop) break;
  }
  ceres::Problem problem;
  problem.AddResidualBlock(new Commutators(l), nullptr, x.data());
  ceres::Solver::Options options;
  options.linear_solver_type = ceres::DENSE_NORMAL_CHOLESKY;
  options.max_num_iterations = 100;
  options.function_tolerance = 1e-30;
  options.gradient_tolerance = 1e-30;
  options.parameter_tolerance = 1e-20;
  options.logging_type = ceres::SILENT;
  StopAtResidual callback(0.5 * std::pow(0.1 * target_residual, 2));
  options.callbacks.push_back(&callback);
  ceres::Solver::Summary summary;
  ceres::Solve(options, &problem, &summary);

  Attempt out;
  out.ops = to_matrices(x.data(), l);
  out.residual = max_residual(out.ops, l);
  for (std::size_t k = 0; k < out.ops.size(); ++k)
    out.displacement = std::max(out.displacement, (out.ops[k] - target[k]).norm());
  return out;
}

}  // namespace

OracleRounding oracle_nearest_commuting(const VertexFamily& family,
                                        const NearestCommutingOptions& options) {
  OracleRounding out;
  out.family = family;
  const Layout layout = make_layout(family.groups);
  std::vector<Matrix> target;
  for (const auto& [g, k] : layout.ops) target.push_back(family.groups[g][k]);
  out.residual = max_residual(target, layout);
  if (out.residual <= options.target_residual || layout.pairs.empty()) {
    out.best_restart = 0;
    return out;
  }
  Rng rng(options.seed);
  Attempt best;
  bool have = false;
  for (int restart = 0; restart < std::max(1, options.restarts); ++restart) {
    std::vector<Matrix> start = target;
    if (restart > 0)
      for (auto& m : start) {
        const Matrix noise = rng.ginibre(m.rows(), m.cols());
        m += options.noise * std::max(m.norm(), 1e-12) * noise / noise.norm();
      }
    Attempt a = descend(layout, target, to_params(start), options.target_residual);
    const bool ok = a.residual <= options.target_residual;
    const bool best_ok = have && best.residual <= options.target_residual;
    const bool better = !have || (ok && !best_ok) || (ok == best_ok && (ok ? a.displacement < best.displacement
                                                                         : a.residual < best.residual));
    if (better) {
      best = std::move(a);
      out.best_restart = restart;
      have = true;
    }
  }
  for (std::size_t k = 0; k < layout.ops.size(); ++k)
    out.family.groups[layout.ops[k].first][layout.ops[k].second] = best.ops[k];
  out.displacement = best.displacement;
  out.residual = best.residual;
  return out;
}

}  // namespace cqsat
