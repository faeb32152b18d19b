#include "cqsat/rounding.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <ceres/ceres.h>

#include "cqsat/json_io.hpp"

namespace cqsat {

std::string to_string(RoundingMode mode) {
  return mode == RoundingMode::Structural ? "structural" : "penalty";
}

RoundingMode rounding_mode_from_string(const std::string& s) {
  if (s == "structural") return RoundingMode::Structural;
  if (s == "penalty") return RoundingMode::Penalty;
  throw Error("unknown rounding mode '" + s + "' (expected structural or penalty)");
}

double max_cross_commutator(const VertexFamily& family) {
  double worst = 0.0;
  for (std::size_t i = 0; i < family.groups.size(); ++i)
    for (std::size_t j = i + 1; j < family.groups.size(); ++j)
      for (const auto& a : family.groups[i])
        for (const auto& b : family.groups[j]) worst = std::max(worst, (a * b - b * a).norm());
  return worst;
}

double max_group_overlap(const VertexFamily& family) {
  double worst = 0.0;
  for (const auto& group : family.groups)
    for (std::size_t a = 0; a < group.size(); ++a)
      for (std::size_t b = a + 1; b < group.size(); ++b) {
        const double na = group[a].norm(), nb = group[b].norm();
        if (na == 0.0 || nb == 0.0) continue;
        worst = std::max(worst, std::abs(frobenius_inner(group[a], group[b])) / (na * nb));
      }
  return worst;
}

namespace {

using Groups = std::vector<std::vector<Matrix>>;

double family_displacement(const Groups& before, const Groups& after) {
  double worst = 0.0;
  for (std::size_t g = 0; g < before.size(); ++g)
    for (std::size_t a = 0; a < before[g].size(); ++a)
      worst = std::max(worst, (before[g][a] - after[g][a]).norm());
  return worst;
}

double max_closure_residual(const Groups& groups) {
  double worst = 0.0;
  for (const auto& g : groups)
    if (!g.empty()) worst = std::max(worst, conjugation_closure_residual(g));
  return worst;
}

bool is_scalar(const Matrix& a) {
  const cplx mean = a.trace() / static_cast<double>(a.rows());
  Matrix shifted = a;
  shifted.diagonal().array() -= mean;
  return shifted.norm() <= 1e-14 * std::max(a.norm(), 1e-300);
}

std::vector<Matrix> hermitian_basis(int d) {
  std::vector<Matrix> out;
  const double s = 1.0 / std::sqrt(2.0);
  for (int k = 0; k < d; ++k) {
    Matrix m = Matrix::Zero(d, d);
    m(k, k) = 1.0;
    out.push_back(m);
  }
  for (int k = 0; k < d; ++k)
    for (int l = k + 1; l < d; ++l) {
      Matrix re = Matrix::Zero(d, d), im = Matrix::Zero(d, d);
      re(k, l) = re(l, k) = s;
      im(k, l) = cplx(0, s);
      im(l, k) = cplx(0, -s);
      out.push_back(re);
      out.push_back(im);
    }
  return out;
}

// Writes a complex d x d matrix into 2 d^2 consecutive entries (real parts
// column-major, then imaginary parts).
template <typename Dst>
void put(const Matrix& m, Dst&& dst, Eigen::Index offset) {
  const Eigen::Index n = m.size();
  for (Eigen::Index k = 0; k < n; ++k) {
    dst(offset + k) = m.data()[k].real();
    dst(offset + n + k) = m.data()[k].imag();
  }
}

// Unitary-orbit problem: group g is replaced by R_g A R_g^dagger.
class OrbitSolver {
 public:
  OrbitSolver(const Groups& groups, int d) : d_(d), d2_(d * d), orig_(groups), basis_(hermitian_basis(d)) {
    rotation_.assign(groups.size(), Matrix::Identity(d, d));
    for (std::size_t i = 0; i < groups.size(); ++i)
      for (std::size_t j = i + 1; j < groups.size(); ++j)
        for (std::size_t a = 0; a < groups[i].size(); ++a)
          for (std::size_t b = 0; b < groups[j].size(); ++b) pairs_.push_back({i, j, a, b});
    for (const auto& g : groups) ops_ += g.size();
  }

  Eigen::Index num_params() const { return static_cast<Eigen::Index>(orig_.size()) * d2_; }

  Groups rotated(const std::vector<Matrix>& rotation) const {
    Groups out(orig_.size());
    for (std::size_t g = 0; g < orig_.size(); ++g)
      for (const auto& a : orig_[g]) out[g].push_back(rotation[g] * a * rotation[g].adjoint());
    return out;
  }

  Eigen::VectorXd constraint_residual(const Groups& a, double* max_pair = nullptr) const {
    Eigen::VectorXd r(static_cast<Eigen::Index>(pairs_.size()) * 2 * d2_);
    double worst = 0.0;
    for (std::size_t p = 0; p < pairs_.size(); ++p) {
      const auto& pr = pairs_[p];
      const Matrix& x = a[pr.i][pr.a];
      const Matrix& y = a[pr.j][pr.b];
      const Matrix c = x * y - y * x;
      worst = std::max(worst, c.norm());
      put(c, r, static_cast<Eigen::Index>(p) * 2 * d2_);
    }
    if (max_pair) *max_pair = worst;
    return r;
  }

  // d/dx_{g,k} of the rotated operators: i [G_k, a].
  std::vector<std::vector<std::vector<Matrix>>> tangents(const Groups& a) const {
    std::vector<std::vector<std::vector<Matrix>>> t(a.size());
    for (std::size_t g = 0; g < a.size(); ++g)
      for (const auto& op : a[g]) {
        std::vector<Matrix> per_k;
        per_k.reserve(basis_.size());
        for (const auto& gk : basis_) per_k.push_back(cplx(0, 1) * (gk * op - op * gk));
        t[g].push_back(std::move(per_k));
      }
    return t;
  }

  Eigen::MatrixXd constraint_jacobian(const Groups& a,
                                      const std::vector<std::vector<std::vector<Matrix>>>& t) const {
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(pairs_.size()) * 2 * d2_,
                                              num_params());
    for (std::size_t p = 0; p < pairs_.size(); ++p) {
      const auto& pr = pairs_[p];
      const Matrix& x = a[pr.i][pr.a];
      const Matrix& y = a[pr.j][pr.b];
      const Eigen::Index row = static_cast<Eigen::Index>(p) * 2 * d2_;
      for (int k = 0; k < d2_; ++k) {
        const Matrix& tx = t[pr.i][pr.a][k];
        const Matrix& ty = t[pr.j][pr.b][k];
        put(tx * y - y * tx, j.col(static_cast<Eigen::Index>(pr.i) * d2_ + k), row);
        put(x * ty - ty * x, j.col(static_cast<Eigen::Index>(pr.j) * d2_ + k), row);
      }
    }
    return j;
  }

  Eigen::VectorXd displacement_residual(const Groups& a) const {
    Eigen::VectorXd r(static_cast<Eigen::Index>(ops_) * 2 * d2_);
    Eigen::Index row = 0;
    for (std::size_t g = 0; g < a.size(); ++g)
      for (std::size_t k = 0; k < a[g].size(); ++k, row += 2 * d2_) put(a[g][k] - orig_[g][k], r, row);
    return r;
  }

  Eigen::MatrixXd displacement_jacobian(const std::vector<std::vector<std::vector<Matrix>>>& t) const {
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ops_) * 2 * d2_, num_params());
    Eigen::Index row = 0;
    for (std::size_t g = 0; g < t.size(); ++g)
      for (std::size_t a = 0; a < t[g].size(); ++a, row += 2 * d2_)
        for (int k = 0; k < d2_; ++k) put(t[g][a][k], j.col(static_cast<Eigen::Index>(g) * d2_ + k), row);
    return j;
  }

  std::vector<Matrix> step(const std::vector<Matrix>& rotation, const Eigen::VectorXd& x) const {
    std::vector<Matrix> out(rotation.size());
    for (std::size_t g = 0; g < rotation.size(); ++g) {
      Matrix h = Matrix::Zero(d_, d_);
      for (int k = 0; k < d2_; ++k) h += x(static_cast<Eigen::Index>(g) * d2_ + k) * basis_[k];
      Eigen::SelfAdjointEigenSolver<Matrix> es(h);
      Vector phases(d_);
      for (int i = 0; i < d_; ++i) phases(i) = std::polar(1.0, es.eigenvalues()(i));
      out[g] = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint() * rotation[g];
    }
    return out;
  }

  /// Levenberg-Marquardt on the commutator residual. Returns the final max
  /// pair commutator.
  double polish(std::vector<Matrix>& rotation, int max_iters, double target, int& iterations) const {
    Groups a = rotated(rotation);
    double worst = 0.0;
    Eigen::VectorXd r = constraint_residual(a, &worst);
    double cost = 0.5 * r.squaredNorm();
    double lambda = -1.0;
    for (int it = 0; it < max_iters && worst > target; ++it) {
      ++iterations;
      const auto t = tangents(a);
      const Eigen::MatrixXd j = constraint_jacobian(a, t);
      const Eigen::MatrixXd jtj = j.transpose() * j;
      const Eigen::VectorXd g = j.transpose() * r;
      if (lambda < 0) lambda = 1e-4 * std::max(jtj.diagonal().maxCoeff(), 1e-300);
      bool accepted = false;
      for (int tries = 0; tries < 30 && !accepted; ++tries) {
        Eigen::MatrixXd lhs = jtj;
        lhs.diagonal().array() += lambda;
        const Eigen::VectorXd x = lhs.ldlt().solve(-g);
        auto trial = step(rotation, x);
        Groups ta = rotated(trial);
        double trial_worst = 0.0;
        Eigen::VectorXd tr = constraint_residual(ta, &trial_worst);
        const double trial_cost = 0.5 * tr.squaredNorm();
        if (trial_cost < cost) {
          rotation = std::move(trial);
          a = std::move(ta);
          r = std::move(tr);
          cost = trial_cost;
          worst = trial_worst;
          lambda = std::max(lambda / 5.0, 1e-15 * jtj.diagonal().maxCoeff());
          accepted = true;
        } else {
          lambda *= 4.0;
        }
      }
      if (!accepted) break;
    }
    return worst;
  }

  /// Gauss-Newton steps on the displacement restricted to the null space of
  /// the linearized commutator map, each followed by a feasibility polish.
  void refine(std::vector<Matrix>& rotation, int rounds, double tol, int& iterations) const {
    auto objective = [&](const std::vector<Matrix>& rot) {
      return displacement_residual(rotated(rot)).squaredNorm();
    };
    double current = objective(rotation);
    for (int round = 0; round < rounds; ++round) {
      const Groups a = rotated(rotation);
      const auto t = tangents(a);
      const Eigen::MatrixXd jc = constraint_jacobian(a, t);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jc.transpose() * jc);
      const double top = std::max(es.eigenvalues().maxCoeff(), 1e-300);
      std::vector<Eigen::Index> null_cols;
      for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k)
        if (es.eigenvalues()(k) <= 1e-9 * top) null_cols.push_back(k);
      if (null_cols.empty()) return;
      Eigen::MatrixXd n(num_params(), static_cast<Eigen::Index>(null_cols.size()));
      for (std::size_t c = 0; c < null_cols.size(); ++c) n.col(c) = es.eigenvectors().col(null_cols[c]);
      const Eigen::MatrixXd dn = displacement_jacobian(t) * n;
      const Eigen::VectorXd dr = displacement_residual(a);
      Eigen::MatrixXd lhs = dn.transpose() * dn;
      lhs.diagonal().array() += 1e-12 * std::max(lhs.diagonal().maxCoeff(), 1e-300);
      const Eigen::VectorXd y = lhs.ldlt().solve(-dn.transpose() * dr);
      const Eigen::VectorXd x = n * y;
      bool improved = false;
      for (double scale = 1.0; scale > 1e-3 && !improved; scale *= 0.5) {
        auto trial = step(rotation, scale * x);
        const double residual = polish(trial, 50, tol * 1e-3, iterations);
        if (residual > tol) continue;
        const double value = objective(trial);
        if (value < current * (1.0 - 1e-9)) {
          const bool small_gain = value > current * (1.0 - 1e-4);
          rotation = std::move(trial);
          current = value;
          improved = true;
          if (small_gain) return;
        }
      }
      if (!improved) return;
    }
  }

 private:
  struct Pair {
    std::size_t i, j, a, b;
  };
  int d_;
  int d2_;
  const Groups& orig_;
  std::vector<Matrix> basis_;
  std::vector<Matrix> rotation_;
  std::vector<Pair> pairs_;
  std::size_t ops_ = 0;
};

// sum ||a - A||^2 + mu sum_{i<j} (||[a, b]||^2 + ||[a^dagger, b]||^2) over
// cross-group operator pairs; variables are the real and imaginary parts of
// every operator.
class PenaltyObjective : public ceres::FirstOrderFunction {
 public:
  PenaltyObjective(const Groups& target, int d, double mu) : target_(target), d_(d), mu_(mu) {
    for (std::size_t g = 0; g < target.size(); ++g)
      for (std::size_t a = 0; a < target[g].size(); ++a) index_.push_back({g, a});
  }

  int NumParameters() const override { return static_cast<int>(index_.size()) * 2 * d_ * d_; }

  bool Evaluate(const double* x, double* cost, double* gradient) const override {
    const Groups a = unpack(x, target_, d_);
    std::vector<std::vector<Matrix>> grad(a.size());
    double f = 0.0;
    for (std::size_t g = 0; g < a.size(); ++g)
      for (std::size_t k = 0; k < a[g].size(); ++k) {
        const Matrix diff = a[g][k] - target_[g][k];
        f += diff.squaredNorm();
        grad[g].push_back(diff);
      }
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = i + 1; j < a.size(); ++j)
        for (std::size_t p = 0; p < a[i].size(); ++p)
          for (std::size_t q = 0; q < a[j].size(); ++q) {
            const Matrix& x1 = a[i][p];
            const Matrix& y1 = a[j][q];
            const Matrix c = x1 * y1 - y1 * x1;
            const Matrix xd = x1.adjoint();
            const Matrix cd = xd * y1 - y1 * xd;
            f += mu_ * (c.squaredNorm() + cd.squaredNorm());
            // conjugate gradients of ||[x,y]||^2 and ||[x^dagger,y]||^2
            const Matrix cda = cd.adjoint();
            grad[i][p] += mu_ * ((c * y1.adjoint() - y1.adjoint() * c) + (y1 * cda - cda * y1));
            grad[j][q] += mu_ * ((x1.adjoint() * c - c * x1.adjoint()) + (x1 * cd - cd * x1));
          }
    *cost = f;
    if (gradient) {
      const int n = d_ * d_;
      int offset = 0;
      for (const auto& group : grad)
        for (const auto& m : group) {
          for (int k = 0; k < n; ++k) {
            gradient[offset + k] = 2.0 * m.data()[k].real();
            gradient[offset + n + k] = 2.0 * m.data()[k].imag();
          }
          offset += 2 * n;
        }
    }
    return true;
  }

  static Groups unpack(const double* x, const Groups& shape, int d) {
    Groups out(shape.size());
    const int n = d * d;
    int offset = 0;
    for (std::size_t g = 0; g < shape.size(); ++g)
      for (std::size_t k = 0; k < shape[g].size(); ++k) {
        Matrix m(d, d);
        for (int e = 0; e < n; ++e) m.data()[e] = cplx(x[offset + e], x[offset + n + e]);
        out[g].push_back(std::move(m));
        offset += 2 * n;
      }
    return out;
  }

  static std::vector<double> pack(const Groups& groups, int d) {
    std::vector<double> x;
    const int n = d * d;
    for (const auto& g : groups)
      for (const auto& m : g) {
        for (int e = 0; e < n; ++e) x.push_back(m.data()[e].real());
        for (int e = 0; e < n; ++e) x.push_back(m.data()[e].imag());
      }
    return x;
  }

 private:
  struct Slot {
    std::size_t group, op;
  };
  const Groups& target_;
  int d_;
  double mu_;
  std::vector<Slot> index_;
};

double max_cross_commutator(const Groups& g) {
  VertexFamily f;
  f.groups = g;
  return max_cross_commutator(f);
}

// Gram-Schmidt in the original order, then rescale to the original norms.
bool restore_norms(const Groups& original, Groups& rounded) {
  for (std::size_t g = 0; g < rounded.size(); ++g) {
    std::vector<Matrix> done;
    for (std::size_t k = 0; k < rounded[g].size(); ++k) {
      Matrix r = rounded[g][k];
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& b : done) r -= frobenius_inner(b, r) / b.squaredNorm() * b;
      const double target = original[g][k].norm();
      const double nr = r.norm();
      if (target == 0.0) {
        r.setZero();
      } else if (nr <= 1e-13 * target) {
        return false;
      } else {
        r *= target / nr;
      }
      done.push_back(r);
      rounded[g][k] = r;
    }
  }
  return true;
}

struct SolveOutcome {
  Groups rounded;
  double residual = 0.0;
  int iterations = 0;
  bool ok = false;
};

SolveOutcome solve_structural(const Groups& active, int d, const RoundingConfig& config) {
  OrbitSolver solver(active, d);
  std::vector<Matrix> rotation(active.size(), Matrix::Identity(d, d));
  SolveOutcome out;
  out.residual = solver.polish(rotation, config.max_iters, config.tol * 1e-3, out.iterations);
  if (out.residual <= config.tol && config.refine_iters > 0)
    solver.refine(rotation, config.refine_iters, config.tol, out.iterations);
  out.rounded = solver.rotated(rotation);
  out.residual = max_cross_commutator(out.rounded);
  out.ok = out.residual <= config.tol;
  return out;
}

SolveOutcome solve_penalty(const Groups& active, int d, const RoundingConfig& config) {
  SolveOutcome out;
  std::vector<double> x = PenaltyObjective::pack(active, d);
  double mu = config.penalty_mu0;
  for (int round = 0; round < config.penalty_rounds; ++round, mu *= 2.0) {
    ceres::GradientProblem problem(new PenaltyObjective(active, d, mu));
    ceres::GradientProblemSolver::Options options;
    options.line_search_direction_type = ceres::LBFGS;
    options.max_num_iterations = config.penalty_inner_iters;
    options.function_tolerance = 1e-16;
    options.gradient_tolerance = 1e-14;
    options.parameter_tolerance = 1e-16;
    options.logging_type = ceres::SILENT;
    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(options, problem, x.data(), &summary);
    out.iterations += static_cast<int>(summary.iterations.size());
    const Groups current = PenaltyObjective::unpack(x.data(), active, d);
    if (max_cross_commutator(current) <= config.tol * 1e-2) break;
  }
  out.rounded = PenaltyObjective::unpack(x.data(), active, d);
  if (config.norm_preserving && !restore_norms(active, out.rounded)) {
    out.residual = max_cross_commutator(out.rounded);
    out.ok = false;
    return out;
  }
  out.residual = max_cross_commutator(out.rounded);
  out.ok = out.residual <= config.tol;
  return out;
}

}  // namespace

RoundedFamily round_vertex(const VertexFamily& family, const RoundingConfig& config) {
  RoundedFamily result;
  result.family = family;
  RoundingReport& report = result.report;
  report.vertex = family.vertex;
  report.initial_residual = max_cross_commutator(family);
  report.residual = report.initial_residual;
  report.closure_residual = max_closure_residual(family.groups);
  if (report.initial_residual <= config.tol) {
    report.mode = "unchanged";
    return result;
  }
  int d = 0;
  for (const auto& g : family.groups)
    if (!g.empty()) d = static_cast<int>(g.front().rows());

  // Groups made of scalars commute with everything and stay fixed.
  std::vector<std::size_t> active_index;
  Groups active;
  for (std::size_t g = 0; g < family.groups.size(); ++g) {
    const auto& group = family.groups[g];
    if (std::all_of(group.begin(), group.end(), [](const Matrix& m) { return is_scalar(m); }))
      continue;
    active_index.push_back(g);
    active.push_back(group);
  }

  SolveOutcome outcome;
  if (config.mode == RoundingMode::Structural) {
    outcome = solve_structural(active, d, config);
    report.mode = "structural";
    if (!outcome.ok && config.fallback) {
      const int iters = outcome.iterations;
      SolveOutcome penalty = solve_penalty(active, d, config);
      penalty.iterations += iters;
      if (penalty.ok || penalty.residual < outcome.residual) {
        outcome = std::move(penalty);
        report.mode = "penalty";
        report.fell_back = true;
      }
    }
  } else {
    outcome = solve_penalty(active, d, config);
    report.mode = "penalty";
  }
  report.iterations = outcome.iterations;
  report.residual = outcome.residual;
  if (!outcome.ok) {
    std::ostringstream os;
    os << "round_vertex: vertex " << family.vertex << " did not converge (best residual "
       << outcome.residual << ", tolerance " << config.tol << ")";
    throw RoundingError(family.vertex, outcome.residual, os.str());
  }
  for (std::size_t k = 0; k < active_index.size(); ++k)
    result.family.groups[active_index[k]] = std::move(outcome.rounded[k]);
  report.displacement = family_displacement(family.groups, result.family.groups);
  report.closure_residual = max_closure_residual(result.family.groups);
  return result;
}

std::vector<Operator> hermitize_terms(const std::vector<Operator>& terms, int d, double tol) {
  for (std::size_t i = 0; i < terms.size(); ++i)
    for (std::size_t j = i + 1; j < terms.size(); ++j) {
      const auto& si = terms[i].support.vertices;
      const auto& sj = terms[j].support.vertices;
      std::vector<int> joint(si);
      joint.insert(joint.end(), sj.begin(), sj.end());
      std::sort(joint.begin(), joint.end());
      joint.erase(std::unique(joint.begin(), joint.end()), joint.end());
      if (joint.size() == si.size() + sj.size()) continue;  // disjoint supports
      const Matrix qi = tensor_embed(terms[i].matrix, si, joint, d);
      const Matrix qj = tensor_embed(terms[j].matrix, sj, joint, d);
      const double c1 = commutator(qi, qj).norm();
      const double c2 = commutator(Matrix(qi.adjoint()), qj).norm();
      if (c1 > tol || c2 > tol) {
        std::ostringstream os;
        os << "hermitize_terms: terms " << i << " and " << j
           << " violate the commutation premise (||[Q_i,Q_j]||_F = " << c1
           << ", ||[Q_i^dagger,Q_j]||_F = " << c2 << ", tolerance " << tol
           << "); conjugation closure failed upstream";
        throw Error(os.str());
      }
    }
  std::vector<Operator> out = terms;
  for (auto& t : out) t.matrix = Matrix((t.matrix + t.matrix.adjoint()) / 2.0);
  return out;
}

VertexFamily vertex_family(const QsatInstance& instance, int vertex,
                           std::vector<SchmidtDecomposition>* decompositions) {
  VertexFamily family;
  family.vertex = vertex;
  const auto& g = instance.graph;
  for (int e : g.incident(vertex)) {
    const PivotSide side = g.edges[e].first == vertex ? PivotSide::Left : PivotSide::Right;
    SchmidtDecomposition sd = schmidt_decompose(instance.terms[e], g.d, side);
    family.groups.push_back(sd.pivots());
    if (decompositions) decompositions->push_back(std::move(sd));
  }
  return family;
}

SweepResult sweep_round(const QsatInstance& instance, const RoundingConfig& config) {
  instance.validate();
  const auto& g = instance.graph;
  SweepResult result;
  result.rounded = instance;
  QsatInstance& current = result.rounded;

  for (int w = 0; w < g.n; ++w) {
    std::vector<SchmidtDecomposition> sds;
    const VertexFamily family = vertex_family(current, w, &sds);
    RoundedFamily rounded;
    try {
      rounded = round_vertex(family, config);
    } catch (const RoundingError& e) {
      throw RoundingError(w, e.best_residual(),
                          "sweep_round: vertex " + std::to_string(w) + " failed: " + e.what());
    }
    ReplacementStep step;
    step.vertex = w;
    step.edges = g.incident(w);
    step.terms_before = current.terms;
    RoundingReport report = rounded.report;

    if (report.mode != "unchanged") {
      std::vector<Operator> replaced;
      for (std::size_t k = 0; k < step.edges.size(); ++k) {
        SchmidtDecomposition sd = sds[k];
        for (std::size_t a = 0; a < sd.terms.size(); ++a) sd.terms[a].pivot = rounded.family.groups[k][a];
        replaced.push_back(current.term(step.edges[k]));
        replaced.back().matrix = sd.reconstruct();
      }
      try {
        replaced = hermitize_terms(replaced, g.d, config.post_tol);
      } catch (const Error& e) {
        throw RoundingError(w, report.residual,
                            "sweep_round: vertex " + std::to_string(w) + ": " + e.what());
      }
      for (std::size_t k = 0; k < step.edges.size(); ++k) {
        const int e = step.edges[k];
        report.term_displacement =
            std::max(report.term_displacement, operator_norm(replaced[k].matrix - current.terms[e]));
        current.terms[e] = std::move(replaced[k].matrix);
      }
    }
    step.terms_after = current.terms;
    result.steps.push_back(std::move(step));
    result.report.vertices.push_back(report);
    result.report.max_vertex_displacement =
        std::max(result.report.max_vertex_displacement, report.displacement);
  }

  auto& rep = result.report;
  for (int e = 0; e < current.M(); ++e) {
    const double dist = operator_norm(current.terms[e] - instance.terms[e]);
    rep.term_distance.push_back(dist);
    rep.max_term_distance = std::max(rep.max_term_distance, dist);
  }
  rep.epsilon_report = 2.0 * rep.max_term_distance;
  const auto profile = noncommutativity_profile(current);
  rep.max_commutator = profile.max_op;
  rep.max_commutator_frobenius = profile.max_frobenius;
  if (profile.max_frobenius > config.post_tol) {
    std::ostringstream os;
    os << "sweep_round: rounded instance still has commutator " << profile.max_frobenius
       << " > " << config.post_tol;
    throw RoundingError(-1, profile.max_frobenius, os.str());
  }
  current.metadata.delta_actual = profile.max_op;
  current.metadata.ensemble = instance.metadata.ensemble + "+rounded";
  return result;
}

NormPreservationReport norm_preservation_check(const QsatInstance& original,
                                               const SweepResult& sweep) {
  NormPreservationReport report;
  const auto& g = original.graph;
  for (const auto& step : sweep.steps) {
    double step_max = 0.0;
    for (int e : step.edges) {
      if (step.terms_before[e] == step.terms_after[e]) continue;
      const int v = g.other_end(e, step.vertex);
      for (int f : g.incident(v)) {
        if (f == e) continue;
        // f does not touch step.vertex (simple graph), so it is outside the family
        QsatInstance before;
        before.graph = g;
        before.terms = step.terms_before;
        QsatInstance after;
        after.graph = g;
        after.terms = step.terms_before;
        after.terms[e] = step.terms_after[e];
        const double c_before = edge_commutator(before, e, f).norm();
        const double c_after = edge_commutator(after, e, f).norm();
        step_max = std::max(step_max, std::abs(c_after - c_before));
        ++report.checked_pairs;
      }
    }
    report.step_max_deviation.push_back(step_max);
    report.max_deviation = std::max(report.max_deviation, step_max);
  }
  const auto p0 = noncommutativity_profile(original);
  const auto p1 = noncommutativity_profile(sweep.rounded);
  for (std::size_t k = 0; k < p0.pairs.size(); ++k)
    report.compounding_deviation =
        std::max(report.compounding_deviation, std::abs(p1.pairs[k].frobenius - p0.pairs[k].frobenius));
  return report;
}

std::string rounding_report_to_json(const GlobalRoundingReport& report,
                                    const NormPreservationReport* norms) {
  Json j;
  j["format"] = "cqsat-rounding-report";
  j["version"] = 1;
  j["epsilon_report"] = report.epsilon_report;
  j["max_term_distance"] = report.max_term_distance;
  j["max_vertex_displacement"] = report.max_vertex_displacement;
  j["max_commutator"] = report.max_commutator;
  j["max_commutator_frobenius"] = report.max_commutator_frobenius;
  j["term_distance"] = report.term_distance;
  Json vertices = Json::array();
  for (const auto& v : report.vertices) {
    Json jv;
    jv["vertex"] = v.vertex;
    jv["mode"] = v.mode;
    jv["fell_back"] = v.fell_back;
    jv["displacement"] = v.displacement;
    jv["term_displacement"] = v.term_displacement;
    jv["initial_residual"] = v.initial_residual;
    jv["residual"] = v.residual;
    jv["closure_residual"] = v.closure_residual;
    jv["iterations"] = v.iterations;
    vertices.push_back(std::move(jv));
  }
  j["vertices"] = std::move(vertices);
  if (norms) {
    Json jn;
    jn["max_deviation"] = norms->max_deviation;
    jn["checked_pairs"] = norms->checked_pairs;
    jn["step_max_deviation"] = norms->step_max_deviation;
    jn["compounding_deviation"] = norms->compounding_deviation;
    j["norm_preservation"] = std::move(jn);
  }
  return dump_document(j);
}

}  // namespace cqsat
