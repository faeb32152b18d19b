#include "cqsat/witness.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "cqsat/error.hpp"
#include "cqsat/json_io.hpp"
#include "cqsat/parallel.hpp"
#include "cqsat/random.hpp"

namespace cqsat {

int TensorNetworkWitness::slot_index(int e, int v) const {
  const auto& edges = structures.at(v).edges;
  const auto it = std::find(edges.begin(), edges.end(), e);
  if (it == edges.end())
    throw DimensionError("witness: edge " + std::to_string(e) + " is not incident to vertex " +
                         std::to_string(v));
  return static_cast<int>(it - edges.begin());
}

const VertexBlock& TensorNetworkWitness::block(int v) const {
  return structures.at(v).blocks.at(assignment.blocks.at(v));
}

int TensorNetworkWitness::slot_dim(int e, int v) const {
  return block(v).factor_dims.at(slot_index(e, v));
}

namespace {

struct EdgeTable {
  // [b_u][b_v]
  std::vector<std::vector<double>> energy;
  std::vector<std::vector<Vector>> state;
};

Matrix restricted_term(const Matrix& q, const VertexBlock& bu, const VertexBlock& bv, int slot_u,
                       int slot_v) {
  const Matrix w = kron(bu.isometry, bv.isometry);
  const Matrix t = w.adjoint() * q * w;
  std::vector<int> dims = bu.virtual_dims();
  const auto dv = bv.virtual_dims();
  const int offset = static_cast<int>(dims.size());
  dims.insert(dims.end(), dv.begin(), dv.end());
  const std::vector<int> keep{slot_u, offset + slot_v};
  const Matrix r = partial_trace(t, dims, keep);
  return (r + r.adjoint()) / 2.0;
}

void check_structures(const QsatInstance& inst, const std::vector<VertexStructure>& structures) {
  const auto& g = inst.graph;
  if (static_cast<int>(structures.size()) != g.n)
    throw DimensionError("build_witness: expected " + std::to_string(g.n) + " vertex structures, got " +
                         std::to_string(structures.size()));
  for (int v = 0; v < g.n; ++v) {
    const auto& s = structures[v];
    if (s.d != g.d || s.edges != g.incident(v))
      throw DimensionError("build_witness: structure of vertex " + std::to_string(v) +
                           " does not match the instance");
    if (s.blocks.empty())
      throw Error("build_witness: vertex " + std::to_string(v) + " has no blocks");
    for (const auto& b : s.blocks)
      if (b.dim() == 0 || b.factor_dims.size() != s.edges.size())
        throw Error("build_witness: empty or malformed block at vertex " + std::to_string(v));
  }
}

double assignment_energy(const QuditGraph& g, const std::vector<EdgeTable>& tables,
                         const std::vector<int>& a) {
  double total = 0.0;
  for (std::size_t e = 0; e < g.edges.size(); ++e)
    total += tables[e].energy[a[g.edges[e].first]][a[g.edges[e].second]];
  return total;
}

// Reshapes an edge state into the k_a x k_b coefficient matrix (row-major index).
Matrix coefficient_matrix(const Vector& phi, int ka, int kb) {
  Matrix c(ka, kb);
  for (int i = 0; i < ka; ++i)
    for (int j = 0; j < kb; ++j) c(i, j) = phi(i * kb + j);
  return c;
}

// Unitary whose first columns are the given orthonormal columns.
Matrix complete_unitary(const Matrix& columns) {
  const Eigen::Index n = columns.rows();
  const Eigen::Index m = columns.cols();
  Matrix seed(n, m + n);
  seed << columns, Matrix::Identity(n, n);
  Eigen::HouseholderQR<Matrix> qr(seed);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  q.leftCols(m) = columns;
  return q;
}

std::vector<int> digits_of(int x, const std::vector<int>& dims) {
  std::vector<int> out(dims.size());
  for (int k = static_cast<int>(dims.size()) - 1; k >= 0; --k) {
    out[k] = x % dims[k];
    x /= dims[k];
  }
  return out;
}

int index_of(const std::vector<int>& digits, const std::vector<int>& dims) {
  int x = 0;
  for (std::size_t k = 0; k < dims.size(); ++k) x = x * dims[k] + digits[k];
  return x;
}

}  // namespace

TensorNetworkWitness build_witness(const QsatInstance& commuting,
                                   const std::vector<VertexStructure>& structures,
                                   const WitnessConfig& config) {
  commuting.validate();
  check_structures(commuting, structures);
  const auto profile = noncommutativity_profile(commuting, config.workers);
  if (profile.max_frobenius > config.premise_tol) {
    std::ostringstream os;
    os << "build_witness: instance is not commuting (max commutator " << profile.max_frobenius
       << " > " << config.premise_tol << ")";
    throw Error(os.str());
  }
  const auto& g = commuting.graph;
  TensorNetworkWitness w;
  w.graph = g;
  w.structures = structures;
  w.config_hash = commuting.metadata.config_hash;

  const auto tables = parallel_map(g.edges.size(), config.workers, [&](std::size_t e) {
    const auto [u, v] = g.edges[e];
    const auto& su = structures[u];
    const auto& sv = structures[v];
    const int slot_u = static_cast<int>(std::find(su.edges.begin(), su.edges.end(), e) - su.edges.begin());
    const int slot_v = static_cast<int>(std::find(sv.edges.begin(), sv.edges.end(), e) - sv.edges.begin());
    EdgeTable t;
    t.energy.assign(su.blocks.size(), std::vector<double>(sv.blocks.size()));
    t.state.assign(su.blocks.size(), std::vector<Vector>(sv.blocks.size()));
    for (std::size_t a = 0; a < su.blocks.size(); ++a)
      for (std::size_t b = 0; b < sv.blocks.size(); ++b) {
        const Matrix q = restricted_term(commuting.terms[e], su.blocks[a], sv.blocks[b], slot_u, slot_v);
        Eigen::SelfAdjointEigenSolver<Matrix> es(q);
        t.energy[a][b] = es.eigenvalues()(0);
        t.state[a][b] = es.eigenvectors().col(0);
      }
    return t;
  });

  std::vector<int> radix(g.n);
  double combinations = 1.0;
  for (int v = 0; v < g.n; ++v) {
    radix[v] = static_cast<int>(structures[v].blocks.size());
    combinations *= radix[v];
  }
  w.search.combinations = combinations;
  w.search.seed = config.seed;
  std::vector<int> best(g.n, 0);
  double best_energy = assignment_energy(g, tables, best);

  if (combinations <= config.exhaustive_limit) {
    w.search.strategy = "exhaustive";
    std::vector<int> a(g.n, 0);
    std::uint64_t visited = 1;
    for (;;) {
      int v = g.n - 1;
      while (v >= 0 && ++a[v] == radix[v]) a[v--] = 0;
      if (v < 0) break;
      ++visited;
      const double energy = assignment_energy(g, tables, a);
      if (energy < best_energy) {
        best_energy = energy;
        best = a;
      }
    }
    w.search.visited = visited;
  } else {
    w.search.strategy = "annealing";
    w.search.steps = config.anneal_steps;
    w.search.restarts = config.anneal_restarts;
    w.search.t_start = config.t_start;
    w.search.t_end = config.t_end;
    Rng rng(config.seed);
    std::uint64_t visited = 0;
    for (int restart = 0; restart < config.anneal_restarts; ++restart) {
      std::vector<int> a(g.n);
      for (int v = 0; v < g.n; ++v) a[v] = static_cast<int>(rng.below(radix[v]));
      double energy = assignment_energy(g, tables, a);
      ++visited;
      const double ratio =
          config.anneal_steps > 1 ? std::pow(config.t_end / config.t_start, 1.0 / (config.anneal_steps - 1)) : 1.0;
      double temp = config.t_start;
      for (int step = 0; step < config.anneal_steps; ++step, temp *= ratio) {
        const int v = static_cast<int>(rng.below(g.n));
        if (radix[v] < 2) continue;
        int nb = static_cast<int>(rng.below(radix[v] - 1));
        if (nb >= a[v]) ++nb;
        double delta = 0.0;
        for (int e : g.incident(v)) {
          const auto [x, y] = g.edges[e];
          const auto& tab = tables[e].energy;
          delta -= tab[a[x]][a[y]];
          delta += x == v ? tab[nb][a[y]] : tab[a[x]][nb];
        }
        ++visited;
        if (delta <= 0.0 || rng.uniform() < std::exp(-delta / temp)) {
          a[v] = nb;
          energy += delta;
          if (energy < best_energy) {
            best_energy = assignment_energy(g, tables, a);
            best = a;
          }
        }
      }
    }
    w.search.visited = visited;
  }

  w.assignment.blocks = best;
  for (std::size_t e = 0; e < g.edges.size(); ++e)
    w.edge_states.push_back(tables[e].state[best[g.edges[e].first]][best[g.edges[e].second]]);
  for (int v = 0; v < g.n; ++v) {
    Vector r = Vector::Zero(structures[v].blocks[best[v]].residual);
    r(0) = 1.0;
    w.residual_states.push_back(std::move(r));
  }
  w.build_energy = assignment_energy(g, tables, best);
  return w;
}

EnergyReport evaluate_energy(const TensorNetworkWitness& witness, const QsatInstance& instance,
                             unsigned workers) {
  const auto& g = instance.graph;
  const auto& wg = witness.graph;
  if (wg.n != g.n || wg.d != g.d || wg.edges != g.edges)
    throw DimensionError("evaluate_energy: witness graph does not match the instance");
  if (static_cast<int>(witness.structures.size()) != g.n ||
      static_cast<int>(witness.assignment.blocks.size()) != g.n ||
      static_cast<int>(witness.residual_states.size()) != g.n ||
      witness.edge_states.size() != g.edges.size())
    throw DimensionError("evaluate_energy: witness has the wrong number of parts");
  for (int v = 0; v < g.n; ++v) {
    const auto& s = witness.structures[v];
    const int b = witness.assignment.blocks[v];
    if (b < 0 || b >= static_cast<int>(s.blocks.size()))
      throw DimensionError("evaluate_energy: block label out of range at vertex " + std::to_string(v));
    if (s.edges != g.incident(v) || s.blocks[b].isometry.rows() != g.d ||
        s.blocks[b].factor_dims.size() != s.edges.size())
      throw DimensionError("evaluate_energy: structure mismatch at vertex " + std::to_string(v));
    if (witness.residual_states[v].size() != s.blocks[b].residual)
      throw DimensionError("evaluate_energy: residual state dimension at vertex " + std::to_string(v));
    if (std::abs(witness.residual_states[v].norm() - 1.0) > 1e-10)
      throw Error("evaluate_energy: residual state of vertex " + std::to_string(v) + " is not normalized");
  }
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const auto [u, v] = g.edges[e];
    const int e_id = static_cast<int>(e);
    if (witness.edge_states[e].size() != witness.slot_dim(e_id, u) * witness.slot_dim(e_id, v))
      throw DimensionError("evaluate_energy: edge state " + std::to_string(e) + " has the wrong dimension");
    if (std::abs(witness.edge_states[e].norm() - 1.0) > 1e-10)
      throw Error("evaluate_energy: edge state " + std::to_string(e) + " is not normalized");
  }

  // reduced density matrix of the slot of edge f held by vertex x
  auto half = [&](int f, int x) -> Matrix {
    const auto [a, b] = g.edges[f];
    const Matrix c = coefficient_matrix(witness.edge_states[f], witness.slot_dim(f, a), witness.slot_dim(f, b));
    return x == a ? Matrix(c * c.adjoint()) : Matrix((c.adjoint() * c).transpose());
  };

  EnergyReport report;
  report.M = static_cast<int>(g.edges.size());
  report.per_edge = parallel_map(g.edges.size(), workers, [&](std::size_t e) {
    const auto [u, v] = g.edges[e];
    const int e_id = static_cast<int>(e);
    const VertexBlock& bu = witness.block(u);
    const VertexBlock& bv = witness.block(v);
    const int su = witness.slot_index(e_id, u);
    const int sv = witness.slot_index(e_id, v);
    const auto du = bu.virtual_dims();
    const auto dv = bv.virtual_dims();
    const int nu = static_cast<int>(du.size());

    // construction order: edge pair, then the remaining factors of u and v
    const Vector& phi = witness.edge_states[e];
    Matrix rho = phi * phi.adjoint();
    std::vector<int> dims{du[su], dv[sv]};
    std::vector<int> final_pos{su, nu + sv};
    auto add_factors = [&](int x, const std::vector<int>& dx, int skip, int offset) {
      const auto& edges = witness.structures[x].edges;
      for (int k = 0; k < static_cast<int>(dx.size()); ++k) {
        if (k == skip) continue;
        const Matrix piece = k < static_cast<int>(edges.size())
                                 ? half(edges[k], x)
                                 : Matrix(witness.residual_states[x] * witness.residual_states[x].adjoint());
        rho = kron(rho, piece);
        dims.push_back(dx[k]);
        final_pos.push_back(offset + k);
      }
    };
    add_factors(u, du, su, 0);
    add_factors(v, dv, sv, nu);
    std::vector<int> perm(final_pos.size());
    for (std::size_t k = 0; k < final_pos.size(); ++k) perm[final_pos[k]] = static_cast<int>(k);
    rho = permute_factors(rho, dims, perm);
    const Matrix w = kron(bu.isometry, bv.isometry);
    const Matrix lifted = w.adjoint() * instance.terms[e] * w;
    return (lifted.cwiseProduct(rho.transpose())).sum().real();
  });
  for (double x : report.per_edge) report.total += x;
  return report;
}

std::string to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::None: return "none";
    case RejectReason::Dimension: return "dimension";
    case RejectReason::Isometry: return "isometry";
    case RejectReason::Normalization: return "normalization";
    case RejectReason::Assignment: return "assignment";
    case RejectReason::Energy: return "energy";
  }
  return "unknown";
}

VerifyResult np_verify(const TensorNetworkWitness& witness, const QsatInstance& instance, double r,
                       unsigned workers) {
  if (!(r > 0.0 && r < 1.0)) throw Error("np_verify: r must lie in (0, 1)");
  VerifyResult out;
  out.r = r;
  auto reject = [&](RejectReason reason, const std::string& detail) {
    out.accept = false;
    out.reason = reason;
    out.detail = detail;
    return out;
  };
  const auto& g = instance.graph;
  const auto& wg = witness.graph;
  if (wg.n != g.n || wg.d != g.d || wg.D != g.D || wg.edges != g.edges)
    return reject(RejectReason::Dimension, "witness graph does not match the instance");
  if (static_cast<int>(witness.structures.size()) != g.n)
    return reject(RejectReason::Dimension, "wrong number of vertex structures");
  if (static_cast<int>(witness.assignment.blocks.size()) != g.n)
    return reject(RejectReason::Assignment, "wrong number of block labels");
  if (witness.edge_states.size() != g.edges.size() || static_cast<int>(witness.residual_states.size()) != g.n)
    return reject(RejectReason::Dimension, "wrong number of edge or residual states");
  constexpr double tol = 1e-8;
  for (int v = 0; v < g.n; ++v) {
    const auto& s = witness.structures[v];
    const std::string at = "vertex " + std::to_string(v);
    if (s.d != g.d || s.edges != g.incident(v))
      return reject(RejectReason::Dimension, at + ": structure does not match the instance");
    if (s.blocks.empty()) return reject(RejectReason::Dimension, at + ": no blocks");
    const int b = witness.assignment.blocks[v];
    if (b < 0 || b >= static_cast<int>(s.blocks.size()))
      return reject(RejectReason::Assignment, at + ": block label " + std::to_string(b) + " out of range");
    for (std::size_t k = 0; k < s.blocks.size(); ++k) {
      const auto& blk = s.blocks[k];
      long prod = blk.residual;
      for (int f : blk.factor_dims) prod *= f;
      if (blk.isometry.rows() != g.d || blk.isometry.cols() != prod || prod < 1 ||
          blk.factor_dims.size() != s.edges.size() ||
          std::any_of(blk.factor_dims.begin(), blk.factor_dims.end(), [](int f) { return f < 1; }))
        return reject(RejectReason::Dimension, at + ": block " + std::to_string(k) + " has inconsistent dimensions");
      const double iso = (blk.isometry.adjoint() * blk.isometry - Matrix::Identity(prod, prod)).norm();
      if (!(iso <= tol))
        return reject(RejectReason::Isometry, at + ": block " + std::to_string(k) + " isometry residual " + std::to_string(iso));
      for (std::size_t k2 = k + 1; k2 < s.blocks.size(); ++k2) {
        const double overlap = (blk.isometry.adjoint() * s.blocks[k2].isometry).norm();
        if (!(overlap <= tol))
          return reject(RejectReason::Isometry, at + ": blocks " + std::to_string(k) + " and " +
                                                    std::to_string(k2) + " overlap");
      }
    }
    const auto& res = witness.residual_states[v];
    if (res.size() != s.blocks[b].residual)
      return reject(RejectReason::Dimension, at + ": residual state has the wrong dimension");
    if (!(std::abs(res.norm() - 1.0) <= tol))
      return reject(RejectReason::Normalization, at + ": residual state is not normalized");
  }
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const auto [u, v] = g.edges[e];
    const int id = static_cast<int>(e);
    const auto& phi = witness.edge_states[e];
    if (phi.size() != witness.slot_dim(id, u) * witness.slot_dim(id, v))
      return reject(RejectReason::Dimension, "edge " + std::to_string(e) + ": state has the wrong dimension");
    if (!(std::abs(phi.norm() - 1.0) <= tol))
      return reject(RejectReason::Normalization, "edge " + std::to_string(e) + ": state norm " + std::to_string(phi.norm()));
  }
  try {
    // normalization slack up to 1e-8 is accepted; renormalize before evaluating
    TensorNetworkWitness normalized = witness;
    for (auto& phi : normalized.edge_states) phi.normalize();
    for (auto& res : normalized.residual_states) res.normalize();
    out.energy = evaluate_energy(normalized, instance, workers);
  } catch (const Error& e) {
    return reject(RejectReason::Dimension, e.what());
  }
  if (!std::isfinite(out.energy.total)) return reject(RejectReason::Energy, "energy is not finite");
  if (out.energy.total < r * out.energy.M) {
    out.accept = true;
    out.reason = RejectReason::None;
    return out;
  }
  std::ostringstream os;
  os << "energy " << out.energy.total << " >= r*M = " << r * out.energy.M;
  return reject(RejectReason::Energy, os.str());
}

std::vector<int> edge_coloring(const QuditGraph& graph) {
  const int m = static_cast<int>(graph.edges.size());
  std::vector<int> degree(graph.n, 0);
  for (const auto& [u, v] : graph.edges) ++degree[u], ++degree[v];
  const int delta = m ? *std::max_element(degree.begin(), degree.end()) : 0;
  std::vector<int> color(m, -1);
  // used[v] bitmask of colors at v
  std::vector<std::uint64_t> used(graph.n, 0);
  long budget = 200000;
  std::function<bool(int)> assign = [&](int e) -> bool {
    if (e == m) return true;
    if (--budget < 0) return false;
    const auto [u, v] = graph.edges[e];
    for (int c = 0; c < delta; ++c) {
      const std::uint64_t bit = std::uint64_t{1} << c;
      if ((used[u] | used[v]) & bit) continue;
      used[u] |= bit;
      used[v] |= bit;
      color[e] = c;
      if (assign(e + 1)) return true;
      used[u] &= ~bit;
      used[v] &= ~bit;
    }
    color[e] = -1;
    return false;
  };
  if (delta < 63 && assign(0)) return color;
  std::fill(color.begin(), color.end(), -1);
  std::vector<std::vector<bool>> taken(graph.n, std::vector<bool>(2 * delta + 1, false));
  for (int e = 0; e < m; ++e) {
    const auto [u, v] = graph.edges[e];
    int c = 0;
    while (taken[u][c] || taken[v][c]) ++c;
    color[e] = c;
    taken[u][c] = taken[v][c] = true;
  }
  return color;
}

Circuit witness_to_circuit(const TensorNetworkWitness& witness) {
  const auto& g = witness.graph;
  const int d = g.d;
  Circuit circuit;
  circuit.n = g.n;
  circuit.d = d;
  const auto colors = edge_coloring(g);
  circuit.colors = colors.empty() ? 0 : *std::max_element(colors.begin(), colors.end()) + 1;
  for (int c = 0; c < circuit.colors; ++c) {
    CircuitLayer layer;
    layer.kind = "edge-prep";
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      if (colors[e] != c) continue;
      const auto [u, v] = g.edges[e];
      const int id = static_cast<int>(e);
      const auto du = witness.block(u).virtual_dims();
      const auto dv = witness.block(v).virtual_dims();
      const int mu = witness.block(u).dim();
      const int mv = witness.block(v).dim();
      const int su = witness.slot_index(id, u);
      const int sv = witness.slot_index(id, v);
      const int kv = dv[sv];
      const Matrix prep = complete_unitary(witness.edge_states[e].normalized());
      Matrix gate = Matrix::Identity(d * d, d * d);
      for (int xu = 0; xu < mu; ++xu)
        for (int xv = 0; xv < mv; ++xv) {
          gate(xu * d + xv, xu * d + xv) = 0.0;
          auto digits_u = digits_of(xu, du);
          auto digits_v = digits_of(xv, dv);
          const int in = digits_u[su] * kv + digits_v[sv];
          for (int out = 0; out < prep.rows(); ++out) {
            digits_u[su] = out / kv;
            digits_v[sv] = out % kv;
            gate(index_of(digits_u, du) * d + index_of(digits_v, dv), xu * d + xv) += prep(out, in);
          }
        }
      layer.gates.push_back({{u, v}, id, std::move(gate)});
    }
    circuit.layers.push_back(std::move(layer));
  }
  CircuitLayer vertices;
  vertices.kind = "vertex-isometry";
  for (int v = 0; v < g.n; ++v) {
    const VertexBlock& b = witness.block(v);
    const int slots = b.dim() / b.residual;
    const Matrix res_prep = complete_unitary(witness.residual_states[v].normalized());
    const Matrix columns = b.isometry * kron(Matrix::Identity(slots, slots), res_prep);
    vertices.gates.push_back({{v}, -1, complete_unitary(columns)});
  }
  circuit.layers.push_back(std::move(vertices));
  circuit.depth = static_cast<int>(circuit.layers.size());
  return circuit;
}

Vector simulate_circuit(const Circuit& circuit, std::size_t cap) {
  const int n = circuit.n;
  const int d = circuit.d;
  double size_f = std::pow(static_cast<double>(d), n);
  if (size_f > static_cast<double>(cap))
    throw Error("simulate_circuit: d^n = " + std::to_string(static_cast<long long>(size_f)) +
                " exceeds the cap of " + std::to_string(cap));
  const std::size_t size = static_cast<std::size_t>(size_f);
  Vector psi = Vector::Zero(static_cast<Eigen::Index>(size));
  psi(0) = 1.0;
  auto stride = [&](int v) {
    std::size_t s = 1;
    for (int k = v + 1; k < n; ++k) s *= d;
    return s;
  };
  for (const auto& layer : circuit.layers)
    for (const auto& gate : layer.gates) {
      if (gate.vertices.size() == 1) {
        const std::size_t s = stride(gate.vertices[0]);
        Vector x(d);
        for (std::size_t base = 0; base < size; ++base) {
          if ((base / s) % d != 0) continue;
          for (int a = 0; a < d; ++a) x(a) = psi(base + a * s);
          const Vector y = gate.unitary * x;
          for (int a = 0; a < d; ++a) psi(base + a * s) = y(a);
        }
      } else {
        const std::size_t s0 = stride(gate.vertices[0]);
        const std::size_t s1 = stride(gate.vertices[1]);
        Vector x(d * d);
        for (std::size_t base = 0; base < size; ++base) {
          if ((base / s0) % d != 0 || (base / s1) % d != 0) continue;
          for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) x(a * d + b) = psi(base + a * s0 + b * s1);
          const Vector y = gate.unitary * x;
          for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) psi(base + a * s0 + b * s1) = y(a * d + b);
        }
      }
    }
  return psi;
}

std::string serialize_witness(const TensorNetworkWitness& w) {
  Json j;
  j["format"] = "cqsat-witness";
  j["version"] = kWitnessFormatVersion;
  j["config_hash"] = w.config_hash;
  j["n"] = w.graph.n;
  j["d"] = w.graph.d;
  j["D"] = w.graph.D;
  Json edges = Json::array();
  for (const auto& [u, v] : w.graph.edges) edges.push_back({u, v});
  j["edges"] = std::move(edges);
  j["assignment"] = w.assignment.blocks;
  j["residual_state_choice"] = "first basis vector";
  j["build_energy"] = w.build_energy;
  Json search;
  search["strategy"] = w.search.strategy;
  search["combinations"] = w.search.combinations;
  search["visited"] = w.search.visited;
  search["seed"] = w.search.seed;
  if (w.search.strategy == "annealing") {
    search["steps"] = w.search.steps;
    search["restarts"] = w.search.restarts;
    search["schedule"] = "geometric";
    search["t_start"] = w.search.t_start;
    search["t_end"] = w.search.t_end;
  }
  j["search"] = std::move(search);
  Json structures = Json::array();
  for (const auto& s : w.structures) {
    Json js;
    js["vertex"] = s.vertex;
    js["edges"] = s.edges;
    Json blocks = Json::array();
    for (const auto& b : s.blocks) {
      Json jb;
      jb["factor_dims"] = b.factor_dims;
      jb["residual"] = b.residual;
      jb["isometry"] = matrix_to_json(b.isometry);
      blocks.push_back(std::move(jb));
    }
    js["blocks"] = std::move(blocks);
    structures.push_back(std::move(js));
  }
  j["structures"] = std::move(structures);
  Json states = Json::array();
  for (const auto& s : w.edge_states) states.push_back(vector_to_json(s));
  j["edge_states"] = std::move(states);
  Json residuals = Json::array();
  for (const auto& s : w.residual_states) residuals.push_back(vector_to_json(s));
  j["residual_states"] = std::move(residuals);
  return dump_document(j);
}

TensorNetworkWitness deserialize_witness(std::string_view document) {
  const Json j = parse_document(document, "witness document");
  if (!j.is_object()) throw SchemaError("", "witness document must be an object");
  if (require_field(j, "", "format") != "cqsat-witness")
    throw SchemaError("format", "expected \"cqsat-witness\"");
  const long version = require_int(j, "", "version");
  if (version != kWitnessFormatVersion)
    throw SchemaError("version", "unsupported version " + std::to_string(version));
  TensorNetworkWitness w;
  if (auto it = j.find("config_hash"); it != j.end() && it->is_string()) w.config_hash = it->get<std::string>();
  w.graph.n = static_cast<int>(require_int(j, "", "n"));
  w.graph.d = static_cast<int>(require_int(j, "", "d"));
  w.graph.D = static_cast<int>(require_int(j, "", "D"));
  if (w.graph.n < 1 || w.graph.d < 1 || w.graph.D < 0) throw SchemaError("n", "invalid sizes");
  const Json& edges = require_field(j, "", "edges");
  if (!edges.is_array()) throw SchemaError("edges", "expected an array");
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const Json& p = edges[e];
    if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer())
      throw SchemaError("edges[" + std::to_string(e) + "]", "expected [u, v]");
    w.graph.edges.emplace_back(p[0].get<int>(), p[1].get<int>());
  }
  const Json& assignment = require_field(j, "", "assignment");
  if (!assignment.is_array()) throw SchemaError("assignment", "expected an array");
  for (std::size_t v = 0; v < assignment.size(); ++v) {
    if (!assignment[v].is_number_integer())
      throw SchemaError("assignment[" + std::to_string(v) + "]", "expected an integer");
    w.assignment.blocks.push_back(assignment[v].get<int>());
  }
  if (auto it = j.find("build_energy"); it != j.end() && it->is_number()) w.build_energy = it->get<double>();
  if (auto it = j.find("search"); it != j.end() && it->is_object()) {
    const Json& s = *it;
    if (auto f = s.find("strategy"); f != s.end() && f->is_string()) w.search.strategy = f->get<std::string>();
    if (auto f = s.find("combinations"); f != s.end() && f->is_number()) w.search.combinations = f->get<double>();
    if (auto f = s.find("visited"); f != s.end() && f->is_number_unsigned()) w.search.visited = f->get<std::uint64_t>();
    if (auto f = s.find("seed"); f != s.end() && f->is_number_unsigned()) w.search.seed = f->get<std::uint64_t>();
    if (auto f = s.find("steps"); f != s.end() && f->is_number_integer()) w.search.steps = f->get<int>();
    if (auto f = s.find("restarts"); f != s.end() && f->is_number_integer()) w.search.restarts = f->get<int>();
    if (auto f = s.find("t_start"); f != s.end() && f->is_number()) w.search.t_start = f->get<double>();
    if (auto f = s.find("t_end"); f != s.end() && f->is_number()) w.search.t_end = f->get<double>();
  }
  const Json& structures = require_field(j, "", "structures");
  if (!structures.is_array()) throw SchemaError("structures", "expected an array");
  for (std::size_t v = 0; v < structures.size(); ++v) {
    const std::string path = "structures[" + std::to_string(v) + "]";
    const Json& js = structures[v];
    VertexStructure s;
    s.vertex = static_cast<int>(require_int(js, path, "vertex"));
    s.d = w.graph.d;
    const Json& se = require_field(js, path, "edges");
    if (!se.is_array()) throw SchemaError(path + ".edges", "expected an array");
    for (const auto& x : se) {
      if (!x.is_number_integer()) throw SchemaError(path + ".edges", "expected integers");
      s.edges.push_back(x.get<int>());
    }
    const Json& blocks = require_field(js, path, "blocks");
    if (!blocks.is_array()) throw SchemaError(path + ".blocks", "expected an array");
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const std::string bp = path + ".blocks[" + std::to_string(b) + "]";
      VertexBlock blk;
      const Json& fd = require_field(blocks[b], bp, "factor_dims");
      if (!fd.is_array()) throw SchemaError(bp + ".factor_dims", "expected an array");
      long cols = 1;
      for (const auto& x : fd) {
        if (!x.is_number_integer() || x.get<long>() < 1 || x.get<long>() > 1 << 20)
          throw SchemaError(bp + ".factor_dims", "expected positive integers");
        blk.factor_dims.push_back(x.get<int>());
        cols *= blk.factor_dims.back();
      }
      blk.residual = static_cast<int>(require_int(blocks[b], bp, "residual"));
      if (blk.residual < 1) throw SchemaError(bp + ".residual", "expected a positive integer");
      cols *= blk.residual;
      if (cols > 1 << 20) throw SchemaError(bp, "block too large");
      blk.isometry = matrix_from_json(require_field(blocks[b], bp, "isometry"), bp + ".isometry", w.graph.d, cols);
      s.blocks.push_back(std::move(blk));
    }
    w.structures.push_back(std::move(s));
  }
  auto read_vectors = [&](const char* key) {
    const Json& arr = require_field(j, "", key);
    if (!arr.is_array()) throw SchemaError(key, "expected an array");
    std::vector<Vector> out;
    for (std::size_t k = 0; k < arr.size(); ++k) {
      const std::string path = std::string(key) + "[" + std::to_string(k) + "]";
      if (!arr[k].is_array()) throw SchemaError(path, "expected an array");
      out.push_back(vector_from_json(arr[k], path, static_cast<Eigen::Index>(arr[k].size())));
    }
    return out;
  };
  w.edge_states = read_vectors("edge_states");
  w.residual_states = read_vectors("residual_states");
  return w;
}

std::string energy_report_to_json(const EnergyReport& report) {
  Json j;
  j["format"] = "cqsat-energy-report";
  j["version"] = 1;
  j["M"] = report.M;
  j["total"] = report.total;
  j["energy_over_M"] = report.per_M();
  j["per_edge"] = report.per_edge;
  return dump_document(j);
}

}  // namespace cqsat
