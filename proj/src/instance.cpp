#include "cqsat/instance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "cqsat/error.hpp"
#include "cqsat/json_io.hpp"
#include "cqsat/parallel.hpp"
#include "cqsat/random.hpp"

namespace cqsat {

// ---- graph ------------------------------------------------------------------

std::vector<int> QuditGraph::incident(int v) const {
  std::vector<int> out;
  for (int e = 0; e < static_cast<int>(edges.size()); ++e)
    if (edges[e].first == v || edges[e].second == v) out.push_back(e);
  return out;
}

int QuditGraph::other_end(int edge, int v) const {
  const auto [a, b] = edges.at(edge);
  if (a == v) return b;
  if (b == v) return a;
  throw Error("vertex " + std::to_string(v) + " is not an endpoint of edge " + std::to_string(edge));
}

void QuditGraph::validate() const {
  if (n < 1) throw SchemaError("n", "must be positive");
  if (d < 1) throw SchemaError("d", "must be positive");
  if (D < 0) throw SchemaError("D", "must be nonnegative");
  if ((static_cast<long>(n) * D) % 2 != 0) throw SchemaError("D", "n*D must be even");
  std::set<std::pair<int, int>> seen;
  std::vector<int> degree(n, 0);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [u, v] = edges[e];
    const std::string path = "edges[" + std::to_string(e) + "]";
    if (u < 0 || v < 0 || u >= n || v >= n) throw SchemaError(path, "vertex out of range");
    if (u == v) throw SchemaError(path, "self-loop at vertex " + std::to_string(u));
    if (u > v) throw SchemaError(path, "edge must be stored as [u, v] with u < v");
    if (!seen.insert({u, v}).second) throw SchemaError(path, "duplicate edge");
    ++degree[u];
    ++degree[v];
  }
  for (int v = 0; v < n; ++v) {
    if (degree[v] != D) {
      std::ostringstream os;
      os << "vertex " << v << " has degree " << degree[v] << ", expected D=" << D;
      throw SchemaError("edges", os.str());
    }
  }
}

QuditGraph generate_regular_graph(int n, int D, std::uint64_t seed, int d, int max_attempts) {
  if (n < 1 || D < 0) throw Error("generate_regular_graph: n must be positive and D nonnegative");
  if ((static_cast<long>(n) * D) % 2 != 0)
    throw Error("generate_regular_graph: n*D = " + std::to_string(n * D) + " is odd");
  if (D >= n) throw Error("generate_regular_graph: need D < n");
  Rng rng(seed);
  std::vector<int> points;
  for (int v = 0; v < n; ++v)
    for (int k = 0; k < D; ++k) points.push_back(v);
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    rng.shuffle(points);
    std::set<std::pair<int, int>> edges;
    bool ok = true;
    for (std::size_t i = 0; i + 1 < points.size(); i += 2) {
      int u = points[i], v = points[i + 1];
      if (u == v) {
        ok = false;
        break;
      }
      if (u > v) std::swap(u, v);
      if (!edges.insert({u, v}).second) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    QuditGraph g;
    g.n = n;
    g.d = d;
    g.D = D;
    g.edges.assign(edges.begin(), edges.end());
    return g;
  }
  throw Error("generate_regular_graph: rejection budget of " + std::to_string(max_attempts) +
              " pairings exhausted");
}

// ---- instance ---------------------------------------------------------------

Operator QsatInstance::term(int e) const {
  const auto [u, v] = graph.edges.at(e);
  return {terms.at(e), Support::on_edge(e, u, v)};
}

void QsatInstance::validate() const {
  graph.validate();
  if (terms.size() != graph.edges.size()) {
    throw SchemaError("terms", "expected one term per edge (" + std::to_string(graph.edges.size()) +
                                   "), found " + std::to_string(terms.size()));
  }
  const Eigen::Index dim = static_cast<Eigen::Index>(graph.d) * graph.d;
  for (std::size_t e = 0; e < terms.size(); ++e) {
    const std::string path = "terms[" + std::to_string(e) + "]";
    const Matrix& q = terms[e];
    if (q.rows() != dim || q.cols() != dim) throw SchemaError(path, "term must be d^2 x d^2");
    const double herm = hermiticity_residual(q);
    if (herm > 1e-10) {
      std::ostringstream os;
      os << "term on edge " << e << " is not Hermitian (residual " << herm << ")";
      throw SchemaError(path, os.str());
    }
    if (metadata.projective) {
      const double proj = projector_residual(q);
      if (proj > 1e-10) {
        std::ostringstream os;
        os << "term on edge " << e << " is flagged projective but ||Q^2 - Q||_F = " << proj;
        throw SchemaError(path, os.str());
      }
    }
  }
}

// ---- commuting generator ----------------------------------------------------

int BlockLayout::dim() const {
  return std::accumulate(slot_dims.begin(), slot_dims.end(), residual, std::multiplies<>());
}

namespace {

void factorizations(int m, int slots, std::vector<int>& prefix,
                    std::vector<std::vector<int>>& out) {
  if (slots == 1) {
    prefix.push_back(m);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (int f = 1; f <= m; ++f) {
    if (m % f != 0) continue;
    prefix.push_back(f);
    factorizations(m / f, slots - 1, prefix, out);
    prefix.pop_back();
  }
}

void partitions(int remaining, int max_part, std::vector<int>& prefix,
                std::vector<std::vector<int>>& out) {
  if (remaining == 0) {
    out.push_back(prefix);
    return;
  }
  for (int p = std::min(remaining, max_part); p >= 1; --p) {
    prefix.push_back(p);
    partitions(remaining - p, p, prefix, out);
    prefix.pop_back();
  }
}

// (slot_dims..., residual) for the block pair space of an edge: u's slots and
// residual followed by v's.
Matrix embed_block_pair(const Matrix& p, const BlockLayout& bu, const BlockLayout& bv, int slot_u,
                        int slot_v) {
  std::vector<int> dims(bu.slot_dims);
  dims.push_back(bu.residual);
  const int offset_v = static_cast<int>(dims.size());
  dims.insert(dims.end(), bv.slot_dims.begin(), bv.slot_dims.end());
  dims.push_back(bv.residual);
  const int positions[] = {slot_u, offset_v + slot_v};
  return embed_on_factors(p, dims, positions);
}

}  // namespace

std::vector<std::vector<BlockLayout>> enumerate_layouts(int d, int D) {
  std::vector<std::vector<BlockLayout>> out;
  if (d < 4) {
    std::vector<BlockLayout> classical(d, BlockLayout{std::vector<int>(D, 1), 1});
    out.push_back(classical);
    return out;
  }
  std::vector<std::vector<int>> parts;
  std::vector<int> prefix;
  partitions(d, d, prefix, parts);
  for (const auto& part : parts) {
    std::vector<std::vector<std::vector<int>>> per_block;
    for (int size : part) {
      std::vector<std::vector<int>> f;
      std::vector<int> pre;
      factorizations(size, D + 1, pre, f);
      per_block.push_back(std::move(f));
    }
    std::vector<std::size_t> idx(part.size(), 0);
    while (true) {
      std::vector<BlockLayout> layout;
      for (std::size_t b = 0; b < part.size(); ++b) {
        const auto& f = per_block[b][idx[b]];
        layout.push_back({std::vector<int>(f.begin(), f.end() - 1), f.back()});
      }
      out.push_back(std::move(layout));
      std::size_t k = 0;
      while (k < idx.size() && ++idx[k] == per_block[k].size()) idx[k++] = 0;
      if (k == idx.size()) break;
    }
  }
  return out;
}

QsatInstance generate_commuting_instance(const QuditGraph& graph, std::uint64_t seed,
                                         bool satisfiable, CommutingLayout* layout_out) {
  graph.validate();
  const int d = graph.d;
  const int D = graph.D;
  const auto layouts = enumerate_layouts(d, D);
  if (layouts.empty()) throw Error("generate_commuting_instance: no block layout for this d");
  Rng rng(seed);

  CommutingLayout layout;
  for (int v = 0; v < graph.n; ++v) {
    VertexLayout vl;
    vl.blocks = layouts[rng.below(layouts.size())];
    vl.frame = d >= 4 ? rng.unitary(d) : Matrix::Identity(d, d);
    layout.designated.push_back(static_cast<int>(rng.below(vl.blocks.size())));
    layout.vertices.push_back(std::move(vl));
  }

  QsatInstance inst;
  inst.graph = graph;
  inst.metadata.seed = seed;
  inst.metadata.projective = true;
  inst.metadata.ensemble = satisfiable ? "commuting-blocks/satisfiable" : "commuting-blocks";
  for (int e = 0; e < static_cast<int>(graph.edges.size()); ++e) {
    const auto [u, v] = graph.edges[e];
    const auto inc_u = graph.incident(u);
    const auto inc_v = graph.incident(v);
    const int slot_u = static_cast<int>(std::find(inc_u.begin(), inc_u.end(), e) - inc_u.begin());
    const int slot_v = static_cast<int>(std::find(inc_v.begin(), inc_v.end(), e) - inc_v.begin());
    const auto& lu = layout.vertices[u];
    const auto& lv = layout.vertices[v];

    Matrix q = Matrix::Zero(d * d, d * d);
    int off_u = 0;
    for (std::size_t bu = 0; bu < lu.blocks.size(); ++bu) {
      const BlockLayout& blu = lu.blocks[bu];
      int off_v = 0;
      for (std::size_t bv = 0; bv < lv.blocks.size(); ++bv) {
        const BlockLayout& blv = lv.blocks[bv];
        const int ku = blu.slot_dims[slot_u];
        const int kv = blv.slot_dims[slot_v];
        const bool designated = static_cast<int>(bu) == layout.designated[u] &&
                                static_cast<int>(bv) == layout.designated[v];
        const int max_rank = satisfiable && designated ? ku * kv - 1 : ku * kv;
        const int rank = static_cast<int>(rng.below(static_cast<std::size_t>(max_rank) + 1));
        const Matrix p = rng.projection(ku * kv, rank);
        const Matrix op = embed_block_pair(p, blu, blv, slot_u, slot_v);
        const int du = blu.dim(), dv = blv.dim();
        for (int iu = 0; iu < du; ++iu)
          for (int iv = 0; iv < dv; ++iv)
            for (int ju = 0; ju < du; ++ju)
              for (int jv = 0; jv < dv; ++jv)
                q((off_u + iu) * d + off_v + iv, (off_u + ju) * d + off_v + jv) =
                    op(iu * dv + iv, ju * dv + jv);
        off_v += dv;
      }
      off_u += blu.dim();
    }
    const Matrix frame = kron(lu.frame, lv.frame);
    q = frame * q * frame.adjoint();
    q = Matrix((q + q.adjoint()) / 2.0);
    inst.terms.push_back(std::move(q));
  }
  inst.metadata.delta_actual = noncommutativity_profile(inst).max_op;
  if (layout_out) *layout_out = std::move(layout);
  return inst;
}

// ---- noncommutativity -------------------------------------------------------

Matrix edge_commutator(const QsatInstance& instance, int e1, int e2) {
  const auto& g = instance.graph;
  const auto [a, b] = g.edges.at(e1);
  const auto [c, dd] = g.edges.at(e2);
  std::vector<int> joint = {a, b, c, dd};
  std::sort(joint.begin(), joint.end());
  joint.erase(std::unique(joint.begin(), joint.end()), joint.end());
  const int s1[] = {a, b};
  const int s2[] = {c, dd};
  const Matrix q1 = tensor_embed(instance.terms.at(e1), s1, joint, g.d);
  const Matrix q2 = tensor_embed(instance.terms.at(e2), s2, joint, g.d);
  return commutator(q1, q2);
}

NoncommutativityProfile noncommutativity_profile(const QsatInstance& instance, unsigned workers) {
  const auto& g = instance.graph;
  std::vector<CommutatorPair> pairs;
  for (int w = 0; w < g.n; ++w) {
    const auto inc = g.incident(w);
    for (std::size_t i = 0; i < inc.size(); ++i)
      for (std::size_t j = i + 1; j < inc.size(); ++j) pairs.push_back({inc[i], inc[j], w, 0, 0});
  }
  auto values = parallel_map(pairs.size(), workers, [&](std::size_t k) {
    const Matrix c = edge_commutator(instance, pairs[k].first, pairs[k].second);
    return std::pair<double, double>{operator_norm(c), frobenius_norm(c)};
  });
  NoncommutativityProfile profile;
  double sum_op = 0.0, sum_f = 0.0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    pairs[k].op_norm = values[k].first;
    pairs[k].frobenius = values[k].second;
    profile.max_op = std::max(profile.max_op, values[k].first);
    profile.max_frobenius = std::max(profile.max_frobenius, values[k].second);
    sum_op += values[k].first;
    sum_f += values[k].second;
  }
  if (!pairs.empty()) {
    profile.mean_op = sum_op / static_cast<double>(pairs.size());
    profile.mean_frobenius = sum_f / static_cast<double>(pairs.size());
  }
  profile.pairs = std::move(pairs);
  return profile;
}

// ---- perturbation -----------------------------------------------------------

namespace {

struct LocalGenerator {
  Eigen::VectorXd eval_u, eval_v;
  Matrix evec_u, evec_v;
};

Matrix exp_i_theta(const Eigen::VectorXd& evals, const Matrix& evecs, double theta) {
  Vector phases(evals.size());
  for (Eigen::Index i = 0; i < evals.size(); ++i) phases(i) = std::polar(1.0, theta * evals(i));
  return evecs * phases.asDiagonal() * evecs.adjoint();
}

}  // namespace

QsatInstance perturb_instance(const QsatInstance& instance, double delta, std::uint64_t seed,
                              const PerturbOptions& options) {
  if (!(delta >= 0.0)) throw Error("perturb_instance: delta must be nonnegative");
  if (delta == 0.0) return instance;
  if (!instance.metadata.projective)
    throw Error("perturb_instance: instance terms must be projections");

  const int d = instance.graph.d;
  Rng rng(seed);
  std::vector<LocalGenerator> gens;
  for (std::size_t e = 0; e < instance.terms.size(); ++e) {
    Matrix ku = rng.hermitian(d);
    Matrix kv = rng.hermitian(d);
    Eigen::SelfAdjointEigenSolver<Matrix> su(ku), sv(kv);
    // ||K_u (x) 1 + 1 (x) K_v|| from the extreme eigenvalues
    const double top = su.eigenvalues().maxCoeff() + sv.eigenvalues().maxCoeff();
    const double bottom = su.eigenvalues().minCoeff() + sv.eigenvalues().minCoeff();
    const double scale = std::max(std::abs(top), std::abs(bottom));
    gens.push_back({su.eigenvalues() / scale, sv.eigenvalues() / scale, su.eigenvectors(),
                    sv.eigenvectors()});
  }

  auto apply = [&](double theta) {
    QsatInstance out = instance;
    for (std::size_t e = 0; e < out.terms.size(); ++e) {
      const auto& g = gens[e];
      const Matrix u = kron(exp_i_theta(g.eval_u, g.evec_u, theta),
                            exp_i_theta(g.eval_v, g.evec_v, theta));
      Matrix q = u * instance.terms[e] * u.adjoint();
      out.terms[e] = (q + q.adjoint()) / 2.0;
    }
    return out;
  };
  auto measure = [&](const QsatInstance& inst) {
    return noncommutativity_profile(inst, options.workers).max_op;
  };

  const double base = measure(instance);
  if (base > delta) {
    std::ostringstream os;
    os << "perturb_instance: input already has max commutator " << base << " > delta " << delta;
    throw Error(os.str());
  }

  // bracket: f(lo) <= delta < f(hi)
  double lo = 0.0, hi = delta / 4.0;
  QsatInstance best = instance;
  double best_value = base;
  bool bracketed = false;
  const double theta_max = 4.0 * std::acos(-1.0);
  while (hi <= theta_max) {
    QsatInstance trial = apply(hi);
    const double f = measure(trial);
    if (f > delta) {
      bracketed = true;
      break;
    }
    lo = hi;
    if (f >= best_value) {
      best = std::move(trial);
      best_value = f;
    }
    if (f >= 0.9 * delta) break;
    hi *= 2.0;
  }
  if (bracketed && best_value < 0.9 * delta) {
    for (int step = 0; step < options.max_bisection_steps; ++step) {
      const double mid = 0.5 * (lo + hi);
      QsatInstance trial = apply(mid);
      const double f = measure(trial);
      if (f > delta) {
        hi = mid;
      } else {
        lo = mid;
        best = std::move(trial);
        best_value = f;
        if (f >= 0.9 * delta) break;
      }
    }
  }
  best.metadata.seed = seed;
  best.metadata.delta_declared = delta;
  best.metadata.delta_actual = best_value;
  best.metadata.ensemble = instance.metadata.ensemble + "+local-conjugation";
  return best;
}

// ---- serialization ----------------------------------------------------------

std::string serialize_instance(const QsatInstance& instance) {
  Json j;
  j["format"] = "cqsat-instance";
  j["version"] = kInstanceFormatVersion;
  j["n"] = instance.graph.n;
  j["d"] = instance.graph.d;
  j["D"] = instance.graph.D;
  Json edges = Json::array();
  for (const auto& [u, v] : instance.graph.edges) edges.push_back({u, v});
  j["edges"] = std::move(edges);
  Json terms = Json::array();
  for (std::size_t e = 0; e < instance.terms.size(); ++e) {
    Json t;
    t["edge_id"] = e;
    t["matrix"] = matrix_to_json(instance.terms[e]);
    terms.push_back(std::move(t));
  }
  j["terms"] = std::move(terms);
  Json meta;
  meta["seed"] = instance.metadata.seed;
  meta["delta_declared"] = instance.metadata.delta_declared;
  meta["delta_actual"] = instance.metadata.delta_actual;
  meta["projective"] = instance.metadata.projective;
  meta["ensemble"] = instance.metadata.ensemble;
  meta["config_hash"] = instance.metadata.config_hash;
  j["metadata"] = std::move(meta);
  return dump_document(j);
}

QsatInstance deserialize_instance(std::string_view document) {
  const Json j = parse_document(document, "instance document");
  if (!j.is_object()) throw SchemaError("", "instance document must be an object");
  const Json& format = require_field(j, "", "format");
  if (format != "cqsat-instance") throw SchemaError("format", "expected \"cqsat-instance\"");
  const long version = require_int(j, "", "version");
  if (version != kInstanceFormatVersion)
    throw SchemaError("version", "unsupported version " + std::to_string(version));

  QsatInstance inst;
  inst.graph.n = static_cast<int>(require_int(j, "", "n"));
  inst.graph.d = static_cast<int>(require_int(j, "", "d"));
  inst.graph.D = static_cast<int>(require_int(j, "", "D"));
  if (inst.graph.n < 1 || inst.graph.d < 1 || inst.graph.D < 0)
    throw SchemaError("n", "n and d must be positive, D nonnegative");
  const Json& edges = require_field(j, "", "edges");
  if (!edges.is_array()) throw SchemaError("edges", "expected an array");
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const Json& pair = edges[e];
    const std::string path = "edges[" + std::to_string(e) + "]";
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_integer() ||
        !pair[1].is_number_integer())
      throw SchemaError(path, "expected [u, v]");
    inst.graph.edges.emplace_back(pair[0].get<int>(), pair[1].get<int>());
  }
  const Json& meta = require_field(j, "", "metadata");
  const Json& seed = require_field(meta, "metadata", "seed");
  if (!seed.is_number_unsigned() && !seed.is_number_integer())
    throw SchemaError("metadata.seed", "expected an unsigned integer");
  inst.metadata.seed = seed.get<std::uint64_t>();
  inst.metadata.delta_declared = require_number(meta, "metadata", "delta_declared");
  inst.metadata.delta_actual = require_number(meta, "metadata", "delta_actual");
  const Json& projective = require_field(meta, "metadata", "projective");
  if (!projective.is_boolean()) throw SchemaError("metadata.projective", "expected a boolean");
  inst.metadata.projective = projective.get<bool>();
  if (auto it = meta.find("ensemble"); it != meta.end() && it->is_string())
    inst.metadata.ensemble = it->get<std::string>();
  if (auto it = meta.find("config_hash"); it != meta.end() && it->is_string())
    inst.metadata.config_hash = it->get<std::string>();

  inst.graph.validate();
  const Json& terms = require_field(j, "", "terms");
  if (!terms.is_array()) throw SchemaError("terms", "expected an array");
  const Eigen::Index dim = static_cast<Eigen::Index>(inst.graph.d) * inst.graph.d;
  inst.terms.assign(inst.graph.edges.size(), Matrix());
  std::vector<bool> filled(inst.graph.edges.size(), false);
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const std::string path = "terms[" + std::to_string(k) + "]";
    const long id = require_int(terms[k], path, "edge_id");
    if (id < 0 || id >= static_cast<long>(inst.graph.edges.size()))
      throw SchemaError(path + ".edge_id", "no such edge " + std::to_string(id));
    if (filled[id]) throw SchemaError(path + ".edge_id", "duplicate term for edge " + std::to_string(id));
    inst.terms[id] = matrix_from_json(require_field(terms[k], path, "matrix"), path + ".matrix", dim, dim);
    filled[id] = true;
  }
  for (std::size_t e = 0; e < filled.size(); ++e)
    if (!filled[e]) throw SchemaError("terms", "missing term for edge " + std::to_string(e));
  inst.validate();
  return inst;
}

QsatInstance load_instance(const std::string& path) {
  return deserialize_instance(read_text_file(path));
}

void save_instance(const QsatInstance& instance, const std::string& path) {
  write_text_file(path, serialize_instance(instance));
}

}  // namespace cqsat
