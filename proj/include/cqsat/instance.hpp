#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cqsat/operators.hpp"

namespace cqsat {

/// D-regular simple graph with a d-dimensional qudit on every vertex. Edge
/// ids are indices into `edges`; every edge is stored as (u, v) with u < v,
/// which is also the tensor-factor order of its term.
struct QuditGraph {
  int n = 0;
  int d = 2;
  int D = 0;
  std::vector<std::pair<int, int>> edges;

  /// Incident edge ids of v in ascending order. This order defines the
  /// per-vertex slot numbering used by the rounding and algebra modules.
  std::vector<int> incident(int v) const;
  int other_end(int edge, int v) const;
  /// Throws SchemaError naming the first violated invariant.
  void validate() const;
};

struct InstanceMetadata {
  std::uint64_t seed = 0;
  double delta_declared = 0.0;
  double delta_actual = 0.0;
  bool projective = true;
  std::string ensemble;
  std::string config_hash;
};

struct QsatInstance {
  QuditGraph graph;
  std::vector<Matrix> terms;  // terms[e] acts on C^d (x) C^d of edges[e]
  InstanceMetadata metadata;

  int M() const { return static_cast<int>(terms.size()); }
  Operator term(int e) const;
  void validate() const;
};

struct CommutatorPair {
  int first = 0;
  int second = 0;
  int shared_vertex = 0;
  double op_norm = 0.0;
  double frobenius = 0.0;
};

struct NoncommutativityProfile {
  std::vector<CommutatorPair> pairs;  // only pairs of edges sharing a vertex
  double max_op = 0.0;
  double mean_op = 0.0;
  double max_frobenius = 0.0;
  double mean_frobenius = 0.0;
};

/// Pairing-model construction with rejection of loops and multi-edges.
/// Throws Error when n*D is odd, D >= n, or the rejection budget runs out.
QuditGraph generate_regular_graph(int n, int D, std::uint64_t seed, int d = 2,
                                  int max_attempts = 100000);

/// Layout of one block of a vertex space: dims of the per-edge slots (in
/// incident-edge order) followed by a residual factor.
struct BlockLayout {
  std::vector<int> slot_dims;
  int residual = 1;
  int dim() const;
};

struct VertexLayout {
  std::vector<BlockLayout> blocks;
  Matrix frame;  // unitary on C^d; columns ordered block by block
};

/// Ground truth emitted by the commuting generator.
struct CommutingLayout {
  std::vector<VertexLayout> vertices;
  std::vector<int> designated;  // zero-energy block assignment when satisfiable
};

/// Commuting instance: every vertex space is a direct sum of blocks, each a
/// tensor product of one slot per incident edge plus a residual factor;
/// edge terms are block-diagonal projections acting on their own slot pair.
/// d < 4 yields classical (diagonal) instances. With `satisfiable`, the
/// designated assignment has zero energy.
QsatInstance generate_commuting_instance(const QuditGraph& graph, std::uint64_t seed,
                                         bool satisfiable, CommutingLayout* layout = nullptr);

/// All vertex layouts the generator draws from for (d, D).
std::vector<std::vector<BlockLayout>> enumerate_layouts(int d, int D);

struct PerturbOptions {
  unsigned workers = 1;
  int max_bisection_steps = 200;
};

/// Conjugates every term by exp(i theta K), K = K_u (x) 1 + 1 (x) K_v with
/// random Hermitian K_u, K_v and ||K|| = 1. A single theta is calibrated by
/// bisection so the measured max commutator lies in [0.9 delta, delta].
/// delta = 0 returns the input unchanged.
QsatInstance perturb_instance(const QsatInstance& instance, double delta, std::uint64_t seed,
                              const PerturbOptions& options = {});

/// Commutator of two edge terms sharing a vertex, on their joint support.
Matrix edge_commutator(const QsatInstance& instance, int e1, int e2);

NoncommutativityProfile noncommutativity_profile(const QsatInstance& instance,
                                                 unsigned workers = 1);

inline constexpr int kInstanceFormatVersion = 1;

std::string serialize_instance(const QsatInstance& instance);
/// Throws SchemaError with a field path on malformed input.
QsatInstance deserialize_instance(std::string_view document);

QsatInstance load_instance(const std::string& path);
void save_instance(const QsatInstance& instance, const std::string& path);

}  // namespace cqsat
