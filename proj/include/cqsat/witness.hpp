#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cqsat/algebra.hpp"
#include "cqsat/instance.hpp"

namespace cqsat {

struct BlockAssignment {
  std::vector<int> blocks;  // per vertex, index into its VertexStructure blocks
};

struct AssignmentSearch {
  std::string strategy;        // "exhaustive" or "annealing"
  double combinations = 0.0;   // prod_v #blocks
  std::uint64_t visited = 0;
  std::uint64_t seed = 0;
  int steps = 0;
  int restarts = 0;
  double t_start = 0.0;
  double t_end = 0.0;
};

/// Edge states live on (slot of u) (x) (slot of v) with u < v, index
/// i_u * k_v + i_v. Residual factors carry residual_states.
struct TensorNetworkWitness {
  QuditGraph graph;
  std::vector<VertexStructure> structures;
  BlockAssignment assignment;
  std::vector<Vector> edge_states;
  std::vector<Vector> residual_states;
  /// Energy of the witness against the instance it was built from.
  double build_energy = 0.0;
  AssignmentSearch search;
  std::string config_hash;

  /// Slot dimension of edge e at its endpoint v under the assignment.
  int slot_dim(int e, int v) const;
  int slot_index(int e, int v) const;
  const VertexBlock& block(int v) const;
};

struct WitnessConfig {
  std::uint64_t seed = 0;
  double exhaustive_limit = 1e6;
  int anneal_steps = 10000;
  int anneal_restarts = 8;
  double t_start = 1.0;
  double t_end = 1e-3;
  double premise_tol = 1e-9;
  unsigned workers = 1;
};

struct EnergyReport {
  std::vector<double> per_edge;
  double total = 0.0;
  int M = 0;
  double per_M() const { return M > 0 ? total / M : 0.0; }
  bool below(double threshold_per_M) const { return total < threshold_per_M * M; }
};

/// Chooses a block per vertex minimizing the sum of per-edge minimum
/// eigenvalues of the restricted terms and fills the edge states with the
/// corresponding eigenvectors.
TensorNetworkWitness build_witness(const QsatInstance& commuting,
                                   const std::vector<VertexStructure>& structures,
                                   const WitnessConfig& config = {});

/// <psi|Q_e|psi> per edge from two-vertex reduced states; never forms the
/// global vector. Throws DimensionError / Error on malformed input.
EnergyReport evaluate_energy(const TensorNetworkWitness& witness, const QsatInstance& instance,
                             unsigned workers = 1);

enum class RejectReason { None, Dimension, Isometry, Normalization, Assignment, Energy };
std::string to_string(RejectReason reason);

struct VerifyResult {
  bool accept = false;
  RejectReason reason = RejectReason::None;
  std::string detail;
  EnergyReport energy;
  double r = 0.0;
};

/// Checks the witness invariants (residuals <= 1e-8), then accepts iff the
/// energy against `instance` is below r * M. Malformed witnesses are
/// rejected with a reason, never thrown. Throws Error only for r outside (0, 1).
VerifyResult np_verify(const TensorNetworkWitness& witness, const QsatInstance& instance, double r,
                       unsigned workers = 1);

struct CircuitGate {
  std::vector<int> vertices;  // registers the gate acts on, in tensor order
  int edge = -1;              // -1 for vertex gates
  Matrix unitary;             // on C^d per register
};

struct CircuitLayer {
  std::string kind;  // "edge-prep" or "vertex-isometry"
  std::vector<CircuitGate> gates;
};

/// Layers in application order: edge-state preparations grouped by a proper
/// edge coloring, then one layer of vertex isometries (completed to unitaries;
/// residual states are prepared inside them). Acting on |0...0>.
struct Circuit {
  int n = 0;
  int d = 0;
  int colors = 0;
  int depth = 0;
  std::vector<CircuitLayer> layers;
};

Circuit witness_to_circuit(const TensorNetworkWitness& witness);
/// Proper edge coloring: exact backtracking with max-degree colors first,
/// greedy fallback. Returns color per edge.
std::vector<int> edge_coloring(const QuditGraph& graph);

/// Applies the circuit to |0...0>; d^n must not exceed `cap`.
Vector simulate_circuit(const Circuit& circuit, std::size_t cap = std::size_t{1} << 16);

inline constexpr int kWitnessFormatVersion = 1;
std::string serialize_witness(const TensorNetworkWitness& witness);
TensorNetworkWitness deserialize_witness(std::string_view document);
std::string energy_report_to_json(const EnergyReport& report);

}  // namespace cqsat
