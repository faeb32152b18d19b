#pragma once

#include <string>
#include <vector>

#include "cqsat/error.hpp"
#include "cqsat/instance.hpp"
#include "cqsat/operators.hpp"

namespace cqsat {

/// The operators one vertex contributes to its incident terms: group i holds
/// the coefficient-carrying Schmidt factors of the i-th incident edge.
struct VertexFamily {
  int vertex = -1;
  std::vector<std::vector<Matrix>> groups;
};

enum class RoundingMode { Structural, Penalty };

std::string to_string(RoundingMode mode);
RoundingMode rounding_mode_from_string(const std::string& s);

struct RoundingConfig {
  RoundingMode mode = RoundingMode::Structural;
  /// Try penalty descent when the structural solver does not converge.
  bool fallback = true;
  double tol = 1e-10;       // cross-group commutator target before hermitization
  double post_tol = 1e-9;   // after hermitization / for the whole rounded instance
  int max_iters = 200;      // Levenberg-Marquardt iterations (structural)
  bool norm_preserving = true;
  /// Extra Gauss-Newton steps along the commuting manifold that shrink the
  /// displacement of the structural solution.
  int refine_iters = 8;
  int penalty_rounds = 30;
  double penalty_mu0 = 1.0;
  int penalty_inner_iters = 500;
};

struct RoundingReport {
  int vertex = -1;
  std::string mode;  // "unchanged", "structural", "penalty"
  bool fell_back = false;
  /// max_{i,alpha} ||A_alpha^(i) - a_alpha^(i)||_F
  double displacement = 0.0;
  /// max over the vertex's terms of ||Q_before - Q_after|| (operator norm);
  /// filled in by sweep_round.
  double term_displacement = 0.0;
  double initial_residual = 0.0;
  double residual = 0.0;        // max cross-group commutator, Frobenius
  double closure_residual = 0.0;  // max conjugation-closure residual of a group
  int iterations = 0;
};

class RoundingError : public Error {
 public:
  RoundingError(int vertex, double best_residual, const std::string& what)
      : Error(what), vertex_(vertex), best_residual_(best_residual) {}
  int vertex() const { return vertex_; }
  double best_residual() const { return best_residual_; }

 private:
  int vertex_;
  double best_residual_;
};

struct RoundedFamily {
  VertexFamily family;
  RoundingReport report;
};

/// max over i != j and all alpha, beta of ||[A_alpha^(i), A_beta^(j)]||_F.
double max_cross_commutator(const VertexFamily& family);
/// max over groups and pairs of |<a, b>| / (||a|| ||b||), alpha != beta.
double max_group_overlap(const VertexFamily& family);

/// Replaces a nearly commuting family by an exactly commuting one.
///
/// Structural mode conjugates each group by its own unitary, found by
/// Levenberg-Marquardt on the cross-group commutators (started at the
/// identity), then moves along the commuting manifold to reduce the
/// displacement. Unitary conjugation keeps each group orthogonal, its
/// Frobenius norms unchanged, and its span closed under conjugation.
///
/// Penalty mode minimizes sum ||A - a||^2 + mu sum ||[a, a']||^2 with mu
/// doubling each round, then restores orthogonality and norms by
/// Gram-Schmidt and rescaling when norm preservation is on.
///
/// Throws RoundingError (carrying the best residual) when the residual does
/// not reach config.tol.
RoundedFamily round_vertex(const VertexFamily& family, const RoundingConfig& config);

/// Q -> (Q + Q^dagger)/2 for terms that, pairwise on intersecting supports,
/// satisfy ||[Q_i, Q_j]||_F <= tol and ||[Q_i^dagger, Q_j]||_F <= tol.
/// Throws Error when that premise fails.
std::vector<Operator> hermitize_terms(const std::vector<Operator>& terms, int d, double tol);

/// One single-vertex replacement of the sweep.
struct ReplacementStep {
  int vertex = -1;
  std::vector<int> edges;             // incident edges, ascending
  std::vector<Matrix> terms_before;   // snapshot of all terms before the step
  std::vector<Matrix> terms_after;    // snapshot of all terms after the step
};

struct GlobalRoundingReport {
  std::vector<RoundingReport> vertices;
  std::vector<double> term_distance;  // ||Q_i - Q^_i|| (operator norm)
  double max_term_distance = 0.0;
  double epsilon_report = 0.0;        // 2 max_i ||Q_i - Q^_i||
  double max_commutator = 0.0;        // of the rounded instance, operator norm
  double max_commutator_frobenius = 0.0;
  double max_vertex_displacement = 0.0;
};

struct SweepResult {
  QsatInstance rounded;
  GlobalRoundingReport report;
  std::vector<ReplacementStep> steps;
};

/// Builds the family of `vertex` from the current terms.
VertexFamily vertex_family(const QsatInstance& instance, int vertex,
                           std::vector<SchmidtDecomposition>* decompositions = nullptr);

/// Rounds every vertex in ascending id order, replacing each incident term
/// by sum a_alpha (x) B_alpha and hermitizing it. Throws RoundingError naming
/// the failing vertex; no partial result is returned.
SweepResult sweep_round(const QsatInstance& instance, const RoundingConfig& config);

struct NormPreservationReport {
  double max_deviation = 0.0;  // per single-vertex replacement
  int checked_pairs = 0;
  std::vector<double> step_max_deviation;
  /// | ||[Q^_i, Q^_j]||_F - ||[Q_i, Q_j]||_F | between the input and the
  /// final instance, over intersecting pairs; descriptive only.
  double compounding_deviation = 0.0;
};

/// For each replaced term Q at a step and each term P intersecting it but
/// outside that vertex's family, compares ||[Q^, P]||_F with ||[Q, P]||_F.
NormPreservationReport norm_preservation_check(const QsatInstance& original,
                                               const SweepResult& sweep);

std::string rounding_report_to_json(const GlobalRoundingReport& report,
                                    const NormPreservationReport* norms = nullptr);

}  // namespace cqsat
