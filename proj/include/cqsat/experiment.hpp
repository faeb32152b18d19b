#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cqsat/algebra.hpp"
#include "cqsat/instance.hpp"
#include "cqsat/json_io.hpp"
#include "cqsat/rounding.hpp"
#include "cqsat/witness.hpp"

namespace cqsat {

inline constexpr const char* kToolVersion = "1.0.0";

/// Invalid configuration; path() names the field.
class ConfigError : public SchemaError {
 public:
  using SchemaError::SchemaError;
};

struct ExperimentConfig {
  int n = 8;
  int d = 4;
  int D = 3;
  std::vector<double> deltas{0.0};
  std::uint64_t seed = 1;
  int seeds = 1;          // scan: seed indices 0 .. seeds-1
  double r = 0.5;
  bool satisfiable = true;
  RoundingConfig rounding;
  std::size_t oracle_cap = std::size_t{1} << 14;
  unsigned workers = 1;
  bool timing = true;     // scan: measure runtime_s (off leaves the column empty)
  std::string output;     // directory (pipeline) or CSV path (scan)

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
  /// Canonical form: every field that influences results; excludes workers,
  /// output paths and timing.
  Json canonical() const;
  /// FNV-1a (64 bit, hex) of the canonical JSON text.
  std::string hash() const;
};

std::string fnv1a_hex(const std::string& text);

struct PipelineResult {
  std::string config_hash;
  double delta = 0.0;
  std::uint64_t seed_index = 0;
  QsatInstance commuting;
  QsatInstance instance;  // H (perturbed)
  SweepResult sweep;      // sweep.rounded is H^
  NormPreservationReport norms;
  std::vector<VertexStructure> structures;
  TensorNetworkWitness witness;
  EnergyReport energy;          // against H
  EnergyReport energy_rounded;  // against H^
  VerifyResult verify;
  bool bound_holds = false;     // energy <= epsilon_report * M + 1e-6
  bool success() const { return bound_holds && verify.accept; }
};

/// Runs every stage for one (delta, seed index); all randomness comes from
/// derive_seed(config.seed, stage, seed_index). Throws StageError.
PipelineResult run_pipeline(const ExperimentConfig& config, double delta, std::uint64_t seed_index = 0);

class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Writes instance.json, rounded.json, witness.json, energy.json,
/// rounding.json, summary.json and STATUS.json into `dir`.
void write_pipeline_artifacts(const PipelineResult& result, const std::string& dir);
/// Marks existing artifacts in `dir` stale after a failed stage.
void write_failure_status(const std::string& dir, const std::string& stage, const std::string& what,
                          const std::string& config_hash);

struct ScanRow {
  double delta_requested = 0.0;
  std::uint64_t seed_index = 0;
  std::optional<double> delta_actual, displacement_max, epsilon_report, witness_energy_over_M,
      exact_ground_over_M, runtime_s;
  std::optional<bool> accept_at_r;
  std::string error;
};

inline constexpr const char* kScanHeader =
    "delta_requested,delta_actual,displacement_max,epsilon_report,witness_energy_over_M,"
    "exact_ground_over_M,accept_at_r,runtime_s,error";

/// One row per (delta, seed index), sorted; failures land in the error column.
std::vector<ScanRow> scan_epsilon_delta(const ExperimentConfig& config);
std::string scan_to_csv(const ExperimentConfig& config, const std::vector<ScanRow>& rows);

/// Deterministic shortest round-trip formatting.
std::string format_double(double x);

}  // namespace cqsat
