#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cqsat/algebra.hpp"
#include "cqsat/experiment.hpp"
#include "cqsat/instance.hpp"
#include "cqsat/json_io.hpp"
#include "cqsat/parallel.hpp"
#include "cqsat/random.hpp"
#include "cqsat/rounding.hpp"
#include "cqsat/witness.hpp"

using namespace cqsat;

namespace {

constexpr int kOk = 0;
constexpr int kReject = 1;
constexpr int kFailure = 2;

struct Options {
  ExperimentConfig config;
  std::string mode = "structural";
  bool unsatisfiable = false;
  bool no_fallback = false;
  std::string norm_preserving = "on";
  std::string timing = "on";
  double delta = 0.0;
  std::uint64_t seed_index = 0;
  std::string instance, witness, out, report, evaluate, energy_out;
};

void add_rounding_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--mode", o.mode, "Rounding mode")->check(CLI::IsMember({"structural", "penalty"}));
  cmd->add_flag("--no-fallback", o.no_fallback, "Do not fall back to penalty descent");
  cmd->add_option("--norm-preserving", o.norm_preserving, "Re-orthogonalize and restore term norms")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--tol", o.config.rounding.tol, "Commutator tolerance before hermitization");
  cmd->add_option("--post-tol", o.config.rounding.post_tol, "Commutator tolerance of the rounded instance");
  cmd->add_option("--max-iters", o.config.rounding.max_iters, "Structural solver iterations");
}

void add_shape_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--n", o.config.n, "Number of vertices");
  cmd->add_option("--d", o.config.d, "Local dimension");
  cmd->add_option("--D", o.config.D, "Degree");
  cmd->add_option("--seed", o.config.seed, "Master seed");
  cmd->add_flag("--unsatisfiable", o.unsatisfiable, "Do not plant a zero-energy assignment");
}

void finish_config(Options& o) {
  o.config.rounding.mode = rounding_mode_from_string(o.mode);
  o.config.rounding.fallback = !o.no_fallback;
  o.config.rounding.norm_preserving = o.norm_preserving == "on";
  o.config.satisfiable = !o.unsatisfiable;
  o.config.timing = o.timing == "on";
}

int cmd_gen(Options& o) {
  finish_config(o);
  o.config.validate();
  const QuditGraph g =
      generate_regular_graph(o.config.n, o.config.D, derive_seed(o.config.seed, "graph", 0), o.config.d);
  QsatInstance inst = generate_commuting_instance(g, derive_seed(o.config.seed, "commuting", 0), o.config.satisfiable);
  inst.metadata.config_hash = o.config.hash();
  save_instance(inst, o.out);
  std::cout << "wrote " << o.out << " (n=" << g.n << ", M=" << inst.M()
            << ", max commutator " << inst.metadata.delta_actual << ")\n";
  return kOk;
}

int cmd_perturb(Options& o) {
  const QsatInstance base = load_instance(o.instance);
  PerturbOptions popts;
  popts.workers = o.config.workers;
  QsatInstance inst = perturb_instance(base, o.delta, derive_seed(o.config.seed, "perturb", 0), popts);
  save_instance(inst, o.out);
  std::cout << "wrote " << o.out << " (delta requested " << o.delta << ", measured "
            << inst.metadata.delta_actual << ")\n";
  return kOk;
}

int cmd_round(Options& o) {
  finish_config(o);
  const QsatInstance inst = load_instance(o.instance);
  const SweepResult sweep = sweep_round(inst, o.config.rounding);
  const NormPreservationReport norms = norm_preservation_check(inst, sweep);
  save_instance(sweep.rounded, o.out);
  const std::string report = rounding_report_to_json(sweep.report, &norms);
  if (!o.report.empty()) write_text_file(o.report, report);
  std::cout << "epsilon_report " << format_double(sweep.report.epsilon_report) << ", rounded max commutator "
            << format_double(sweep.report.max_commutator_frobenius) << "\n";
  return kOk;
}

int cmd_witness(Options& o) {
  const QsatInstance hhat = load_instance(o.instance);
  const auto structures = decompose_instance(hhat, derive_seed(o.config.seed, "algebra", 0), {}, o.config.workers);
  WitnessConfig wcfg;
  wcfg.seed = derive_seed(o.config.seed, "witness", 0);
  wcfg.workers = o.config.workers;
  TensorNetworkWitness w = build_witness(hhat, structures, wcfg);
  write_text_file(o.out, serialize_witness(w));
  std::cout << "witness energy on " << o.instance << ": " << format_double(w.build_energy) << "\n";
  if (!o.evaluate.empty()) {
    const QsatInstance h = load_instance(o.evaluate);
    const EnergyReport e = evaluate_energy(w, h, o.config.workers);
    if (!o.energy_out.empty()) write_text_file(o.energy_out, energy_report_to_json(e));
    std::cout << "witness energy on " << o.evaluate << ": " << format_double(e.total) << " (M=" << e.M << ")\n";
  }
  return kOk;
}

int cmd_verify(Options& o) {
  const QsatInstance inst = load_instance(o.instance);
  if (!(o.config.r > 0.0 && o.config.r < 1.0)) throw ConfigError("r", "must lie in (0, 1)");
  Json out;
  out["format"] = "cqsat-verify-report";
  out["version"] = 1;
  out["r"] = o.config.r;
  TensorNetworkWitness w;
  try {
    w = deserialize_witness(read_text_file(o.witness));
  } catch (const SchemaError& e) {
    out["accept"] = false;
    out["reason"] = "schema";
    out["detail"] = e.what();
    std::cout << dump_document(out);
    return kReject;
  }
  const VerifyResult v = np_verify(w, inst, o.config.r, o.config.workers);
  out["accept"] = v.accept;
  out["reason"] = to_string(v.reason);
  out["detail"] = v.detail;
  out["M"] = v.energy.M;
  out["energy"] = v.energy.total;
  out["energy_over_M"] = v.energy.per_M();
  out["config_hash"] = w.config_hash;
  out["tool_version"] = kToolVersion;
  const std::string text = dump_document(out);
  if (!o.report.empty()) write_text_file(o.report, text);
  std::cout << text;
  return v.accept ? kOk : kReject;
}

int cmd_pipeline(Options& o) {
  finish_config(o);
  o.config.deltas = {o.delta};
  o.config.validate();
  try {
    const PipelineResult res = run_pipeline(o.config, o.delta, o.seed_index);
    write_pipeline_artifacts(res, o.out);
    std::cout << "epsilon_report " << format_double(res.sweep.report.epsilon_report) << ", witness energy "
              << format_double(res.energy.total) << " <= " << format_double(res.sweep.report.epsilon_report * res.energy.M + 1e-6)
              << ": " << (res.bound_holds ? "yes" : "no") << ", verify at r=" << o.config.r << ": "
              << (res.verify.accept ? "accept" : "reject (" + to_string(res.verify.reason) + ")") << "\n";
    return res.success() ? kOk : kReject;
  } catch (const StageError& e) {
    write_failure_status(o.out, e.stage(), e.what(), o.config.hash());
    std::cerr << "pipeline failed at stage " << e.stage() << ": " << e.what() << "\n";
    return kFailure;
  }
}

int cmd_scan(Options& o) {
  finish_config(o);
  o.config.validate();
  const auto rows = scan_epsilon_delta(o.config);
  const std::string csv = scan_to_csv(o.config, rows);
  if (o.out.empty() || o.out == "-")
    std::cout << csv;
  else
    write_text_file(o.out, csv);
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.error.empty() ? 0 : 1;
  std::cerr << rows.size() << " rows, " << failed << " failed\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Commuting-rounding toolkit for 2-local quantum SAT instances"};
  app.require_subcommand(1);
  Options o;
  o.config.workers = default_workers();
  app.add_option("--workers", o.config.workers, "Worker threads (default: CQSAT_WORKERS or 1)")
      ->check(CLI::Range(1u, 1024u));

  auto* gen = app.add_subcommand("gen", "Generate a commuting instance");
  add_shape_flags(gen, o);
  gen->add_option("--out", o.out, "Instance file")->required();

  auto* perturb = app.add_subcommand("perturb", "Perturb an instance to a target noncommutativity");
  perturb->add_option("--instance", o.instance, "Input instance")->required();
  perturb->add_option("--delta", o.delta, "Target max commutator (operator norm)")->required()->check(CLI::NonNegativeNumber);
  perturb->add_option("--seed", o.config.seed, "Master seed");
  perturb->add_option("--out", o.out, "Output instance")->required();

  auto* round = app.add_subcommand("round", "Round an instance to a commuting one");
  round->add_option("--instance", o.instance, "Input instance")->required();
  add_rounding_flags(round, o);
  round->add_option("--out", o.out, "Rounded instance")->required();
  round->add_option("--report", o.report, "Rounding report");

  auto* witness = app.add_subcommand("witness", "Build a tensor-network witness for a commuting instance");
  witness->add_option("--instance", o.instance, "Commuting instance")->required();
  witness->add_option("--seed", o.config.seed, "Master seed");
  witness->add_option("--out", o.out, "Witness file")->required();
  witness->add_option("--evaluate", o.evaluate, "Also evaluate the witness against this instance");
  witness->add_option("--energy-out", o.energy_out, "Energy report for --evaluate");

  auto* verify = app.add_subcommand("verify", "Check a witness against an instance");
  verify->add_option("--instance", o.instance, "Instance")->required();
  verify->add_option("--witness", o.witness, "Witness")->required();
  verify->add_option("--r", o.config.r, "Threshold fraction r in (0, 1)")->required();
  verify->add_option("--report", o.report, "Verification report");

  auto* pipeline = app.add_subcommand("pipeline", "Generate, perturb, round, build and verify a witness");
  add_shape_flags(pipeline, o);
  add_rounding_flags(pipeline, o);
  pipeline->add_option("--delta", o.delta, "Perturbation strength")->check(CLI::NonNegativeNumber);
  pipeline->add_option("--seed-index", o.seed_index, "Instance index under the master seed");
  pipeline->add_option("--r", o.config.r, "Threshold fraction r in (0, 1)");
  pipeline->add_option("--out-dir", o.out, "Artifact directory")->required();

  auto* scan = app.add_subcommand("scan", "Scan epsilon_report against delta");
  add_shape_flags(scan, o);
  add_rounding_flags(scan, o);
  scan->add_option("--deltas", o.config.deltas, "Delta grid")->expected(1, -1);
  scan->add_option("--seeds", o.config.seeds, "Seeds per delta");
  scan->add_option("--r", o.config.r, "Threshold fraction r in (0, 1)");
  scan->add_option("--oracle-cap", o.config.oracle_cap, "Max basis states for exact ground energies");
  scan->add_option("--timing", o.timing, "Record runtime_s")->check(CLI::IsMember({"on", "off"}));
  scan->add_option("--out", o.out, "CSV file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kFailure;
  }

  try {
    if (*gen) return cmd_gen(o);
    if (*perturb) return cmd_perturb(o);
    if (*round) return cmd_round(o);
    if (*witness) return cmd_witness(o);
    if (*verify) return cmd_verify(o);
    if (*pipeline) return cmd_pipeline(o);
    if (*scan) return cmd_scan(o);
  } catch (const ConfigError& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return kFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
