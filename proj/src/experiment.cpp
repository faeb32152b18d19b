#include "cqsat/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "cqsat/oracle.hpp"
#include "cqsat/parallel.hpp"
#include "cqsat/random.hpp"

namespace cqsat {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void ExperimentConfig::validate() const {
  if (n < 2) throw ConfigError("n", "must be at least 2");
  if (d < 2 || d > 8) throw ConfigError("d", "must lie in [2, 8]");
  if (D < 1 || D >= n) throw ConfigError("D", "must lie in [1, n-1]");
  if ((static_cast<long>(n) * D) % 2 != 0) throw ConfigError("D", "n*D must be even for a D-regular graph");
  if (deltas.empty()) throw ConfigError("deltas", "at least one delta is required");
  for (std::size_t k = 0; k < deltas.size(); ++k)
    if (!(deltas[k] >= 0.0) || !std::isfinite(deltas[k]))
      throw ConfigError("deltas[" + std::to_string(k) + "]", "must be a finite nonnegative number");
  if (seeds < 1) throw ConfigError("seeds", "must be at least 1");
  if (!(r > 0.0 && r < 1.0)) throw ConfigError("r", "must lie in (0, 1)");
  if (!(rounding.tol > 0.0)) throw ConfigError("rounding.tol", "must be positive");
  if (!(rounding.post_tol > 0.0)) throw ConfigError("rounding.post_tol", "must be positive");
  if (rounding.max_iters < 1) throw ConfigError("rounding.max_iters", "must be positive");
  if (rounding.penalty_rounds < 1) throw ConfigError("rounding.penalty_rounds", "must be positive");
  if (oracle_cap < 1) throw ConfigError("oracle_cap", "must be positive");
  if (workers < 1) throw ConfigError("workers", "must be at least 1");
}

Json ExperimentConfig::canonical() const {
  Json j;
  j["n"] = n;
  j["d"] = d;
  j["D"] = D;
  Json ds = Json::array();
  for (double x : deltas) ds.push_back(format_double(x));
  j["deltas"] = std::move(ds);
  j["seed"] = seed;
  j["seeds"] = seeds;
  j["r"] = format_double(r);
  j["satisfiable"] = satisfiable;
  Json rj;
  rj["mode"] = to_string(rounding.mode);
  rj["fallback"] = rounding.fallback;
  rj["tol"] = format_double(rounding.tol);
  rj["post_tol"] = format_double(rounding.post_tol);
  rj["max_iters"] = rounding.max_iters;
  rj["norm_preserving"] = rounding.norm_preserving;
  rj["refine_iters"] = rounding.refine_iters;
  rj["penalty_rounds"] = rounding.penalty_rounds;
  rj["penalty_mu0"] = format_double(rounding.penalty_mu0);
  rj["penalty_inner_iters"] = rounding.penalty_inner_iters;
  j["rounding"] = std::move(rj);
  j["oracle_cap"] = oracle_cap;
  j["tool_version"] = kToolVersion;
  return j;
}

std::string ExperimentConfig::hash() const { return fnv1a_hex(canonical().dump()); }

PipelineResult run_pipeline(const ExperimentConfig& config, double delta, std::uint64_t seed_index) {
  config.validate();
  PipelineResult out;
  out.config_hash = config.hash();
  out.delta = delta;
  out.seed_index = seed_index;
  std::string stage = "gen";
  try {
    const QuditGraph graph =
        generate_regular_graph(config.n, config.D, derive_seed(config.seed, "graph", seed_index), config.d);
    out.commuting = generate_commuting_instance(graph, derive_seed(config.seed, "commuting", seed_index),
                                                config.satisfiable);
    out.commuting.metadata.config_hash = out.config_hash;

    stage = "perturb";
    PerturbOptions popts;
    popts.workers = config.workers;
    out.instance = perturb_instance(out.commuting, delta, derive_seed(config.seed, "perturb", seed_index), popts);
    out.instance.metadata.config_hash = out.config_hash;

    stage = "round";
    out.sweep = sweep_round(out.instance, config.rounding);
    out.sweep.rounded.metadata.config_hash = out.config_hash;
    out.norms = norm_preservation_check(out.instance, out.sweep);

    stage = "decompose";
    out.structures = decompose_instance(out.sweep.rounded, derive_seed(config.seed, "algebra", seed_index), {},
                                        config.workers);

    stage = "witness";
    WitnessConfig wcfg;
    wcfg.seed = derive_seed(config.seed, "witness", seed_index);
    wcfg.workers = config.workers;
    out.witness = build_witness(out.sweep.rounded, out.structures, wcfg);
    out.witness.config_hash = out.config_hash;

    stage = "energy";
    out.energy = evaluate_energy(out.witness, out.instance, config.workers);
    out.energy_rounded = evaluate_energy(out.witness, out.sweep.rounded, config.workers);

    stage = "verify";
    out.verify = np_verify(out.witness, out.instance, config.r, config.workers);
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
  const double bound = out.sweep.report.epsilon_report * out.energy.M + 1e-6;
  out.bound_holds = out.energy.total <= bound;
  return out;
}

namespace {

Json with_provenance(Json j, const std::string& hash) {
  j["config_hash"] = hash;
  j["tool_version"] = kToolVersion;
  return j;
}

const char* kArtifacts[] = {"instance.json", "rounded.json", "witness.json", "energy.json",
                            "rounding.json", "summary.json"};

}  // namespace

void write_pipeline_artifacts(const PipelineResult& result, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path base(dir);
  const std::string& hash = result.config_hash;
  write_text_file((base / "instance.json").string(), serialize_instance(result.instance));
  write_text_file((base / "rounded.json").string(), serialize_instance(result.sweep.rounded));
  write_text_file((base / "witness.json").string(), serialize_witness(result.witness));

  Json energy = parse_document(energy_report_to_json(result.energy), "energy report");
  energy["against"] = "original";
  energy["rounded_total"] = result.energy_rounded.total;
  write_text_file((base / "energy.json").string(), dump_document(with_provenance(energy, hash)));

  Json rounding = parse_document(rounding_report_to_json(result.sweep.report, &result.norms), "rounding report");
  write_text_file((base / "rounding.json").string(), dump_document(with_provenance(rounding, hash)));

  Json s;
  s["format"] = "cqsat-pipeline-summary";
  s["version"] = 1;
  s["delta_requested"] = result.delta;
  s["delta_actual"] = result.instance.metadata.delta_actual;
  s["seed_index"] = result.seed_index;
  s["M"] = result.energy.M;
  s["epsilon_report"] = result.sweep.report.epsilon_report;
  s["max_term_distance"] = result.sweep.report.max_term_distance;
  s["displacement_max"] = result.sweep.report.max_vertex_displacement;
  s["rounded_max_commutator"] = result.sweep.report.max_commutator_frobenius;
  s["witness_energy"] = result.energy.total;
  s["witness_energy_over_M"] = result.energy.per_M();
  s["witness_energy_rounded"] = result.energy_rounded.total;
  s["energy_bound"] = result.sweep.report.epsilon_report * result.energy.M + 1e-6;
  s["bound_holds"] = result.bound_holds;
  s["r"] = result.verify.r;
  s["accept"] = result.verify.accept;
  s["reject_reason"] = to_string(result.verify.reason);
  s["r_exceeds_twice_epsilon"] = result.verify.r > 2.0 * result.sweep.report.epsilon_report;
  s["norm_preservation_max_deviation"] = result.norms.max_deviation;
  write_text_file((base / "summary.json").string(), dump_document(with_provenance(s, hash)));

  Json status;
  status["status"] = "ok";
  status["success"] = result.success();
  write_text_file((base / "STATUS.json").string(), dump_document(with_provenance(status, hash)));
}

void write_failure_status(const std::string& dir, const std::string& stage, const std::string& what,
                          const std::string& config_hash) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  Json status;
  status["status"] = "failed";
  status["stage"] = stage;
  status["error"] = what;
  Json stale = Json::array();
  for (const char* name : kArtifacts)
    if (fs::exists(fs::path(dir) / name)) stale.push_back(name);
  status["stale"] = std::move(stale);
  write_text_file((fs::path(dir) / "STATUS.json").string(),
                  dump_document(with_provenance(status, config_hash)));
}

std::vector<ScanRow> scan_epsilon_delta(const ExperimentConfig& config) {
  config.validate();
  std::vector<double> grid = config.deltas;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  struct Job {
    double delta;
    std::uint64_t seed_index;
  };
  std::vector<Job> jobs;
  for (double delta : grid)
    for (int s = 0; s < config.seeds; ++s) jobs.push_back({delta, static_cast<std::uint64_t>(s)});

  // rows run concurrently; each pipeline is single-threaded so results do not
  // depend on the worker count
  ExperimentConfig inner = config;
  inner.workers = 1;
  const double space = std::pow(static_cast<double>(config.d), config.n);
  const bool oracle = space <= static_cast<double>(config.oracle_cap);
  return parallel_map(jobs.size(), config.workers, [&](std::size_t k) {
    ScanRow row;
    row.delta_requested = jobs[k].delta;
    row.seed_index = jobs[k].seed_index;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const PipelineResult res = run_pipeline(inner, jobs[k].delta, jobs[k].seed_index);
      row.delta_actual = res.instance.metadata.delta_actual;
      row.displacement_max = res.sweep.report.max_vertex_displacement;
      row.epsilon_report = res.sweep.report.epsilon_report;
      row.witness_energy_over_M = res.energy.per_M();
      row.accept_at_r = res.verify.accept;
      if (oracle) {
        OracleOptions opts;
        opts.cap = config.oracle_cap;
        row.exact_ground_over_M = exact_ground_energy(res.instance, opts).energy / res.energy.M;
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    if (config.timing)
      row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return row;
  });
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::string opt(const std::optional<double>& x) { return x ? format_double(*x) : ""; }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::string scan_to_csv(const ExperimentConfig& config, const std::vector<ScanRow>& rows) {
  std::ostringstream os;
  os << "# cqsat scan config_hash=" << config.hash() << " tool_version=" << kToolVersion
     << " instance_format=" << kInstanceFormatVersion << " witness_format=" << kWitnessFormatVersion << "\n";
  os << kScanHeader << "\n";
  for (const auto& r : rows) {
    os << format_double(r.delta_requested) << ',' << opt(r.delta_actual) << ',' << opt(r.displacement_max) << ','
       << opt(r.epsilon_report) << ',' << opt(r.witness_energy_over_M) << ',' << opt(r.exact_ground_over_M) << ','
       << (r.accept_at_r ? (*r.accept_at_r ? "true" : "false") : "") << ',' << opt(r.runtime_s) << ','
       << csv_field(r.error) << "\n";
  }
  os << "# summary: per-delta medians over successful rows\n";
  os << "delta_requested,rows,failed,median_delta_actual,median_displacement_max,median_epsilon_report,"
        "median_witness_energy_over_M,accept_rate\n";
  std::size_t k = 0;
  while (k < rows.size()) {
    const double delta = rows[k].delta_requested;
    std::vector<double> da, disp, eps, en;
    std::size_t total = 0, failed = 0, accepted = 0;
    for (; k < rows.size() && rows[k].delta_requested == delta; ++k) {
      ++total;
      const auto& r = rows[k];
      if (!r.error.empty()) {
        ++failed;
        continue;
      }
      da.push_back(*r.delta_actual);
      disp.push_back(*r.displacement_max);
      eps.push_back(*r.epsilon_report);
      en.push_back(*r.witness_energy_over_M);
      accepted += *r.accept_at_r ? 1 : 0;
    }
    const std::size_t ok = total - failed;
    os << format_double(delta) << ',' << total << ',' << failed << ','
       << (ok ? format_double(median(da)) : "") << ',' << (ok ? format_double(median(disp)) : "") << ','
       << (ok ? format_double(median(eps)) : "") << ',' << (ok ? format_double(median(en)) : "") << ','
       << (ok ? format_double(static_cast<double>(accepted) / ok) : "") << "\n";
  }
  // least squares of log eps on log delta_actual; empirical, not a bound
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (const auto& r : rows) {
    if (!r.error.empty() || !(*r.delta_actual > 0.0) || !(*r.epsilon_report > 0.0)) continue;
    const double x = std::log(*r.delta_actual), y = std::log(*r.epsilon_report);
    sx += x, sy += y, sxx += x * x, sxy += x * y, ++m;
  }
  const double det = m * sxx - sx * sx;
  if (m >= 2 && det > 1e-12 * std::max(1.0, m * sxx)) {
    const double p = (m * sxy - sx * sy) / det;
    const double c = std::exp((sy - p * sx) / m);
    os << "# empirical fit epsilon_report ~ C * delta_actual^p over " << m << " rows: C=" << format_double(c)
       << " p=" << format_double(p) << "\n";
  } else {
    os << "# empirical fit epsilon_report ~ C * delta_actual^p: not enough rows with delta_actual > 0\n";
  }
  return os.str();
}

}  // namespace cqsat
