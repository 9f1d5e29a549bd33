#include "cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ncmeter/ncmeter.hpp"

namespace ncm::cli {

using nlohmann::json;

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::usage, "cannot open " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::usage, "cannot open " + path);
  return in;
}

// Writes to `path`, or to `out` when path is empty or "-".
template <typename Fn>
void emit(const std::string& path, std::ostream& out, Fn&& write) {
  if (path.empty() || path == "-") {
    write(out);
    return;
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) fail(ErrorKind::usage, "cannot write " + path);
  write(file);
  file.flush();
  if (!file) fail(ErrorKind::usage, "failed writing " + path);
}

unsigned resolve_workers(unsigned flag) {
  if (const char* env = std::getenv("NC_METER_THREADS")) {
    try {
      int v = std::stoi(env);
      if (v >= 1) return static_cast<unsigned>(v);
    } catch (...) {
    }
    fail(ErrorKind::usage, "NC_METER_THREADS must be a positive integer");
  }
  return flag == 0 ? default_workers() : flag;
}

json digest_entry(const std::string& path) { return {{"path", path}, {"sha256", sha256_file(path)}}; }

json tolerances_json(const Tolerances& t) {
  return {{"direction", t.direction}, {"distance2", t.distance2}, {"tie", t.tie}, {"cov_mean", t.cov_mean}};
}

void check_tolerances(const Tolerances& t) {
  if (!(t.direction > 0) || !(t.distance2 > 0) || !(t.tie > 0) || !(t.cov_mean > 0)) {
    fail(ErrorKind::usage, "all epsilons must be > 0");
  }
}

void write_csv_metrics(std::ostream& out, const MetricReport& r) {
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string();
    return json(*v).dump();
  };
  out << "metric,mean,std,cov,count\n";
  for (const auto& [name, m] : r.metrics) {
    out << name << ',' << cell(m.mean) << ',' << cell(m.std) << ',' << cell(m.cov) << ',' << m.count << '\n';
  }
}

struct Common {
  std::string out;
  unsigned workers = 0;
  std::string format = "json";
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--out", c.out, "Output path (default stdout)");
  app->add_option("--workers", c.workers, "Worker threads (default: all cores; NC_METER_THREADS overrides)");
}

void add_tolerances(CLI::App* app, Tolerances& t) {
  app->add_option("--eps-direction", t.direction, "Centered norm below which a class has no direction")
      ->capture_default_str();
  app->add_option("--eps-distance2", t.distance2, "Squared distance below which a pair is degenerate")
      ->capture_default_str();
  app->add_option("--eps-tie", t.tie, "Relative score gap counted as a near-tie")->capture_default_str();
  app->add_option("--eps-cov-mean", t.cov_mean, "|mean| below which CoV is reported as null")
      ->capture_default_str();
}

// ---------------------------------------------------------------------------

void cmd_accumulate(const std::vector<std::string>& inputs, std::optional<std::uint32_t> num_classes,
                    const Common& common, std::ostream& out) {
  if (inputs.empty()) fail(ErrorKind::usage, "accumulate needs at least one --input shard");
  if (common.out.empty()) fail(ErrorKind::usage, "accumulate needs --out");
  const unsigned workers = resolve_workers(common.workers);
  std::vector<StatsCheckpoint> shards(inputs.size());
  parallel_for(inputs.size(), workers, [&](std::size_t i) {
    try {
      auto in = open_in(inputs[i]);
      EmbeddingStreamReader reader(in, num_classes);
      StatsCheckpoint stats(num_classes.value_or(0), reader.dim());
      EmbeddingRecord rec;
      while (reader.next(rec)) accumulate(stats, rec.label, std::span<const float>(rec.vector));
      shards[i] = std::move(stats);
    } catch (const Error& e) {
      throw Error(e.kind(), "shard " + std::to_string(i) + " (" + inputs[i] + "): " + e.what());
    }
  });
  auto merged = merge_tree(std::move(shards));
  emit(common.out, out, [&](std::ostream& os) { write_stats(os, merged); });

  if (common.out == "-") return;
  std::uint64_t samples = 0, empty = 0;
  for (const auto& c : merged.classes) {
    samples += c.count;
    empty += c.count == 0;
  }
  out << json{{"num_classes", merged.num_classes()},
              {"dim", merged.dim},
              {"samples", samples},
              {"empty_classes", empty},
              {"shards", inputs.size()}}
             .dump()
      << '\n';
}

void cmd_metrics(const std::string& stats_path, const std::string& weights_path, std::uint64_t min_count,
                 std::size_t tile, const Tolerances& tol, const Common& common, std::ostream& out) {
  check_tolerances(tol);
  if (tile == 0) fail(ErrorKind::usage, "--tile must be >= 1");
  auto in = open_in(stats_path);
  auto stats = read_stats(in);
  std::optional<ClassifierSet> weights;
  if (!weights_path.empty()) {
    auto win = open_in(weights_path);
    weights = read_classifier(win);
  }
  MetricsConfig cfg;
  cfg.min_count = min_count;
  cfg.tile = tile;
  cfg.workers = resolve_workers(common.workers);
  cfg.tolerances = tol;
  auto report = compute_metrics(stats, weights ? &*weights : nullptr, cfg);

  json inputs = {{"stats", digest_entry(stats_path)}};
  if (weights) inputs["weights"] = digest_entry(weights_path);
  report.provenance["inputs"] = inputs;
  report.provenance["tool_version"] = kToolVersion;
  report.provenance["config"] = {{"command", "metrics"},
                                 {"min_count", min_count},
                                 {"tile", tile},
                                 {"workers", cfg.workers},
                                 {"epsilons", tolerances_json(tol)}};
  emit(common.out, out, [&](std::ostream& os) {
    if (common.format == "csv") write_csv_metrics(os, report);
    else write_report(os, report);
  });
}

void cmd_agreement(const std::string& stats_path, const std::string& weights_path, const std::string& val_path,
                   std::size_t batch, const Tolerances& tol, const Common& common, std::ostream& out) {
  check_tolerances(tol);
  if (batch == 0) fail(ErrorKind::usage, "--batch must be >= 1");
  auto sin = open_in(stats_path);
  auto stats = read_stats(sin);
  auto win = open_in(weights_path);
  auto weights = read_classifier(win);
  auto vin = open_in(val_path);
  EmbeddingStreamReader reader(vin, stats.num_classes());
  if (reader.dim() != stats.dim) {
    fail(ErrorKind::data, "validation stream dim " + std::to_string(reader.dim()) +
                              " does not match statistics dim " + std::to_string(stats.dim));
  }
  AgreementOptions opt;
  opt.batch = batch;
  opt.workers = resolve_workers(common.workers);
  opt.tie = tol.tie;
  AgreementEvaluator eval(stats, weights, opt);
  auto result = eval.run(reader);
  if (result.samples_evaluated == 0) fail(ErrorKind::data, "validation stream has no records");

  MetricReport report;
  report.num_classes = stats.num_classes();
  report.dim = stats.dim;
  report.included_classes = eval.candidates().size();
  report.min_count = 1;
  add_agreement(report, result);
  report.provenance["inputs"] = {{"stats", digest_entry(stats_path)},
                                 {"weights", digest_entry(weights_path)},
                                 {"validation", digest_entry(val_path)}};
  report.provenance["tool_version"] = kToolVersion;
  report.provenance["config"] = {{"command", "agreement"},
                                 {"batch", batch},
                                 {"workers", opt.workers},
                                 {"epsilons", tolerances_json(tol)}};
  report.provenance["accuracy"] = {{"linear_correct", result.linear_correct}};
  emit(common.out, out, [&](std::ostream& os) {
    if (common.format == "csv") write_csv_metrics(os, report);
    else write_report(os, report);
  });
}

void cmd_permtest(const std::string& runs_path, const std::string& metric, const std::string& target,
                  std::uint64_t trials, std::uint64_t seed, const Common& common, std::ostream& out) {
  auto in = open_in(runs_path);
  auto table = read_run_table(in);
  auto x = table.column(metric);
  auto y = table.column(target);
  auto res = permutation_test(x, y, trials, seed, resolve_workers(common.workers));
  json j = {{"metric", metric},
            {"target", target},
            {"n", x.size()},
            {"observed_r2", res.observed_r2},
            {"p_value", res.p_value()},
            {"p_value_unsmoothed", res.p_value_unsmoothed()},
            {"exceed_count", res.exceed_count},
            {"trials", res.trials},
            {"seed", res.seed},
            {"rng", kPermutationRng}};
  emit(common.out, out, [&](std::ostream& os) {
    if (common.format == "csv") {
      os << "metric,target,n,observed_r2,p_value,p_value_unsmoothed,trials,seed\n"
         << metric << ',' << target << ',' << x.size() << ',' << json(res.observed_r2).dump() << ','
         << json(res.p_value()).dump() << ',' << json(res.p_value_unsmoothed()).dump() << ',' << trials << ','
         << seed << '\n';
    } else {
      os << j.dump(2) << '\n';
    }
  });
}

std::vector<std::uint64_t> parse_counts(const std::string& s, std::uint32_t classes) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      auto v = std::stoull(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      fail(ErrorKind::usage, "--samples-per-class entries must be non-negative integers");
    }
  }
  if (out.size() == 1) out.assign(classes, out.front());
  if (out.size() != classes) {
    fail(ErrorKind::usage, "--samples-per-class needs 1 or " + std::to_string(classes) + " entries");
  }
  return out;
}

struct SynthFlags {
  std::uint32_t classes = 4;
  std::uint32_t dim = 8;
  std::string samples = "100";
  std::string geometry = "simplex_etf";
  double noise = 0.0;
  std::string classifier = "tied";
  double perturb = 0.0;
  double scale = 1.0;
  double offset = 0.0;
  bool bias = false;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::string out_emb, out_wgt, out_truth, out_stats;
};

void cmd_synth(const SynthFlags& f, std::ostream& out) {
  SynthSpec spec;
  spec.num_classes = f.classes;
  spec.dim = f.dim;
  spec.samples_per_class = parse_counts(f.samples, f.classes);
  spec.geometry = parse_geometry(f.geometry);
  spec.noise_sigma = f.noise;
  spec.classifier_mode = parse_classifier_mode(f.classifier);
  spec.perturb_eps = f.perturb;
  spec.scale = f.scale;
  spec.offset_scale = f.offset;
  spec.classifier_bias = f.bias;
  spec.seed = f.seed;
  spec.sample_stream = f.stream;
  auto inst = generate(spec);
  if (!f.out_emb.empty()) emit(f.out_emb, out, [&](std::ostream& os) { write_samples(os, inst); });
  if (!f.out_wgt.empty()) emit(f.out_wgt, out, [&](std::ostream& os) { write_classifier(os, inst.classifiers); });
  if (!f.out_stats.empty()) {
    auto stats = accumulate_exact(inst);
    emit(f.out_stats, out, [&](std::ostream& os) { write_stats(os, stats); });
  }
  emit(f.out_truth, out, [&](std::ostream& os) { os << inst.truth.dump(2) << '\n'; });
}

void cmd_report(const std::vector<std::string>& inputs, const Common& common, std::ostream& out) {
  if (inputs.empty()) fail(ErrorKind::usage, "report needs at least one --input");
  std::vector<std::pair<std::string, MetricReport>> reports;
  std::set<std::string> names;
  for (const auto& path : inputs) {
    auto in = open_in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    auto r = parse_report(ss.str());
    for (const auto& [name, m] : r.metrics) names.insert(name);
    reports.emplace_back(std::filesystem::path(path).stem().string(), std::move(r));
  }
  emit(common.out, out, [&](std::ostream& os) {
    os << "run";
    for (const auto& n : names) os << ',' << n;
    os << '\n';
    for (const auto& [run, r] : reports) {
      os << run;
      for (const auto& n : names) {
        os << ',';
        auto it = r.metrics.find(n);
        if (it != r.metrics.end() && it->second.mean) os << json(*it->second.mean).dump();
      }
      os << '\n';
    }
  });
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neural-collapse measurement engine for token-classification heads", "ncmeter"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  // accumulate
  std::vector<std::string> acc_inputs;
  std::uint32_t acc_classes = 0;
  Common acc_common;
  auto* acc = app.add_subcommand("accumulate", "Accumulate NCEMB1 shards into an NCSTA1 checkpoint");
  acc->add_option("--input", acc_inputs, "NCEMB1 shard (repeatable)");
  acc->add_option("--num-classes", acc_classes, "Vocabulary size C (default: max label + 1)");
  add_common(acc, acc_common);

  // metrics
  std::string met_stats, met_weights;
  std::uint64_t met_min_count = 2;
  std::size_t met_tile = 1024;
  Tolerances met_tol;
  Common met_common;
  auto* met = app.add_subcommand("metrics", "NC1-NC3 metrics from a statistics checkpoint");
  met->add_option("--stats", met_stats, "NCSTA1 checkpoint")->required();
  met->add_option("--weights", met_weights, "NCWGT1 classifier (enables duality metrics)");
  met->add_option("--min-count", met_min_count, "Minimum samples per class")->capture_default_str();
  met->add_option("--tile", met_tile, "Pairwise tile edge in classes")->capture_default_str();
  met->add_option("--format", met_common.format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
  add_tolerances(met, met_tol);
  add_common(met, met_common);

  // agreement
  std::string agr_stats, agr_weights, agr_val;
  std::size_t agr_batch = 64;
  Tolerances agr_tol;
  Common agr_common;
  auto* agr = app.add_subcommand("agreement", "NC4 agreement of linear and nearest-center classifiers");
  agr->add_option("--stats", agr_stats, "NCSTA1 checkpoint (training statistics)")->required();
  agr->add_option("--weights", agr_weights, "NCWGT1 classifier")->required();
  agr->add_option("--val", agr_val, "NCEMB1 held-out (validation) stream")->required();
  agr->add_option("--batch", agr_batch, "Samples per batch")->capture_default_str();
  agr->add_option("--format", agr_common.format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
  add_tolerances(agr, agr_tol);
  add_common(agr, agr_common);

  // permtest
  std::string perm_runs, perm_metric, perm_target;
  std::uint64_t perm_trials = 10000, perm_seed = 0;
  Common perm_common;
  auto* perm = app.add_subcommand("permtest", "Permutation test of R^2 between a metric and a target");
  perm->add_option("--runs", perm_runs, "Run table CSV")->required();
  perm->add_option("--metric", perm_metric, "Metric column")->required();
  perm->add_option("--target", perm_target, "Target column (validation loss)")->required();
  perm->add_option("--trials", perm_trials, "Permutation trials")->capture_default_str();
  perm->add_option("--seed", perm_seed, "RNG seed")->capture_default_str();
  perm->add_option("--format", perm_common.format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
  add_common(perm, perm_common);

  // synth
  SynthFlags syn_flags;
  auto* syn = app.add_subcommand("synth", "Generate a synthetic instance with known metric values");
  syn->add_option("--classes", syn_flags.classes, "Number of classes")->capture_default_str();
  syn->add_option("--dim", syn_flags.dim, "Embedding dim")->capture_default_str();
  syn->add_option("--samples-per-class", syn_flags.samples, "Count, or comma list with one count per class")
      ->capture_default_str();
  syn->add_option("--geometry", syn_flags.geometry, "simplex_etf|orthonormal|uniform_sphere|random_gaussian")
      ->capture_default_str();
  syn->add_option("--noise", syn_flags.noise, "Within-class noise sigma")->capture_default_str();
  syn->add_option("--classifier", syn_flags.classifier, "tied|random|perturbed")->capture_default_str();
  syn->add_option("--perturb", syn_flags.perturb, "Relative perturbation for --classifier perturbed");
  syn->add_option("--scale", syn_flags.scale, "Norm of each class direction")->capture_default_str();
  syn->add_option("--offset", syn_flags.offset, "Std of a shared offset added to every mean");
  syn->add_flag("--bias", syn_flags.bias, "Emit classifier biases");
  syn->add_option("--seed", syn_flags.seed, "Geometry/classifier seed")->capture_default_str();
  syn->add_option("--sample-stream", syn_flags.stream, "Independent sample stream id (e.g. 1 for validation)");
  syn->add_option("--out-emb", syn_flags.out_emb, "NCEMB1 output");
  syn->add_option("--out-wgt", syn_flags.out_wgt, "NCWGT1 output");
  syn->add_option("--out-stats", syn_flags.out_stats, "NCSTA1 accumulated from unquantised samples");
  syn->add_option("--out-truth", syn_flags.out_truth, "Ground-truth JSON (default stdout)");

  // report
  std::vector<std::string> rep_inputs;
  Common rep_common;
  auto* rep = app.add_subcommand("report", "Collect metric reports into a plot-ready CSV");
  rep->add_option("--input", rep_inputs, "Report JSON (repeatable)");
  rep->add_option("--out", rep_common.out, "Output path (default stdout)");

  std::vector<const char*> argv{"ncmeter"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return 0;
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
    return 2;
  }

  try {
    if (*acc) {
      std::optional<std::uint32_t> classes;
      if (acc_classes > 0) classes = acc_classes;
      cmd_accumulate(acc_inputs, classes, acc_common, out);
    } else if (*met) {
      cmd_metrics(met_stats, met_weights, met_min_count, met_tile, met_tol, met_common, out);
    } else if (*agr) {
      cmd_agreement(agr_stats, agr_weights, agr_val, agr_batch, agr_tol, agr_common, out);
    } else if (*perm) {
      cmd_permtest(perm_runs, perm_metric, perm_target, perm_trials, perm_seed, perm_common, out);
    } else if (*syn) {
      cmd_synth(syn_flags, out);
    } else if (*rep) {
      cmd_report(rep_inputs, rep_common, out);
    }
  } catch (const Error& e) {
    err << json{{"error", to_string(e.kind())}, {"message", e.what()}}.dump() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace ncm::cli
