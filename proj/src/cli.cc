#include "dmlens/cli.hh"

#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dmlens/detectors.hh"
#include "dmlens/estimator.hh"
#include "dmlens/hashing.hh"
#include "dmlens/oracle.hh"
#include "dmlens/report.hh"
#include "dmlens/synth.hh"
#include "dmlens/trace_io.hh"

namespace dmlens::cli {

namespace {

namespace fs = std::filesystem;

constexpr const char *kVersion = "1.0.0";

struct AnalyzeArgs {
  std::string input;
  std::string output;
  bool json = false;
  bool quiet = false;
  bool verbose = false;
  bool oracle = false;
  bool strict = false;
  std::uint64_t min_bytes = 1;
};

struct GenArgs {
  std::string pattern = "listing1";
  std::string output;
  std::string payload_dir;
  std::uint32_t iterations = 1;
  std::uint64_t bytes = 4096;
  std::uint32_t devices = 2;
  std::uint64_t seed = 0;
  std::uint64_t jitter = 0;
  std::size_t events = 100;
  bool mutate = false;
  bool optimized = false;
  bool no_debug_info = false;
};

struct AuditArgs {
  std::string input;
  std::string payload_dir;
};

void print_error(std::ostream &err, const Error &e) {
  // Parse errors already name their line.
  err << "error: " << error_code_name(e.code()) << ": " << e.what() << "\n";
}

bool want_color(bool to_stdout) {
  const char *env = std::getenv("DMLENS_COLOR");
  const std::string mode = env == nullptr ? "auto" : env;
  if (mode == "always") {
    return true;
  }
  if (mode == "never") {
    return false;
  }
  return to_stdout && isatty(STDOUT_FILENO) != 0;
}

void write_file(const std::string &path, const std::string &text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  }
  f << text;
  if (!f) {
    throw Error(ErrorCode::Io, "write failed: " + path);
  }
}

int analyze_cmd(const AnalyzeArgs &a, std::ostream &out, std::ostream &err) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const Trace trace = read_trace_file(a.input);
  const auto t1 = clock::now();

  DetectorOptions opts;
  opts.strict_round_trips = a.strict;
  std::vector<PrepWarning> prep_warnings;
  Findings findings = analyze(trace, opts, &prep_warnings);
  const auto t2 = clock::now();

  if (!a.quiet) {
    for (const PrepWarning &w : prep_warnings) {
      err << "warning: seq " << w.seq << ": " << w.reason << "\n";
    }
  }

  if (a.oracle) {
    if (a.strict) {
      err << "error: --oracle compares against the default round-trip "
             "semantics and cannot be combined with --strict-pseudocode\n";
      return kExitInput;
    }
    const auto diffs = oracle::diff_findings(findings, oracle::oracle_analyze(trace));
    if (!diffs.empty()) {
      for (const std::string &d : diffs) {
        err << "divergence: " << d << "\n";
      }
      return kExitDivergence;
    }
    if (a.verbose) {
      err << "oracle: detectors agree\n";
    }
  }

  filter_min_bytes(findings, a.min_bytes);
  const SavingsEstimate savings = estimate(trace, findings);
  if (!a.quiet) {
    for (const std::string &w : savings.warnings) {
      err << "warning: " << w << "\n";
    }
  }
  const auto issues = attribute(trace, findings);
  RenderOptions ropts;
  ropts.color = !a.json && want_color(a.output.empty());
  const std::string report = a.json
                                 ? render_json(trace, findings, savings, issues)
                                 : render_text(trace, findings, savings, issues, ropts);
  if (a.output.empty()) {
    out << report;
  } else {
    write_file(a.output, report);
  }

  if (a.verbose) {
    const auto ms = [](auto d) {
      return std::chrono::duration<double, std::milli>(d).count();
    };
    err << "events: " << trace.events.size() << "\n"
        << "duplicate groups: " << findings.duplicates.size() << "\n"
        << "round-trip groups: " << findings.round_trips.size() << "\n"
        << "repeated-alloc groups: " << findings.repeated_allocs.size() << "\n"
        << "unused allocs: " << findings.unused_allocs.size() << "\n"
        << "unused transfers: " << findings.unused_transfers.size() << "\n"
        << "parse ms: " << ms(t1 - t0) << "\n"
        << "analyze ms: " << ms(t2 - t1) << "\n";
  }
  return kExitOk;
}

nlohmann::ordered_json truth_json(const synth::PatternSpec &spec,
                                  const synth::GroundTruth &t) {
  nlohmann::ordered_json j;
  j["pattern"] = synth::pattern_name(spec.pattern);
  j["n_iterations"] = spec.n_iterations;
  j["bytes_per_array"] = spec.bytes_per_array;
  j["n_devices"] = spec.n_devices;
  j["seed"] = spec.seed;
  j["dd_groups"] = t.dd_groups;
  j["dd_events"] = t.dd_events;
  j["rt_pairs"] = t.rt_pairs;
  j["ra_groups"] = t.ra_groups;
  j["ra_pairs"] = t.ra_pairs;
  j["ua_pairs"] = t.ua_pairs;
  j["ut_events"] = t.ut_events;
  j["expected_union_savings_ns"] = t.expected_union_savings_ns;
  return j;
}

std::string truth_path(const std::string &output) {
  std::string name = output;
  const std::string ext = ".ndjson";
  if (name.size() > ext.size() &&
      name.compare(name.size() - ext.size(), ext.size(), ext) == 0) {
    name.resize(name.size() - ext.size());
  }
  return name + ".truth.json";
}

void write_payloads(const std::string &dir,
                    const std::map<std::uint64_t, std::vector<std::uint8_t>> &payloads) {
  fs::create_directories(dir);
  for (const auto &[seq, bytes] : payloads) {
    const fs::path p = fs::path(dir) / (std::to_string(seq) + ".bin");
    write_file(p.string(), std::string(bytes.begin(), bytes.end()));
  }
}

int gen_cmd(const GenArgs &g, std::ostream &out, std::ostream &err) {
  const bool keep = !g.payload_dir.empty();
  if (g.pattern == "random") {
    synth::RandomSpec spec;
    spec.seed = g.seed;
    spec.n_events = g.events;
    spec.n_devices = g.devices;
    spec.keep_payloads = keep;
    const synth::Generated gen = synth::generate_random(spec);
    write_file(g.output, serialize_trace(gen.trace));
    if (keep) {
      write_payloads(g.payload_dir, gen.payloads);
    }
    return kExitOk;
  }

  const auto pattern = synth::pattern_from_name(g.pattern);
  if (!pattern) {
    err << "error: unknown pattern '" << g.pattern << "'\n";
    return kExitInput;
  }
  synth::PatternSpec spec;
  spec.pattern = *pattern;
  spec.n_iterations = g.iterations;
  spec.bytes_per_array = g.bytes;
  spec.n_devices = g.devices;
  spec.seed = g.seed;
  spec.jitter_ns = g.jitter;
  spec.mutate_round_trip = g.mutate;
  spec.debug_info = !g.no_debug_info;
  spec.keep_payloads = keep;

  if (g.optimized) {
    write_file(g.output, serialize_trace(synth::optimized_counterpart(spec)));
    return kExitOk;
  }
  const synth::Generated gen = synth::generate(spec);
  write_file(g.output, serialize_trace(gen.trace));
  const std::string tp = truth_path(g.output);
  write_file(tp, truth_json(spec, gen.truth).dump(2) + "\n");
  if (keep) {
    write_payloads(g.payload_dir, gen.payloads);
  }
  out << "wrote " << g.output << " (" << gen.trace.events.size()
      << " events) and " << tp << "\n";
  return kExitOk;
}

int audit_cmd(const AuditArgs &a, std::ostream &out, std::ostream &err) {
  const Trace trace = read_trace_file(a.input);
  if (!fs::is_directory(a.payload_dir)) {
    err << "error: Io: payload directory not found: " << a.payload_dir << "\n";
    return kExitInput;
  }
  CollisionAuditStore store;
  std::size_t missing = 0;
  std::size_t mismatched = 0;
  for (const TraceEvent &e : trace.events) {
    if (e.kind != EventKind::Transfer || e.bytes == 0 || e.hash == 0) {
      continue;
    }
    const fs::path p = fs::path(a.payload_dir) / (std::to_string(e.seq) + ".bin");
    std::ifstream f(p, std::ios::binary);
    if (!f) {
      ++missing;
      continue;
    }
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                          std::istreambuf_iterator<char>());
    if (bytes.empty()) {
      err << "warning: seq " << e.seq << ": empty payload file\n";
      continue;
    }
    if (hash_bytes(as_bytes_view(bytes)).value() != e.hash) {
      ++mismatched;
      err << "warning: seq " << e.seq
          << ": payload does not hash to the recorded value\n";
    }
    store.observe(ContentHash(e.hash), as_bytes_view(bytes));
  }
  if (missing != 0) {
    err << "warning: " << missing << " transfer payload(s) missing\n";
  }
  out << "observations: " << store.observations() << "\n"
      << "unique_hashes: " << store.unique_hashes() << "\n"
      << "hash_mismatches: " << mismatched << "\n"
      << "collision_count: " << store.collision_count() << "\n";
  return kExitOk;
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out,
        std::ostream &err) {
  CLI::App app{"Finds inefficient host/device data mappings in offload traces",
               "dmlens"};
  app.require_subcommand(1);

  AnalyzeArgs an;
  auto *analyze_app = app.add_subcommand("analyze", "Analyze a trace file");
  analyze_app->add_option("trace", an.input, "Trace file (NDJSON)")->required();
  analyze_app->add_option("-o,--output", an.output, "Write the report here");
  analyze_app->add_flag("--json", an.json, "Emit the JSON report");
  auto *quiet = analyze_app->add_flag("-q,--quiet", an.quiet, "Suppress warnings");
  auto *verbose =
      analyze_app->add_flag("-v,--verbose", an.verbose, "Enable verbose output");
  quiet->excludes(verbose);
  analyze_app->add_flag("--oracle", an.oracle,
                        "Cross-check detectors against reference implementations");
  analyze_app->add_flag("--strict-pseudocode", an.strict,
                        "Match round trips without the ordering guard; return legs may be reused");
  analyze_app->add_option("--min-bytes", an.min_bytes,
                          "Hide duplicate and round-trip transfers smaller than this");

  GenArgs gn;
  auto *gen_app = app.add_subcommand("gen", "Generate a synthetic trace");
  gen_app->add_option("--pattern", gn.pattern,
                      "clean, listing1, listing2, unused_alloc, "
                      "unused_transfer, mixed or random");
  gen_app->add_option("-o,--output", gn.output, "Trace file to write")->required();
  gen_app->add_option("--iterations", gn.iterations, "Loop trip count");
  gen_app->add_option("--bytes", gn.bytes, "Bytes per array");
  gen_app->add_option("--devices", gn.devices, "Device slots including the host");
  gen_app->add_option("--seed", gn.seed, "Random seed");
  gen_app->add_option("--jitter", gn.jitter, "Maximum idle gap in ns");
  gen_app->add_option("--events", gn.events, "Event count (random pattern)");
  gen_app->add_option("--payload-dir", gn.payload_dir,
                      "Write transfer payloads as <seq>.bin here");
  gen_app->add_flag("--mutate", gn.mutate, "Change data between round-trip legs");
  gen_app->add_flag("--optimized", gn.optimized,
                    "Write the fixed variant of the workload");
  gen_app->add_flag("--no-debug-info", gn.no_debug_info,
                    "Omit file and line from events");

  AuditArgs au;
  auto *audit_app =
      app.add_subcommand("audit", "Replay payload sidecars through the collision audit");
  audit_app->add_option("trace", au.input, "Trace file (NDJSON)")->required();
  audit_app->add_option("--payload-dir", au.payload_dir,
                        "Directory of <seq>.bin payload files")
      ->required();

  auto *version_app = app.add_subcommand("version", "Print the version");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp &) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    if (analyze_app->parsed()) {
      return analyze_cmd(an, out, err);
    }
    if (gen_app->parsed()) {
      return gen_cmd(gn, out, err);
    }
    if (audit_app->parsed()) {
      return audit_cmd(au, out, err);
    }
    if (version_app->parsed()) {
      out << "dmlens " << kVersion << "\n";
      return kExitOk;
    }
  } catch (const Error &e) {
    print_error(err, e);
    return e.code() == ErrorCode::FindingsTraceMismatch ? kExitInternal
                                                        : kExitInput;
  } catch (const fs::filesystem_error &e) {
    err << "error: Io: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception &e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}

} // namespace dmlens::cli
