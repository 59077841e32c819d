#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dmlens/cli.hh"
#include "dmlens/synth.hh"
#include "dmlens/trace_io.hh"

using namespace dmlens;

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("dmlens_cli_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string &name) const { return (path / name).string(); }
};

std::size_t count_of(const std::string &s, const std::string &needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos;
       pos = s.find(needle, pos + 1)) {
    ++n;
  }
  return n;
}

} // namespace

TEST_CASE("version") {
  const Result r = run({"version"});
  CHECK(r.code == cli::kExitOk);
  CHECK(r.out.rfind("dmlens ", 0) == 0);
}

TEST_CASE("usage errors exit 1") {
  CHECK(run({}).code == cli::kExitInput);
  CHECK(run({"frobnicate"}).code == cli::kExitInput);
  CHECK(run({"analyze"}).code == cli::kExitInput);
  CHECK(run({"analyze", "x.ndjson", "--min-bytes", "lots"}).code == cli::kExitInput);
  CHECK(run({"--help"}).code == cli::kExitOk);
}

TEST_CASE("quiet and verbose are exclusive") {
  TempDir dir;
  const std::string trace = dir.file("t.ndjson");
  REQUIRE(run({"gen", "--pattern", "clean", "-o", trace}).code == 0);
  const Result r = run({"analyze", "-q", "-v", trace});
  CHECK(r.code == cli::kExitInput);
  CHECK_FALSE(r.err.empty());
}

TEST_CASE("clean trace") {
  TempDir dir;
  const std::string trace = dir.file("clean.ndjson");
  REQUIRE(run({"gen", "--pattern", "clean", "--iterations", "3", "-o", trace}).code == 0);
  const Result r = run({"analyze", trace});
  CHECK(r.code == cli::kExitOk);
  CHECK(count_of(r.out, "(none detected)") == 5);
  CHECK(r.err.empty());
}

TEST_CASE("findings are not failures") {
  TempDir dir;
  const std::string trace = dir.file("l1.ndjson");
  REQUIRE(run({"gen", "--pattern", "listing1", "-o", trace}).code == 0);
  const Result r = run({"analyze", trace});
  CHECK(r.code == cli::kExitOk);
  CHECK(count_of(r.out, "(none detected)") == 3);
}

TEST_CASE("inverted interval") {
  TempDir dir;
  const std::string trace = dir.file("bad.ndjson");
  std::ofstream(trace) << "{\"dmlens\":1,\"num_devices\":2,\"host_device\":1}\n"
                       << "{\"seq\":0,\"kind\":\"kernel\",\"t0\":9,\"t1\":3,"
                          "\"src_dev\":0,\"dst_dev\":0,\"src_addr\":0,\"dst_addr\":0,"
                          "\"bytes\":0,\"hash\":0,\"codeptr\":0}\n";
  const Result r = run({"analyze", trace});
  CHECK(r.code == cli::kExitInput);
  CHECK(r.out.empty());
  CHECK(r.err.find("MalformedRecord") != std::string::npos);
  CHECK(r.err.find("line 2") != std::string::npos);
}

TEST_CASE("missing input") {
  TempDir dir;
  const Result r = run({"analyze", dir.file("nope.ndjson")});
  CHECK(r.code == cli::kExitInput);
  CHECK(r.err.find("Io") != std::string::npos);
}

TEST_CASE("json output and output file") {
  TempDir dir;
  const std::string trace = dir.file("l2.ndjson");
  REQUIRE(run({"gen", "--pattern", "listing2", "--iterations", "5", "-o", trace}).code == 0);
  const Result r = run({"analyze", "--json", trace});
  REQUIRE(r.code == 0);
  const auto doc = nlohmann::json::parse(r.out);
  CHECK(doc["findings"]["repeated_allocs"][0]["pairs"].size() == 5);

  const std::string report = dir.file("report.json");
  const Result to_file = run({"analyze", "--json", "-o", report, trace});
  CHECK(to_file.code == 0);
  CHECK(to_file.out.empty());
  std::ifstream f(report);
  std::stringstream ss;
  ss << f.rdbuf();
  CHECK(ss.str() == r.out);
}

TEST_CASE("gen writes the truth sidecar") {
  TempDir dir;
  const std::string trace = dir.file("mixed.ndjson");
  const Result r = run({"gen", "--pattern", "mixed", "--iterations", "4", "--devices",
                        "3", "--seed", "9", "--jitter", "50", "-o", trace});
  REQUIRE(r.code == 0);
  std::ifstream f(dir.file("mixed.truth.json"));
  REQUIRE(f);
  const auto truth = nlohmann::json::parse(f);
  synth::PatternSpec spec;
  spec.pattern = synth::Pattern::Mixed;
  spec.n_iterations = 4;
  spec.n_devices = 3;
  spec.seed = 9;
  spec.jitter_ns = 50;
  const synth::Generated g = synth::generate(spec);
  CHECK(truth["ut_events"] == g.truth.ut_events);
  CHECK(truth["expected_union_savings_ns"] == g.truth.expected_union_savings_ns);
  CHECK(read_trace_file(trace) == g.trace);

  CHECK(run({"gen", "--pattern", "nonsense", "-o", trace}).code == cli::kExitInput);
  CHECK(run({"gen", "--pattern", "clean", "--optimized", "-o", trace}).code ==
        cli::kExitInput);
  CHECK(run({"gen", "--pattern", "listing2", "--devices", "1", "-o", trace}).code ==
        cli::kExitInput);
}

TEST_CASE("oracle mode") {
  TempDir dir;
  for (int seed = 0; seed < 20; ++seed) {
    const std::string trace = dir.file("r" + std::to_string(seed) + ".ndjson");
    REQUIRE(run({"gen", "--pattern", "random", "--events", "200", "--seed",
                 std::to_string(seed), "-o", trace})
                .code == 0);
    CHECK(run({"analyze", "--oracle", "-q", trace}).code == cli::kExitOk);
  }
  // Unguarded, a reception can be claimed by two outbound transfers.
  const std::string trace = dir.file("shared.ndjson");
  std::ofstream(trace)
      << "{\"dmlens\":1,\"num_devices\":3,\"host_device\":0}\n"
      << "{\"seq\":0,\"kind\":\"transfer\",\"t0\":0,\"t1\":10,\"src_dev\":0,\"dst_dev\":1,"
         "\"src_addr\":1,\"dst_addr\":2,\"bytes\":8,\"hash\":5,\"codeptr\":0}\n"
      << "{\"seq\":1,\"kind\":\"transfer\",\"t0\":5,\"t1\":15,\"src_dev\":0,\"dst_dev\":2,"
         "\"src_addr\":1,\"dst_addr\":2,\"bytes\":8,\"hash\":5,\"codeptr\":0}\n"
      << "{\"seq\":2,\"kind\":\"transfer\",\"t0\":20,\"t1\":30,\"src_dev\":1,\"dst_dev\":0,"
         "\"src_addr\":2,\"dst_addr\":1,\"bytes\":8,\"hash\":5,\"codeptr\":0}\n";
  CHECK(run({"analyze", "--oracle", trace}).code == cli::kExitOk);
  const Result strict = run({"analyze", "--json", "--strict-pseudocode", trace});
  CHECK(strict.code == cli::kExitOk);
  const auto doc = nlohmann::json::parse(strict.out);
  std::size_t trips = 0;
  for (const auto &g : doc["findings"]["round_trips"]) {
    trips += g["trips"].size();
  }
  CHECK(trips == 2);
}

TEST_CASE("quiet suppresses warnings only") {
  TempDir dir;
  const std::string trace = dir.file("r.ndjson");
  REQUIRE(run({"gen", "--pattern", "random", "--events", "200", "--seed", "4", "-o",
               trace})
              .code == 0);
  const Result loud = run({"analyze", trace});
  const Result quiet = run({"analyze", "-q", trace});
  CHECK(loud.code == quiet.code);
  CHECK(loud.out == quiet.out);
  CHECK_FALSE(loud.err.empty());
  CHECK(quiet.err.empty());
  const Result verbose = run({"analyze", "-v", trace});
  CHECK(verbose.out == loud.out);
  CHECK(verbose.err.find("events: 200") != std::string::npos);
}

TEST_CASE("min-bytes hides small transfers") {
  TempDir dir;
  const std::string trace = dir.file("l1.ndjson");
  REQUIRE(run({"gen", "--pattern", "listing1", "--bytes", "64", "-o", trace}).code == 0);
  CHECK(count_of(run({"analyze", trace}).out, "(none detected)") == 3);
  CHECK(count_of(run({"analyze", "--min-bytes", "65", trace}).out,
                 "(none detected)") == 4);
}

TEST_CASE("colour is controlled by the environment") {
  TempDir dir;
  const std::string trace = dir.file("c.ndjson");
  REQUIRE(run({"gen", "--pattern", "clean", "-o", trace}).code == 0);
  setenv("DMLENS_COLOR", "always", 1);
  CHECK(run({"analyze", trace}).out.find("\x1b[") != std::string::npos);
  CHECK(run({"analyze", "--json", trace}).out.find("\x1b[") == std::string::npos);
  setenv("DMLENS_COLOR", "never", 1);
  CHECK(run({"analyze", trace}).out.find("\x1b[") == std::string::npos);
  unsetenv("DMLENS_COLOR");
}

TEST_CASE("audit") {
  TempDir dir;
  const std::string trace = dir.file("m.ndjson");
  const std::string payloads = dir.file("payloads");
  REQUIRE(run({"gen", "--pattern", "listing1", "--payload-dir", payloads, "-o", trace})
              .code == 0);
  Result r = run({"audit", trace, "--payload-dir", payloads});
  CHECK(r.code == 0);
  CHECK(r.out.find("collision_count: 0\n") != std::string::npos);
  CHECK(r.err.empty());

  // Seq 9 sends the array again, sharing the hash of seq 1.
  std::ofstream(fs::path(payloads) / "9.bin", std::ios::binary) << "forged";
  r = run({"audit", trace, "--payload-dir", payloads});
  CHECK(r.code == 0);
  CHECK(r.out.find("collision_count: 1\n") != std::string::npos);
  CHECK(r.err.find("seq 9") != std::string::npos);

  CHECK(run({"audit", trace, "--payload-dir", dir.file("none")}).code == cli::kExitInput);
  CHECK(run({"audit", trace}).code == cli::kExitInput);
}
