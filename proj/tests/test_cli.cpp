#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "efc/correction.hpp"
#include "efc/trace_io.hpp"

namespace {

const char* cli = EFC_CLI_PATH;

struct RunResult {
  int exit_code = -1;
  std::string output;
};

// Runs the tool with stdout+stderr captured through a temp file.
RunResult run_cli(const std::string& args) {
  const std::string out_path = "cli_capture.tmp";
  const std::string cmd =
      std::string(cli) + " " + args + " > " + out_path + " 2>&1";
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream f(out_path);
  std::stringstream ss;
  ss << f.rdbuf();
  r.output = ss.str();
  std::remove(out_path.c_str());
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  REQUIRE(f.good());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path);
  f << content;
}

}  // namespace

TEST_CASE("no subcommand prints help and exits zero") {
  const RunResult r = run_cli("");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("run") != std::string::npos);
}

TEST_CASE("print-defaults emits a parseable config") {
  const RunResult r = run_cli("--print-defaults");
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("dt = 1e-05") != std::string::npos);
  CHECK(r.output.find("pid.kp = 6") != std::string::npos);
  CHECK(r.output.find("matrix.diag = 0.00062") != std::string::npos);
}

TEST_CASE("defaults block reproduces the empty-config run bit for bit") {
  const RunResult defaults = run_cli("--print-defaults");
  write_file("cli_defaults.cfg", defaults.output);
  write_file("cli_empty.cfg", "");

  const RunResult a =
      run_cli("run -c cli_defaults.cfg -o cli_a.csv mode=fixed");
  const RunResult b = run_cli("run -c cli_empty.cfg -o cli_b.csv mode=fixed");
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  CHECK(slurp("cli_a.csv") == slurp("cli_b.csv"));
  for (const char* p : {"cli_defaults.cfg", "cli_empty.cfg", "cli_a.csv",
                        "cli_b.csv"}) {
    std::remove(p);
  }
}

TEST_CASE("run writes a trace with the documented header") {
  write_file("cli_run.cfg", "n_steps = 50\n");
  const RunResult r = run_cli("run -c cli_run.cfg -o cli_run.csv");
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("steps: 50") != std::string::npos);

  const efc::Trace t = efc::read_trace_csv("cli_run.csv");
  CHECK(t.size() == 50);
  std::ifstream f("cli_run.csv");
  std::string header;
  std::getline(f, header);
  CHECK(header == efc::trace_csv_header());
  std::remove("cli_run.cfg");
  std::remove("cli_run.csv");
}

TEST_CASE("run in both mode writes the float shadow next to the trace") {
  write_file("cli_both.cfg", "n_steps = 40\nmode = both\n");
  const RunResult r = run_cli("run -c cli_both.cfg -o cli_both.csv");
  REQUIRE(r.exit_code == 0);
  const efc::Trace fixed = efc::read_trace_csv("cli_both.csv");
  const efc::Trace shadow = efc::read_trace_csv("cli_both.float.csv");
  CHECK(fixed.size() == 40);
  CHECK(shadow.size() == 40);
  std::remove("cli_both.cfg");
  std::remove("cli_both.csv");
  std::remove("cli_both.float.csv");
}

TEST_CASE("missing config file fails with a diagnostic") {
  const RunResult r = run_cli("run -c cli_missing.cfg -o cli_x.csv");
  CHECK(r.exit_code != 0);
  CHECK(r.output.find("cli_missing.cfg") != std::string::npos);
}

TEST_CASE("unknown override fails naming the key") {
  write_file("cli_bad.cfg", "");
  const RunResult r = run_cli("run -c cli_bad.cfg -o cli_x.csv pid.wat=1");
  CHECK(r.exit_code != 0);
  CHECK(r.output.find("pid.wat") != std::string::npos);
  std::remove("cli_bad.cfg");
}

TEST_CASE("seed flag overrides the config seed") {
  write_file("cli_seed.cfg", "n_steps = 60\nadc.noise_rms = 1e-3\nseed = 1\n");
  const RunResult a = run_cli("--seed 7 run -c cli_seed.cfg -o cli_s7.csv");
  const RunResult b = run_cli("run -c cli_seed.cfg -o cli_s1.csv");
  const RunResult c = run_cli("run -c cli_seed.cfg -o cli_s7b.csv seed=7");
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  REQUIRE(c.exit_code == 0);
  CHECK(slurp("cli_s7.csv") != slurp("cli_s1.csv"));
  CHECK(slurp("cli_s7.csv") == slurp("cli_s7b.csv"));
  for (const char* p : {"cli_seed.cfg", "cli_s7.csv", "cli_s1.csv",
                        "cli_s7b.csv"}) {
    std::remove(p);
  }
}

TEST_CASE("step-response validates the channel") {
  write_file("cli_step.cfg", "n_steps = 30\n");
  const RunResult bad =
      run_cli("step-response -c cli_step.cfg --channel 99 -o cli_x.csv");
  CHECK(bad.exit_code != 0);

  const RunResult good =
      run_cli("step-response -c cli_step.cfg --channel 5 -o cli_step.csv");
  CHECK(good.exit_code == 0);
  const efc::Trace t = efc::read_trace_csv("cli_step.csv");
  CHECK(t.size() == 30);
  std::remove("cli_step.cfg");
  std::remove("cli_step.csv");
}

TEST_CASE("matrix dump emits the coupling matrix at full precision") {
  const RunResult r = run_cli("matrix dump -o cli_matrix.csv");
  REQUIRE(r.exit_code == 0);

  std::ifstream f("cli_matrix.csv");
  const Eigen::MatrixXd expected = efc::build_mutual_matrix<double>();
  std::string line;
  int rows = 0;
  while (std::getline(f, line)) {
    std::stringstream ss(line);
    std::string cell;
    int cols = 0;
    while (std::getline(ss, cell, ',')) {
      CHECK(efc::parse_double(cell, "matrix cell") == expected(rows, cols));
      ++cols;
    }
    CHECK(cols == 16);
    ++rows;
  }
  CHECK(rows == 16);
  std::remove("cli_matrix.csv");
}

TEST_CASE("link selftest reports the sample frame") {
  const RunResult r = run_cli("link selftest");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("a5") != std::string::npos);
  CHECK(r.output.find("c6 b8") != std::string::npos);
  CHECK(r.output.find("FAIL") == std::string::npos);
}

TEST_CASE("bench reports mean and p99") {
  write_file("cli_bench.cfg", "");
  // full iteration count lives in the acceptance gate; keep this one warm
  const RunResult r = run_cli("bench -c cli_bench.cfg");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("mean") != std::string::npos);
  CHECK(r.output.find("p99") != std::string::npos);
  std::remove("cli_bench.cfg");
}
