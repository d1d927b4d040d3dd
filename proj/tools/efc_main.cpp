#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "efc/config.hpp"
#include "efc/link.hpp"
#include "efc/loop.hpp"
#include "efc/trace_io.hpp"

namespace {

// out.csv -> out.float.csv; anything else gets .float appended
std::string float_sibling(const std::string& path) {
  const std::string ext = ".csv";
  if (path.size() > ext.size() &&
      path.compare(path.size() - ext.size(), ext.size(), ext) == 0) {
    return path.substr(0, path.size() - ext.size()) + ".float.csv";
  }
  return path + ".float";
}

void write_and_summarize(const std::string& path, const efc::Trace& trace) {
  efc::write_trace_csv(path, trace);
  std::cout << "wrote " << path << '\n';
  efc::print_summary(std::cout, efc::summarize(trace));
}

int cmd_run(const std::string& cfg_path, const std::string& out_path,
            const std::vector<std::string>& overrides) {
  const efc::LoopConfig cfg = efc::parse_config(cfg_path, overrides);
  if (cfg.mode == efc::LoopMode::both) {
    const efc::BothTraces both = efc::run_both(cfg);
    efc::write_trace_csv(float_sibling(out_path), both.float_trace);
    std::cout << "wrote " << float_sibling(out_path) << " (float shadow)\n";
    write_and_summarize(out_path, both.fixed_trace);
  } else {
    write_and_summarize(out_path, efc::run_closed_loop(cfg));
  }
  return 0;
}

int cmd_step_response(const std::string& cfg_path, int channel,
                      const std::string& out_path,
                      const std::vector<std::string>& overrides) {
  const efc::LoopConfig cfg = efc::parse_config(cfg_path, overrides);
  write_and_summarize(out_path, efc::run_step_response(cfg, channel));
  return 0;
}

int cmd_matrix_dump(const std::string& out_path) {
  std::ofstream f(out_path);
  if (!f) throw std::runtime_error("cannot open '" + out_path + "'");
  efc::write_matrix_csv(f, efc::build_mutual_matrix<double>());
  std::cout << "wrote " << out_path << '\n';
  return 0;
}

int cmd_link_selftest() {
  efc::FramePayload payload;
  for (int i = 0; i < efc::kChannelCount; ++i) payload[i] = static_cast<int16_t>(i);
  const efc::FrameBytes frame = efc::encode_frame(payload, 0);

  std::cout << "sample frame (seq 0, payload 0..15):\n ";
  for (std::size_t i = 0; i < frame.size(); ++i) {
    std::printf(" %02x", frame[i]);
    if (i % 12 == 11 && i + 1 < frame.size()) std::printf("\n ");
  }
  std::printf("\n");

  bool ok = true;
  const auto check = [&ok](const char* name, bool pass) {
    std::cout << "  " << name << ": " << (pass ? "ok" : "FAIL") << '\n';
    if (!pass) ok = false;
  };

  const uint8_t ref[] = {'1', '2', '3', '4', '5', '6', '7', '8', '9'};
  check("crc check string", efc::crc16_ccitt_false(ref, sizeof(ref)) == 0x29B1);
  const efc::DecodedFrame dec = efc::decode_frame(frame);
  check("round trip", dec.status == efc::DecodeStatus::ok && dec.seq == 0 &&
                          dec.payload == payload);
  efc::FrameBytes bad = frame;
  bad[7] ^= 0x01;
  check("corruption detect",
        efc::decode_frame(bad).status == efc::DecodeStatus::bad_crc);
  check("serialization delay", efc::LinkModel{}.serialization_delay() == 7.2e-6);
  return ok ? 0 : 1;
}

int cmd_bench(const std::string& cfg_path,
              const std::vector<std::string>& overrides) {
  efc::LoopConfig cfg = efc::parse_config(cfg_path, overrides);
  cfg.mode = efc::LoopMode::fixed;
  const efc::LatencyStats stats = efc::measure_pipeline_latency(cfg);
  std::printf("pipeline latency, %ld iterations (fixed mode)\n", stats.iterations);
  std::printf("  mean  %8.3f us\n", stats.mean_s * 1e6);
  std::printf("  p99   %8.3f us\n", stats.p99_s * 1e6);
  std::printf("  var   %8.3f us^2\n", stats.variance_s2 * 1e12);
  std::printf("  dt    %8.3f us\n", cfg.dt * 1e6);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"16-channel error-field feedback loop simulator"};
  app.require_subcommand(0, 1);

  bool show_defaults = false;
  app.add_flag("--print-defaults", show_defaults,
               "Print the default config block and exit");
  std::string seed_override;
  app.add_option("--seed", seed_override, "Override the master seed");

  std::string cfg_path;
  std::string out_path;
  int channel = 0;
  std::vector<std::string> overrides;

  CLI::App* run = app.add_subcommand("run", "Run the closed loop, write a trace CSV");
  run->add_option("-c,--config", cfg_path, "Config file")->required();
  run->add_option("-o,--output", out_path, "Trace CSV output")->required();
  run->add_option("overrides", overrides, "key=value config overrides");

  CLI::App* step = app.add_subcommand(
      "step-response", "Unit step disturbance on one channel, write a trace CSV");
  step->add_option("-c,--config", cfg_path, "Config file")->required();
  step->add_option("--channel", channel, "Disturbed channel 0..15")->required();
  step->add_option("-o,--output", out_path, "Trace CSV output")->required();
  step->add_option("overrides", overrides, "key=value config overrides");

  CLI::App* matrix = app.add_subcommand("matrix", "Mutual-inductance matrix tools");
  matrix->require_subcommand(1);
  CLI::App* dump = matrix->add_subcommand("dump", "Write the matrix as CSV");
  dump->add_option("-o,--output", out_path, "Matrix CSV output")->required();

  CLI::App* link = app.add_subcommand("link", "Inter-board link tools");
  link->require_subcommand(1);
  CLI::App* selftest =
      link->add_subcommand("selftest", "Print a sample frame, check the codec");

  CLI::App* bench = app.add_subcommand("bench", "Measure digital-pipeline latency");
  bench->add_option("-c,--config", cfg_path, "Config file")->required();
  bench->add_option("overrides", overrides, "key=value config overrides");

  CLI11_PARSE(app, argc, argv);

  if (show_defaults) {
    std::cout << efc::print_defaults();
    return 0;
  }

  if (!seed_override.empty()) overrides.push_back("seed=" + seed_override);

  try {
    if (run->parsed()) return cmd_run(cfg_path, out_path, overrides);
    if (step->parsed()) {
      return cmd_step_response(cfg_path, channel, out_path, overrides);
    }
    if (matrix->parsed() && dump->parsed()) return cmd_matrix_dump(out_path);
    if (link->parsed() && selftest->parsed()) return cmd_link_selftest();
    if (bench->parsed()) return cmd_bench(cfg_path, overrides);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  std::cout << app.help();
  return 0;
}
