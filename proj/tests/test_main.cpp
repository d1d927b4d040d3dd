#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "efc/loop.hpp"
#include "efc/trace_io.hpp"

using namespace efc;

TEST_CASE("trace csv header lists every column group") {
  const std::string h = trace_csv_header();
  CHECK(h.rfind("step,t,i0,", 0) == 0);
  CHECK(h.find(",adc15,c0,") != std::string::npos);
  CHECK(h.find(",a15,frames_lost,ovf") == h.size() - 20);
}

TEST_CASE("trace csv round trips exactly") {
  LoopConfig cfg;
  cfg.n_steps = 64;
  cfg.adc.noise_rms = 1e-3;
  cfg.plant.disturbance.kind = DisturbanceKind::sine;
  cfg.plant.disturbance.amplitude = 0.5;
  cfg.plant.disturbance.freq_hz = 2000.0;
  const Trace t = run_closed_loop(cfg);

  std::stringstream ss;
  write_trace_csv(ss, t);
  const Trace back = read_trace_csv(ss);
  REQUIRE(back.size() == t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    CHECK(back[k].step == t[k].step);
    CHECK(back[k].t == t[k].t);
    CHECK(back[k].currents == t[k].currents);
    CHECK(back[k].coil_volts == t[k].coil_volts);
    CHECK(back[k].adc_codes == t[k].adc_codes);
    CHECK(back[k].corrected == t[k].corrected);
    CHECK(back[k].pid_out == t[k].pid_out);
    CHECK(back[k].dac_codes == t[k].dac_codes);
    CHECK(back[k].applied == t[k].applied);
    CHECK(back[k].frames_lost == t[k].frames_lost);
    CHECK(back[k].overflow == t[k].overflow);
  }
}

TEST_CASE("trace reader rejects malformed input") {
  std::stringstream empty;
  CHECK_THROWS_AS(read_trace_csv(empty), std::invalid_argument);

  std::stringstream bad_header("a,b,c\n1,2,3\n");
  CHECK_THROWS_AS(read_trace_csv(bad_header), std::invalid_argument);

  std::stringstream short_row;
  short_row << trace_csv_header() << "\n0,0,1,2\n";
  CHECK_THROWS_AS(read_trace_csv(short_row), std::invalid_argument);
}

TEST_CASE("summarize flags the all-zero trace as settled at zero") {
  Trace t(10);
  for (std::size_t k = 0; k < t.size(); ++k) t[k].step = static_cast<long>(k);
  const TraceSummary s = summarize(t);
  for (int ch = 0; ch < kChannelCount; ++ch) {
    CHECK(s.channels[ch].peak_error == 0.0);
    CHECK(s.channels[ch].settling_step == 0);
    CHECK(s.channels[ch].steady_residual == 0.0);
  }
  CHECK_THROWS_AS(summarize(Trace{}), std::invalid_argument);
}

TEST_CASE("summarize finds the last threshold violation") {
  Trace t(100);
  for (std::size_t k = 0; k < t.size(); ++k) {
    t[k].step = static_cast<long>(k);
    // decaying envelope on channel 2: peak 1.0 at k=0, below 1% from k=47
    t[k].corrected[2] = (k < 47) ? 1.0 / static_cast<double>(k + 1) : 1e-4;
  }
  const TraceSummary s = summarize(t);
  CHECK(s.channels[2].peak_error == 1.0);
  // 1/k drops below 0.01 at k+1 > 100, so the last violation is k=46
  CHECK(s.channels[2].settling_step == 47);

  // a late spike means the channel never settles
  t[99].corrected[2] = 0.5;
  CHECK(summarize(t).channels[2].settling_step == 100);
}

TEST_CASE("summarize keeps the overflow and loss counters") {
  Trace t(20);
  for (std::size_t k = 0; k < t.size(); ++k) {
    t[k].step = static_cast<long>(k);
    t[k].frames_lost = static_cast<long>(k / 2);
    t[k].overflow = (k % 5 == 0) ? 1 : 0;
  }
  const TraceSummary s = summarize(t);
  CHECK(s.frames_lost == 9);
  CHECK(s.overflow_steps == 4);
  CHECK(s.n_steps == 20);
}
