#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "wigner/errors.hpp"
#include "wigner/tags.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace wigner;
namespace fs = std::filesystem;

namespace {

GatingConfig tiny_layout() {
  GatingConfig config;
  config.repetition_period_ps = 1000;
  config.gate_width_ps = 100;
  config.herald_channel = 0;
  config.herald_offset_ps = 50;
  config.bins = {BinWindow{1, 300, 0}, BinWindow{2, 700, 1}};
  return config;
}

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "wigner-tags-test";
  fs::create_directories(dir);
  return dir;
}

} // namespace

TEST_CASE("standard layout is valid across bin counts") {
  for (int bins : {1, 2, 7, 8, 16}) {
    const GatingConfig config = GatingConfig::standard(bins);
    CHECK(config.bin_count() == bins);
    CHECK_NOTHROW(config.validate());
  }
  const GatingConfig wide = GatingConfig::standard(8, 2'000'000, 10'000);
  CHECK(wide.repetition_period_ps == 2'000'000);
  CHECK(wide.gate_width_ps == 10'000);
  CHECK_NOTHROW(wide.validate());
  CHECK_THROWS_AS(GatingConfig::standard(0), ConfigError);
}

TEST_CASE("gating validation rejects broken layouts") {
  GatingConfig config = tiny_layout();
  config.bins[1] = BinWindow{1, 320, 1}; // overlaps bin 0's gate on the same channel
  CHECK_THROWS_AS(config.validate(), ConfigError);

  config = tiny_layout();
  config.bins[1].offset_ps = 990; // gate sticks out of the frame
  CHECK_THROWS_AS(config.validate(), ConfigError);

  config = tiny_layout();
  config.bins[1].bin_index = 0; // duplicate
  CHECK_THROWS_AS(config.validate(), ConfigError);

  config = tiny_layout();
  config.bins[1].bin_index = 2; // gap in the index range
  CHECK_THROWS_AS(config.validate(), ConfigError);

  config = tiny_layout();
  config.repetition_period_ps = 0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
}

TEST_CASE("ingest classifies a hand-built stream") {
  const GatingConfig config = tiny_layout();
  const std::vector<TimeTagRecord> records = {
      {0, -17},   // before the first frame: dropped
      {0, 50},    // f0 herald
      {1, 310},   // f0 bin 0 (within the gate)
      {2, 690},   // f0 bin 1 (gate edge is inclusive at half width)
      {0, 1050},  // f1 herald, no clicks
      {1, 2300},  // f2 click without herald
      {0, 5050},  // f5 herald (frames 3 and 4 are empty)
      {7, 5300},  // unknown channel
      {1, 5500},  // known channel, outside every gate
  };
  const HeraldedHistogram h = ingest(records, config);

  CHECK(h.total_pulses == 6);
  CHECK(h.total_heralds == 3);
  CHECK(h.coincidences == 1);
  CHECK(h.conditioned == std::vector<std::int64_t>{2, 0, 1});
  CHECK(h.unconditioned == std::vector<std::int64_t>{4, 1, 1});
  CHECK(h.bin_occupations == std::vector<std::int64_t>{2, 1});
  CHECK(h.dropped_records == 2);
  CHECK(h.unknown_channel_records == 1);

  // order independence: ingest must sort internally
  std::vector<TimeTagRecord> shuffled = records;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937{12345});
  const HeraldedHistogram h2 = ingest(shuffled, config);
  CHECK(h2.conditioned == h.conditioned);
  CHECK(h2.unconditioned == h.unconditioned);
  CHECK(h2.total_pulses == h.total_pulses);
  CHECK(h2.dropped_records == h.dropped_records);
}

TEST_CASE("empty stream yields an empty histogram") {
  const HeraldedHistogram h = ingest({}, tiny_layout());
  CHECK(h.total_pulses == 0);
  CHECK(h.total_heralds == 0);
  CHECK(h.conditioned == std::vector<std::int64_t>{0, 0, 0});
}

TEST_CASE("generate is deterministic in the seed") {
  const GatingConfig gating = GatingConfig::standard(8);
  const DetectorModel detector = make_detector_model(8, 0.165, 4);
  SourceConfig source;
  source.rho = fock_state(1, 1);
  source.dark_rate_hz = 100.0;

  const auto a = generate(source, detector, gating, 2000, 77);
  const auto b = generate(source, detector, gating, 2000, 77);
  const auto c = generate(source, detector, gating, 2000, 78);
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("generated single-photon run reproduces the detection efficiency") {
  const GatingConfig gating = GatingConfig::standard(8);
  const DetectorModel detector = make_detector_model(8, 0.165, 4);
  SourceConfig source;
  source.rho = fock_state(1, 1);

  const std::int64_t pulses = 20000;
  const auto records = generate(source, detector, gating, pulses, 2024);
  const HeraldedHistogram h = ingest(records, gating);

  // herald efficiency 1 and no darks: perfect frame bookkeeping
  CHECK(h.total_pulses == pulses);
  CHECK(h.total_heralds == pulses);
  CHECK(h.dropped_records == 0);
  CHECK(h.unknown_channel_records == 0);

  // one photon in, so P(click) = eta, binomial errors ~ 0.0026
  const double rate = static_cast<double>(h.coincidences) / static_cast<double>(h.total_heralds);
  CHECK(std::abs(rate - 0.165) < 0.011);
  // a single photon cannot produce two clicks
  CHECK(h.conditioned[2] == 0);

  // uniform splitting: occupation spread stays within a few sigma
  std::int64_t lo = h.bin_occupations[0], hi = h.bin_occupations[0];
  for (const auto c : h.bin_occupations) {
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  CHECK(static_cast<double>(hi) / static_cast<double>(lo) < 1.35);
}

TEST_CASE("tag files round trip in both formats") {
  const GatingConfig gating = GatingConfig::standard(4);
  const DetectorModel detector = make_detector_model(4, 0.4, 3);
  SourceConfig source;
  source.rho = fock_state(1, 1);
  source.displacement = DisplacementSetting{0.6, 0.8};
  source.dark_rate_hz = 500.0;
  const auto records = generate(source, detector, gating, 500, 5);

  const fs::path dir = temp_dir();
  write_tags_text(dir / "roundtrip.tags", records, gating);
  write_tags_binary(dir / "roundtrip.bin", records);

  CHECK(read_tags(dir / "roundtrip.tags") == records);
  CHECK(read_tags(dir / "roundtrip.bin") == records);

  std::ifstream header(dir / "roundtrip.tags");
  std::string first_line;
  std::getline(header, first_line);
  CHECK(first_line.find("# timetag v1") == 0);
}

TEST_CASE("binary format refuses negative timestamps") {
  const std::vector<TimeTagRecord> records = {{1, -5}};
  CHECK_THROWS_AS(write_tags_binary(temp_dir() / "negative.bin", records), DataError);
}

TEST_CASE("malformed text input is reported with its line number") {
  const fs::path path = temp_dir() / "malformed.tags";
  std::ofstream out(path);
  out << "# timetag v1; rep_period_ps=1000; channels=0,1\n";
  out << "0,50\n";
  out << "1,not-a-number\n";
  out.close();
  CHECK_THROWS_WITH_AS(read_tags(path), doctest::Contains(":3"), DataError);
}

TEST_CASE("truncated binary input is detected") {
  const GatingConfig gating = GatingConfig::standard(2);
  const std::vector<TimeTagRecord> records = {{0, 100}, {1, 200}};
  const fs::path path = temp_dir() / "truncated.bin";
  write_tags_binary(path, records);
  fs::resize_file(path, fs::file_size(path) - 5);
  CHECK_THROWS_WITH_AS(read_tags(path), doctest::Contains("truncated"), DataError);
}

TEST_CASE("missing tag file raises a data error") {
  CHECK_THROWS_AS(read_tags(temp_dir() / "does-not-exist.tags"), DataError);
}

TEST_CASE("histogram CSV carries the comment and both histograms") {
  const GatingConfig config = tiny_layout();
  const std::vector<TimeTagRecord> records = {{0, 50}, {1, 310}, {0, 1050}};
  const HeraldedHistogram h = ingest(records, config);

  const fs::path path = temp_dir() / "histogram.csv";
  write_histogram_csv(path, h, "smoke note");

  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "# smoke note");
  std::getline(in, line);
  CHECK(line.find("k,") == 0);
  int rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 3);
}
