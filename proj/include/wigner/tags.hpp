#pragma once

#include "wigner/detector.hpp"
#include "wigner/displacement.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace wigner {

/// One detection event from the time-to-digital converter.
struct TimeTagRecord {
  std::uint8_t channel = 0;
  std::int64_t timestamp_ps = 0;

  friend bool operator==(const TimeTagRecord&, const TimeTagRecord&) = default;
};

/// Expected arrival window of one TMD bin within a pulse frame.
struct BinWindow {
  int channel = 0;
  std::int64_t offset_ps = 0; // window center relative to the frame start
  int bin_index = 0;
};

/// Frame layout and gate placement.  Records inside a gate are assigned to
/// the herald or to a TMD bin; everything else is dropped.
struct GatingConfig {
  std::int64_t repetition_period_ps = 500'000; // 2 MHz pulse train
  std::int64_t gate_width_ps = 4'000;          // tight gating, < 4 ns
  int herald_channel = 0;
  std::int64_t herald_offset_ps = 25'000;
  std::vector<BinWindow> bins;

  int bin_count() const;
  /// Throws ConfigError on overlapping windows or windows outside the frame.
  void validate() const;

  /// Default layout: TMD bins alternate between APD channels 1 and 2, with
  /// evenly spaced arrival slots inside the frame.
  static GatingConfig standard(int bin_count, std::int64_t repetition_period_ps = 500'000,
                               std::int64_t gate_width_ps = 4'000);
};

/// Click histograms accumulated over one acquisition.
struct HeraldedHistogram {
  std::vector<std::int64_t> conditioned;      // clicks k = 0..B, herald present
  std::vector<std::int64_t> unconditioned;    // clicks k = 0..B, all frames
  std::vector<std::int64_t> bin_occupations;  // per-bin hit counts, all frames
  std::int64_t total_pulses = 0;
  std::int64_t total_heralds = 0;
  std::int64_t coincidences = 0; // frames with herald and at least one click
  std::int64_t dropped_records = 0;
  std::int64_t unknown_channel_records = 0;

  ClickCounts conditioned_counts() const;
  ClickCounts unconditioned_counts_vector() const;
};

/// Reduce a tag stream to heralded click statistics.  Records must be sorted
/// by timestamp; an unsorted stream is sorted on a copy first.  Frames are
/// assigned by floor division of the timestamp by the repetition period.
HeraldedHistogram ingest(std::span<const TimeTagRecord> records, const GatingConfig& config);

/// Synthetic source + displacement + TMD chain for one acquisition run.
struct SourceConfig {
  PhotonStatistics rho;                 // heralded signal photon statistics
  double herald_efficiency = 1.0;
  DisplacementSetting displacement{0.0, 1.0};
  double dark_rate_hz = 0.0;            // uniform background tag rate per channel
};

/// Generate a time-tag stream: per pulse, the photon number entering the TMD
/// is drawn from the displaced-with-mismatch distribution, thinned by the
/// detector efficiency, and scattered over the bins; one tag is emitted per
/// occupied bin plus a herald tag.  Deterministic for a fixed seed with
/// per-frame substreams.
std::vector<TimeTagRecord> generate(const SourceConfig& source, const DetectorModel& detector,
                                    const GatingConfig& gating, std::int64_t pulses,
                                    std::uint64_t seed);

// --- tag file I/O ---------------------------------------------------------

/// Plain-text format: header line "# timetag v1; ...", then one
/// "channel,timestamp_ps" record per line.
void write_tags_text(const std::filesystem::path& path, std::span<const TimeTagRecord> records,
                     const GatingConfig& config);

/// Binary format: 16-byte magic "WPTAGBIN1" padded with NULs, then fixed
/// 9-byte records (1-byte channel, 8-byte little-endian timestamp).
void write_tags_binary(const std::filesystem::path& path, std::span<const TimeTagRecord> records);

/// Reads either format, sniffing the magic / header line.
std::vector<TimeTagRecord> read_tags(const std::filesystem::path& path);

/// Histogram CSV with columns k,conditioned_count,unconditioned_count.
/// A non-empty comment is emitted first as a '#' line.
void write_histogram_csv(const std::filesystem::path& path, const HeraldedHistogram& histogram,
                         const std::string& comment = {});

} // namespace wigner
