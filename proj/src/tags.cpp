#include "wigner/tags.hpp"

#include "wigner/errors.hpp"
#include "wigner/rng.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace wigner {

namespace fs = std::filesystem;

int GatingConfig::bin_count() const {
  int max_index = -1;
  for (const auto& w : bins) max_index = std::max(max_index, w.bin_index);
  return max_index + 1;
}

void GatingConfig::validate() const {
  if (repetition_period_ps <= 0) throw ConfigError("gating: repetition period must be positive");
  if (gate_width_ps <= 0 || gate_width_ps >= repetition_period_ps) {
    throw ConfigError("gating: gate width must be positive and below the repetition period");
  }
  if (bins.empty()) throw ConfigError("gating: no TMD bin windows configured");

  std::set<int> seen_bins;
  std::map<int, std::vector<std::int64_t>> centers_per_channel;
  centers_per_channel[herald_channel].push_back(herald_offset_ps);
  for (const auto& w : bins) {
    if (w.bin_index < 0 || w.bin_index > 30) throw ConfigError("gating: bin index out of range");
    if (!seen_bins.insert(w.bin_index).second) {
      throw ConfigError("gating: duplicate bin index " + std::to_string(w.bin_index));
    }
    centers_per_channel[w.channel].push_back(w.offset_ps);
  }
  if (static_cast<int>(bins.size()) != bin_count()) {
    throw ConfigError("gating: bin indices must form a contiguous range starting at 0");
  }
  const std::int64_t half = gate_width_ps / 2;
  for (auto& [channel, centers] : centers_per_channel) {
    std::sort(centers.begin(), centers.end());
    for (std::size_t i = 0; i < centers.size(); ++i) {
      if (centers[i] - half < 0 || centers[i] + half >= repetition_period_ps) {
        throw ConfigError("gating: bin window extends outside the pulse frame");
      }
      if (i > 0 && centers[i] - centers[i - 1] <= gate_width_ps) {
        std::ostringstream msg;
        msg << "gating: windows on channel " << channel << " overlap (offsets "
            << centers[i - 1] << " and " << centers[i] << " ps)";
        throw ConfigError(msg.str());
      }
    }
  }
}

GatingConfig GatingConfig::standard(int bin_count, std::int64_t repetition_period_ps,
                                    std::int64_t gate_width_ps) {
  if (bin_count < 1) throw ConfigError("gating: bin count must be >= 1");
  GatingConfig config;
  config.repetition_period_ps = repetition_period_ps;
  config.gate_width_ps = gate_width_ps;
  const int slots = (bin_count + 1) / 2;
  const std::int64_t start = repetition_period_ps / 10;
  config.herald_offset_ps = repetition_period_ps / 20;
  const std::int64_t spacing =
      slots > 1 ? (config.repetition_period_ps - 2 * start) / (slots - 1) : 0;
  for (int b = 0; b < bin_count; ++b) {
    const int channel = 1 + (b % 2);
    const std::int64_t offset = start + (b / 2) * (slots > 1 ? spacing : 0);
    config.bins.push_back(BinWindow{channel, offset, b});
  }
  config.validate();
  return config;
}

ClickCounts HeraldedHistogram::conditioned_counts() const {
  CountVector counts(static_cast<Eigen::Index>(conditioned.size()));
  for (std::size_t k = 0; k < conditioned.size(); ++k) {
    counts(static_cast<Eigen::Index>(k)) = conditioned[k];
  }
  return ClickCounts{std::move(counts)};
}

ClickCounts HeraldedHistogram::unconditioned_counts_vector() const {
  CountVector counts(static_cast<Eigen::Index>(unconditioned.size()));
  for (std::size_t k = 0; k < unconditioned.size(); ++k) {
    counts(static_cast<Eigen::Index>(k)) = unconditioned[k];
  }
  return ClickCounts{std::move(counts)};
}

HeraldedHistogram ingest(std::span<const TimeTagRecord> records, const GatingConfig& config) {
  config.validate();
  const int bins = config.bin_count();

  HeraldedHistogram histogram;
  histogram.conditioned.assign(bins + 1, 0);
  histogram.unconditioned.assign(bins + 1, 0);
  histogram.bin_occupations.assign(bins, 0);
  if (records.empty()) return histogram;

  std::vector<TimeTagRecord> sorted_copy;
  if (!std::is_sorted(records.begin(), records.end(),
                      [](const auto& a, const auto& b) { return a.timestamp_ps < b.timestamp_ps; })) {
    sorted_copy.assign(records.begin(), records.end());
    std::stable_sort(sorted_copy.begin(), sorted_copy.end(), [](const auto& a, const auto& b) {
      return a.timestamp_ps < b.timestamp_ps;
    });
    records = sorted_copy;
  }

  std::set<int> known_channels{config.herald_channel};
  // window lookup per channel, sorted by center offset
  std::map<int, std::vector<BinWindow>> windows;
  for (const auto& w : config.bins) {
    windows[w.channel].push_back(w);
    known_channels.insert(w.channel);
  }
  for (auto& [channel, list] : windows) {
    std::sort(list.begin(), list.end(),
              [](const auto& a, const auto& b) { return a.offset_ps < b.offset_ps; });
  }

  const std::int64_t period = config.repetition_period_ps;
  const std::int64_t half = config.gate_width_ps / 2;

  std::int64_t first_frame = -1;
  std::int64_t current_frame = -1;
  bool herald = false;
  std::uint32_t occupied = 0;

  const auto finalize = [&]() {
    const int k = std::popcount(occupied);
    ++histogram.unconditioned[k];
    for (int b = 0; b < bins; ++b) {
      if (occupied & (1u << b)) ++histogram.bin_occupations[b];
    }
    if (herald) {
      ++histogram.conditioned[k];
      ++histogram.total_heralds;
      if (k > 0) ++histogram.coincidences;
    }
  };

  for (const auto& record : records) {
    if (record.timestamp_ps < 0) {
      ++histogram.dropped_records;
      continue;
    }
    const std::int64_t frame = record.timestamp_ps / period;
    if (current_frame < 0) {
      first_frame = current_frame = frame;
    } else if (frame != current_frame) {
      finalize();
      histogram.unconditioned[0] += frame - current_frame - 1; // empty frames
      current_frame = frame;
      herald = false;
      occupied = 0;
    }

    const int channel = record.channel;
    if (!known_channels.count(channel)) {
      ++histogram.unknown_channel_records;
      continue;
    }
    const std::int64_t offset = record.timestamp_ps - frame * period;
    bool matched = false;
    if (channel == config.herald_channel &&
        std::abs(offset - config.herald_offset_ps) <= half) {
      herald = true;
      matched = true;
    }
    if (!matched) {
      const auto it = windows.find(channel);
      if (it != windows.end()) {
        for (const auto& w : it->second) {
          if (std::abs(offset - w.offset_ps) <= half) {
            occupied |= 1u << w.bin_index;
            matched = true;
            break;
          }
        }
      }
    }
    if (!matched) ++histogram.dropped_records;
  }
  finalize();
  histogram.total_pulses = current_frame - first_frame + 1;
  return histogram;
}

namespace {

void validate_source(const SourceConfig& source) {
  if (source.rho.probs.size() == 0) throw ConfigError("generate: empty source statistics");
  if (source.rho.probs.minCoeff() < 0.0) {
    throw ConfigError("generate: source statistics have a negative entry");
  }
  if (std::abs(source.rho.norm() - 1.0) > 1e-6) {
    throw ConfigError("generate: source statistics are not normalized");
  }
  if (source.herald_efficiency < 0.0 || source.herald_efficiency > 1.0) {
    throw ConfigError("generate: herald efficiency must lie in [0, 1]");
  }
  if (source.dark_rate_hz < 0.0) throw ConfigError("generate: dark rate must be >= 0");
  validate(source.displacement);
}

} // namespace

std::vector<TimeTagRecord> generate(const SourceConfig& source, const DetectorModel& detector,
                                    const GatingConfig& gating, std::int64_t pulses,
                                    std::uint64_t seed) {
  validate_source(source);
  gating.validate();
  if (pulses < 1) throw ConfigError("generate: pulse count must be >= 1");
  if (gating.bin_count() != detector.bin_count) {
    throw ConfigError("generate: gating layout and detector bin count disagree");
  }

  // Photon-number distribution entering the TMD, as a sampling CDF.
  const int n_cap = default_mismatch_truncation(source.rho.n_max(), source.displacement) + 15;
  const auto model_dist = displaced_with_mismatch(source.rho, source.displacement, n_cap, 1.0);
  std::vector<double> cdf(n_cap + 1);
  double acc = 0.0;
  for (int n = 0; n <= n_cap; ++n) {
    acc += model_dist.stats.probs(n);
    cdf[n] = acc;
  }
  for (auto& c : cdf) c /= acc;

  std::vector<double> bin_cdf(detector.bin_count);
  acc = 0.0;
  for (int b = 0; b < detector.bin_count; ++b) {
    acc += detector.bin_probs(b);
    bin_cdf[b] = acc;
  }

  std::vector<const BinWindow*> window_of_bin(detector.bin_count, nullptr);
  for (const auto& w : gating.bins) window_of_bin[w.bin_index] = &w;

  std::set<int> channels{gating.herald_channel};
  for (const auto& w : gating.bins) channels.insert(w.channel);
  const double dark_mean_per_frame =
      source.dark_rate_hz * static_cast<double>(gating.repetition_period_ps) * 1e-12;

  const std::int64_t jitter_half = std::max<std::int64_t>(1, gating.gate_width_ps / 8);
  const std::int64_t period = gating.repetition_period_ps;

  std::vector<TimeTagRecord> stream;
  stream.reserve(static_cast<std::size_t>(pulses) * 2);
  std::vector<TimeTagRecord> frame_tags;

  for (std::int64_t f = 0; f < pulses; ++f) {
    Rng rng(seed, static_cast<std::uint64_t>(f));
    frame_tags.clear();
    const std::int64_t frame_start = f * period;

    if (rng.bernoulli(source.herald_efficiency)) {
      frame_tags.push_back(TimeTagRecord{
          static_cast<std::uint8_t>(gating.herald_channel),
          frame_start + gating.herald_offset_ps + rng.uniform_signed(jitter_half)});
    }

    const double u = rng.uniform();
    int n = 0;
    while (n < n_cap && u >= cdf[n]) ++n;

    std::uint32_t occupied = 0;
    for (int photon = 0; photon < n; ++photon) {
      if (!rng.bernoulli(detector.efficiency)) continue;
      const double v = rng.uniform();
      int b = 0;
      while (b + 1 < detector.bin_count && v >= bin_cdf[b]) ++b;
      occupied |= 1u << b;
    }
    for (int b = 0; b < detector.bin_count; ++b) {
      if (!(occupied & (1u << b))) continue;
      const BinWindow* w = window_of_bin[b];
      frame_tags.push_back(TimeTagRecord{
          static_cast<std::uint8_t>(w->channel),
          frame_start + w->offset_ps + rng.uniform_signed(jitter_half)});
    }

    if (dark_mean_per_frame > 0.0) {
      for (const int channel : channels) {
        const std::int64_t darks = rng.poisson(dark_mean_per_frame);
        for (std::int64_t i = 0; i < darks; ++i) {
          frame_tags.push_back(TimeTagRecord{
              static_cast<std::uint8_t>(channel),
              frame_start + static_cast<std::int64_t>(
                                rng.uniform_below(static_cast<std::uint64_t>(period)))});
        }
      }
    }

    std::sort(frame_tags.begin(), frame_tags.end(), [](const auto& a, const auto& b) {
      return a.timestamp_ps != b.timestamp_ps ? a.timestamp_ps < b.timestamp_ps
                                              : a.channel < b.channel;
    });
    stream.insert(stream.end(), frame_tags.begin(), frame_tags.end());
  }
  return stream;
}

// --- file I/O -------------------------------------------------------------

namespace {

constexpr char kBinaryMagic[16] = {'W', 'P', 'T', 'A', 'G', 'B', 'I', 'N',
                                   '1', 0,   0,   0,   0,   0,   0,   0};

std::string channel_list(const GatingConfig& config) {
  std::set<int> channels{config.herald_channel};
  for (const auto& w : config.bins) channels.insert(w.channel);
  std::string out;
  for (const int c : channels) {
    if (!out.empty()) out += ',';
    out += std::to_string(c);
  }
  return out;
}

// write-to-temp-then-rename keeps partially written outputs invisible
class AtomicFile {
public:
  AtomicFile(const fs::path& path, std::ios::openmode mode)
      : final_path_(path), tmp_path_(path.string() + ".tmp"), out_(tmp_path_, mode) {
    if (!out_) throw DataError("cannot open " + tmp_path_.string() + " for writing");
  }
  std::ofstream& stream() { return out_; }
  void commit() {
    out_.flush();
    if (!out_) throw DataError("write failed for " + tmp_path_.string());
    out_.close();
    fs::rename(tmp_path_, final_path_);
  }

private:
  fs::path final_path_;
  fs::path tmp_path_;
  std::ofstream out_;
};

} // namespace

void write_tags_text(const fs::path& path, std::span<const TimeTagRecord> records,
                     const GatingConfig& config) {
  AtomicFile file(path, std::ios::out | std::ios::trunc);
  auto& out = file.stream();
  out << "# timetag v1; rep_period_ps=" << config.repetition_period_ps
      << "; channels=" << channel_list(config) << "\n";

  std::string buffer;
  buffer.reserve(1 << 20);
  char line[40];
  for (const auto& record : records) {
    char* p = line;
    auto r1 = std::to_chars(p, line + sizeof line, static_cast<int>(record.channel));
    p = r1.ptr;
    *p++ = ',';
    auto r2 = std::to_chars(p, line + sizeof line, record.timestamp_ps);
    p = r2.ptr;
    *p++ = '\n';
    buffer.append(line, static_cast<std::size_t>(p - line));
    if (buffer.size() > (1 << 20) - 64) {
      out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
      buffer.clear();
    }
  }
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  file.commit();
}

void write_tags_binary(const fs::path& path, std::span<const TimeTagRecord> records) {
  AtomicFile file(path, std::ios::out | std::ios::trunc | std::ios::binary);
  auto& out = file.stream();
  out.write(kBinaryMagic, sizeof kBinaryMagic);

  std::string buffer;
  buffer.reserve(9 << 16);
  for (const auto& record : records) {
    if (record.timestamp_ps < 0) {
      throw DataError("binary tag format stores unsigned timestamps; got a negative one");
    }
    char rec[9];
    rec[0] = static_cast<char>(record.channel);
    const auto ts = static_cast<std::uint64_t>(record.timestamp_ps);
    for (int i = 0; i < 8; ++i) rec[1 + i] = static_cast<char>((ts >> (8 * i)) & 0xff);
    buffer.append(rec, sizeof rec);
    if (buffer.size() > (9 << 16) - 16) {
      out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
      buffer.clear();
    }
  }
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  file.commit();
}

namespace {

std::vector<TimeTagRecord> read_tags_binary(std::ifstream& in, const fs::path& path) {
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(16, std::ios::beg);
  if ((size - 16) % 9 != 0) {
    throw DataError("binary tag file " + path.string() + " has a truncated record");
  }
  const std::size_t count = (size - 16) / 9;
  std::vector<TimeTagRecord> records;
  records.reserve(count);
  std::vector<char> raw(size - 16);
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (!in) throw DataError("failed reading " + path.string());
  for (std::size_t i = 0; i < count; ++i) {
    const char* rec = raw.data() + 9 * i;
    std::uint64_t ts = 0;
    for (int b = 0; b < 8; ++b) {
      ts |= static_cast<std::uint64_t>(static_cast<unsigned char>(rec[1 + b])) << (8 * b);
    }
    records.push_back(TimeTagRecord{static_cast<std::uint8_t>(static_cast<unsigned char>(rec[0])),
                                    static_cast<std::int64_t>(ts)});
  }
  return records;
}

} // namespace

std::vector<TimeTagRecord> read_tags(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open tag file " + path.string());
  char magic[16] = {};
  in.read(magic, sizeof magic);
  if (in.gcount() == 16 && std::memcmp(magic, kBinaryMagic, 16) == 0) {
    return read_tags_binary(in, path);
  }

  in.clear();
  in.seekg(0, std::ios::beg);
  std::vector<TimeTagRecord> records;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    int channel = 0;
    std::int64_t ts = 0;
    const char* begin = line.data();
    const char* end = line.data() + line.size();
    bool ok = comma != std::string::npos;
    if (ok) {
      auto r1 = std::from_chars(begin, begin + comma, channel);
      auto r2 = std::from_chars(begin + comma + 1, end, ts);
      ok = r1.ec == std::errc{} && r2.ec == std::errc{} && r2.ptr == end && channel >= 0 &&
           channel <= 255;
    }
    if (!ok) {
      throw DataError("malformed record at " + path.string() + ":" + std::to_string(line_number));
    }
    records.push_back(TimeTagRecord{static_cast<std::uint8_t>(channel), ts});
  }
  return records;
}

void write_histogram_csv(const fs::path& path, const HeraldedHistogram& histogram,
                         const std::string& comment) {
  AtomicFile file(path, std::ios::out | std::ios::trunc);
  auto& out = file.stream();
  if (!comment.empty()) out << "# " << comment << "\n";
  out << "k,conditioned_count,unconditioned_count\n";
  for (std::size_t k = 0; k < histogram.conditioned.size(); ++k) {
    out << k << ',' << histogram.conditioned[k] << ',' << histogram.unconditioned[k] << '\n';
  }
  file.commit();
}

} // namespace wigner
