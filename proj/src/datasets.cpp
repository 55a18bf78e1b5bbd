#include "emgtl/datasets.hpp"

#include "emgtl/error.hpp"
#include "emgtl/kernel.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace emgtl {

namespace fs = std::filesystem;

namespace {

using Profile = std::array<double, kArmbandChannels>;

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream seed for (base, tag, a, b).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, std::uint64_t a = 0,
                          std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(splitmix64(base) ^ tag) ^ a) ^ b);
}

enum StreamTag : std::uint64_t {
  kTemplates = 1,
  kDrift = 2,
  kSession = 3,
  kCycle = 4,
  kEvaluation = 5,
  kCarrier = 6,
};

std::string participant_name(int p) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "P%02d", p + 1);
  return buf;
}

std::string session_dir_name(int k) { return "session_" + std::to_string(k); }

// --- binary signal I/O ----------------------------------------------------------

void write_int16_interleaved(const fs::path& path, const RawSignal& signal) {
  std::vector<char> bytes(signal.length() * signal.channels() * 2);
  std::size_t pos = 0;
  for (std::size_t t = 0; t < signal.length(); ++t) {
    for (std::size_t c = 0; c < signal.channels(); ++c) {
      const double v = signal.at(c, t);
      if (v != std::round(v) || v < -32768.0 || v > 32767.0) {
        throw DataError(path.string() + ": sample " + fmt(v) + " is not representable as int16");
      }
      const auto u = std::uint16_t(std::int16_t(v));
      bytes[pos++] = char(u & 0xff);
      bytes[pos++] = char(u >> 8);
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw DataError("cannot write " + path.string());
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open");
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
}

std::vector<double> read_int16(const fs::path& path, std::size_t count) {
  const auto bytes = read_bytes(path);
  if (bytes.size() < count * 2) {
    throw DataError(path.string() + ": truncated signal, expected " + std::to_string(count * 2) +
                    " bytes but file ends at byte offset " + std::to_string(bytes.size()));
  }
  if (bytes.size() > count * 2) {
    throw DataError(path.string() + ": unexpected data after byte offset " +
                    std::to_string(count * 2));
  }
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = double(std::int16_t(std::uint16_t(bytes[2 * i] | (bytes[2 * i + 1] << 8))));
  }
  return out;
}

RawSignal read_signal(const fs::path& path, std::size_t channels, std::size_t samples,
                      double rate) {
  const auto flat = read_int16(path, channels * samples);
  RawSignal sig(channels, samples, rate);
  for (std::size_t t = 0; t < samples; ++t) {
    for (std::size_t c = 0; c < channels; ++c) sig.at(c, t) = flat[t * channels + c];
  }
  return sig;
}

// --- sidecar parsing ------------------------------------------------------------

/// Whitespace-separated `key values...` lines.
class Sidecar {
 public:
  explicit Sidecar(const fs::path& path) : path_(path) {
    std::ifstream in(path);
    if (!in) throw DataError(path.string() + ": missing sidecar");
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
      ++number;
      std::istringstream is(line);
      std::vector<std::string> tokens;
      std::string tok;
      while (is >> tok) tokens.push_back(tok);
      if (!tokens.empty()) lines_.push_back({number, std::move(tokens)});
    }
  }

  const std::vector<std::string>& single(const std::string& key) const {
    const std::vector<std::string>* found = nullptr;
    for (const auto& l : lines_) {
      if (l.tokens[0] == key) {
        if (found) fail("duplicate key '" + key + "'");
        found = &l.tokens;
      }
    }
    if (!found) fail("missing key '" + key + "'");
    return *found;
  }
  bool has(const std::string& key) const {
    return std::any_of(lines_.begin(), lines_.end(),
                       [&](const Line& l) { return l.tokens[0] == key; });
  }
  std::vector<const std::vector<std::string>*> all(const std::string& key) const {
    std::vector<const std::vector<std::string>*> out;
    for (const auto& l : lines_) {
      if (l.tokens[0] == key) out.push_back(&l.tokens);
    }
    return out;
  }
  std::string text(const std::string& key) const { return field(single(key), 1); }
  double number(const std::string& key) const { return to_double(single(key), 1); }
  std::size_t count(const std::string& key) const { return to_size(single(key), 1); }

  std::string field(const std::vector<std::string>& tokens, std::size_t i) const {
    if (i >= tokens.size()) fail("too few fields for '" + tokens[0] + "'");
    return tokens[i];
  }
  double to_double(const std::vector<std::string>& tokens, std::size_t i) const {
    const std::string s = field(tokens, i);
    double v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      fail("unparseable number '" + s + "' for '" + tokens[0] + "'");
    }
    return v;
  }
  std::size_t to_size(const std::vector<std::string>& tokens, std::size_t i) const {
    const std::string s = field(tokens, i);
    std::size_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      fail("unparseable integer '" + s + "' for '" + tokens[0] + "'");
    }
    return v;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw DataError(path_.string() + ": " + msg);
  }

 private:
  struct Line {
    int number;
    std::vector<std::string> tokens;
  };
  fs::path path_;
  std::vector<Line> lines_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

std::vector<fs::path> list_files(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), root);
    if (rel == "MANIFEST") continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.generic_string() < b.generic_string(); });
  return files;
}

std::string manifest_text(const fs::path& root) {
  std::string out;
  for (const fs::path& rel : list_files(root)) {
    out += sha256_file(root / rel) + "  " + rel.generic_string() + "\n";
  }
  return out;
}

std::string sha256_string(const std::string& s) {
  return sha256_hex({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

// --- session layout -----------------------------------------------------------------

std::string session_sidecar(const SessionDataset& s) {
  std::ostringstream os;
  os << "format_version 1\n";
  os << "participant " << s.participant << "\n";
  os << "session_index " << s.session_index << "\n";
  os << "day_offset " << fmt(s.day_offset) << "\n";
  const double rate = s.cycles.empty() ? 1000.0 : s.cycles.front().signal.sample_rate();
  const std::size_t channels = s.cycles.empty() ? kArmbandChannels : s.cycles.front().signal.channels();
  os << "sample_rate " << fmt(rate) << "\n";
  os << "channels " << channels << "\n";
  os << "gesture_seconds " << fmt(s.gesture_seconds) << "\n";
  os << "cycles";
  for (const auto& c : s.cycles) os << " " << c.cycle_id;
  os << "\n";
  os << "evaluation_runs " << s.evaluation_runs.size() << "\n";
  return os.str();
}

std::string cycle_sidecar(const CycleRecording& c) {
  std::ostringstream os;
  os << "cycle " << c.cycle_id << "\n";
  os << "samples " << c.signal.length() << "\n";
  os << "gestures " << c.segments.size() << "\n";
  for (const auto& seg : c.segments) {
    os << "segment " << seg.gesture << " " << seg.start << " " << seg.length << "\n";
  }
  return os.str();
}

std::string eval_sidecar(const EvaluationRun& r) {
  std::ostringstream os;
  os << "samples " << r.signal.length() << "\n";
  os << "frame_rate " << fmt(r.frame_rate_hz) << "\n";
  os << "frames " << r.pitch_deg.size() << "\n";
  if (r.score) os << "score " << fmt(*r.score) << "\n";
  os << "trials " << r.trials.size() << "\n";
  for (const auto& t : r.trials) {
    os << "trial " << t.gesture << " " << t.intensity_level << " " << fmt(t.target_pitch_deg) << " "
       << fmt(t.target_yaw_deg) << " " << t.start << " " << t.length << "\n";
  }
  return os.str();
}

void write_angles(const fs::path& path, const EvaluationRun& r) {
  RawSignal angles(2, r.pitch_deg.size(), r.frame_rate_hz);
  for (std::size_t f = 0; f < r.pitch_deg.size(); ++f) {
    angles.at(0, f) = std::round(r.pitch_deg[f] * 100.0);
    angles.at(1, f) = std::round(r.yaw_deg[f] * 100.0);
    if (angles.at(0, f) != r.pitch_deg[f] * 100.0 && std::abs(angles.at(0, f) - r.pitch_deg[f] * 100.0) > 1e-6) {
      throw DataError(path.string() + ": pitch not on the 0.01 degree grid");
    }
  }
  write_int16_interleaved(path, angles);
}

SessionDataset load_session(const fs::path& dir) {
  const Sidecar meta(dir / "session.txt");
  if (meta.count("format_version") != 1) meta.fail("unsupported format_version");
  SessionDataset s;
  s.participant = meta.text("participant");
  s.session_index = int(meta.count("session_index"));
  s.day_offset = meta.number("day_offset");
  s.gesture_seconds = meta.number("gesture_seconds");
  const double rate = meta.number("sample_rate");
  const std::size_t channels = meta.count("channels");
  const auto& cycle_tokens = meta.single("cycles");
  for (std::size_t i = 1; i < cycle_tokens.size(); ++i) {
    const int id = int(meta.to_size(cycle_tokens, i));
    const fs::path bin = dir / ("cycle_" + std::to_string(id) + ".bin");
    const fs::path txt = dir / ("cycle_" + std::to_string(id) + ".txt");
    if (!fs::exists(bin) || !fs::exists(txt)) {
      throw DataError(dir.string() + ": missing cycle " + std::to_string(id));
    }
    const Sidecar side(txt);
    CycleRecording c;
    c.cycle_id = int(side.count("cycle"));
    if (c.cycle_id != id) side.fail("cycle id does not match file name");
    const std::size_t samples = side.count("samples");
    const std::size_t gestures = side.count("gestures");
    if (gestures != std::size_t(kNumGestures)) {
      side.fail("gesture count " + std::to_string(gestures) + " (expected " +
                std::to_string(kNumGestures) + ")");
    }
    for (const auto* seg : side.all("segment")) {
      c.segments.push_back({int(side.to_size(*seg, 1)), side.to_size(*seg, 2), side.to_size(*seg, 3)});
    }
    if (c.segments.size() != gestures) side.fail("gesture count does not match segment lines");
    c.signal = read_signal(bin, channels, samples, rate);
    s.cycles.push_back(std::move(c));
  }
  const std::size_t runs = meta.count("evaluation_runs");
  for (std::size_t r = 0; r < runs; ++r) {
    const std::string stem = "eval_" + std::to_string(r + 1);
    const Sidecar side(dir / (stem + ".txt"));
    EvaluationRun run;
    const std::size_t samples = side.count("samples");
    run.frame_rate_hz = side.number("frame_rate");
    const std::size_t frames = side.count("frames");
    if (side.has("score")) run.score = side.number("score");
    const std::size_t trials = side.count("trials");
    for (const auto* t : side.all("trial")) {
      run.trials.push_back({int(side.to_size(*t, 1)), int(side.to_size(*t, 2)), side.to_double(*t, 3),
                            side.to_double(*t, 4), side.to_size(*t, 5), side.to_size(*t, 6)});
    }
    if (run.trials.size() != trials) side.fail("trial count does not match trial lines");
    run.signal = read_signal(dir / (stem + ".bin"), channels, samples, rate);
    const RawSignal angles = read_signal(dir / (stem + "_angles.bin"), 2, frames, run.frame_rate_hz);
    for (std::size_t f = 0; f < frames; ++f) {
      run.pitch_deg.push_back(angles.at(0, f) / 100.0);
      run.yaw_deg.push_back(angles.at(1, f) / 100.0);
    }
    s.evaluation_runs.push_back(std::move(run));
  }
  try {
    validate_session(s);
  } catch (const DataError& e) {
    throw DataError(dir.string() + ": " + e.what());
  }
  return s;
}

// --- synthesis helpers ----------------------------------------------------------------

double circular_distance(double a, double b, double n) {
  double d = std::fmod(std::abs(a - b), n);
  return std::min(d, n - d);
}

/// Unit-RMS band-limited noise, one row per channel.
RawSignal carrier_noise(std::size_t length, std::uint64_t seed) {
  constexpr std::size_t kWarmup = 500;
  kernel::Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  RawSignal white(kArmbandChannels, length + kWarmup);
  for (std::size_t c = 0; c < kArmbandChannels; ++c) {
    for (auto& v : white.channel(c)) v = normal(rng);
  }
  static const FilterCoefficients band = design_bandpass({20.0, 450.0, 2, 1000.0});
  const RawSignal filtered = filter_causal(white, band);
  RawSignal out = filtered.slice(kWarmup, length);
  for (std::size_t c = 0; c < kArmbandChannels; ++c) {
    double sq = 0.0;
    for (double v : out.channel(c)) sq += v * v;
    const double rms = std::sqrt(sq / double(std::max<std::size_t>(length, 1)));
    for (auto& v : out.channel(c)) v /= (rms > 0 ? rms : 1.0);
  }
  return out;
}

double natural_intensity(const SynthSpec& spec, kernel::Rng& rng) {
  const double m = spec.natural_intensity_mean, s = spec.natural_intensity_sd;
  const double sigma2 = std::log(1.0 + (s * s) / (m * m));
  std::lognormal_distribution<double> dist(std::log(m) - sigma2 / 2.0, std::sqrt(sigma2));
  return std::clamp(dist(rng), 0.02, 1.0);
}

double quantize(double v) { return std::clamp(std::round(v), -32767.0, 32767.0); }

struct SessionState {
  double day = 0.0;
  double noise = 0.0;
  std::vector<Profile> templates;  // per gesture, after shift and drift
};

/// Yaw beyond the depression start rotates the pattern further.
double yaw_extra_shift(const SynthSpec& spec, double yaw_deg) {
  const double span = 70.0 - spec.yaw_depression_start_deg;
  if (span <= 0.0) return 0.0;
  return spec.yaw_depression_shift * std::clamp((yaw_deg - spec.yaw_depression_start_deg) / span, 0.0, 1.0);
}

Profile envelope(const SynthSpec& spec, const Profile& tmpl, double intensity, double pitch,
                 double yaw) {
  Profile shifted = rotate_channels(tmpl, yaw_extra_shift(spec, yaw));
  const Profile gain = position_modulation(spec, pitch, yaw);
  for (std::size_t c = 0; c < kArmbandChannels; ++c) shifted[c] *= gain[c] * intensity;
  return shifted;
}

CycleRecording synth_cycle(const SynthSpec& spec, const SessionState& st, int cycle_id,
                           std::uint64_t seed) {
  kernel::Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t seg_len = std::size_t(std::llround(spec.gesture_seconds * 1000.0));
  const std::size_t len = seg_len * kNumGestures;
  const RawSignal carrier = carrier_noise(len, derive_seed(seed, kCarrier));
  CycleRecording c;
  c.cycle_id = cycle_id;
  c.signal = RawSignal(kArmbandChannels, len, 1000.0);
  const std::size_t ramp = 300;
  const Profile neutral = envelope(spec, st.templates[0], 1.0, 0.0, 0.0);
  for (int g = 0; g < kNumGestures; ++g) {
    const double intensity = g == 0 ? 1.0 : (cycle_id == 2 ? 1.0 : natural_intensity(spec, rng));
    const Profile env = envelope(spec, st.templates[std::size_t(g)], intensity, 0.0, 0.0);
    const std::size_t start = std::size_t(g) * seg_len;
    c.segments.push_back({g, start, seg_len});
    for (std::size_t t = 0; t < seg_len; ++t) {
      const double r = std::min(1.0, double(t) / double(ramp));
      for (std::size_t ch = 0; ch < kArmbandChannels; ++ch) {
        const double e = (1.0 - r) * neutral[ch] + r * env[ch];
        const double v = spec.amplitude * (e * carrier.at(ch, start + t) + st.noise * normal(rng));
        c.signal.at(ch, start + t) = quantize(v);
      }
    }
  }
  return c;
}

EvaluationRun synth_evaluation(const SynthSpec& spec, const SessionState& st, std::uint64_t seed) {
  kernel::Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double fs = 1000.0;
  const std::size_t trial_len = std::size_t(std::llround(spec.eval_trial_seconds * fs));
  const std::size_t len = trial_len * std::size_t(spec.eval_trials);
  EvaluationRun run;
  run.frame_rate_hz = 100.0;
  const std::size_t samples_per_frame = std::size_t(fs / run.frame_rate_hz);
  const std::size_t frames = len / samples_per_frame;

  struct Request {
    int gesture;
    double intensity;
  };
  std::vector<Request> requests;
  for (int k = 0; k < spec.eval_trials; ++k) {
    EvaluationTrial t;
    t.gesture = int(rng() % kNumGestures);
    t.intensity_level = 1 + int(rng() % 3);
    t.target_pitch_deg = std::round((unit(rng) * 90.0 - 45.0) * 100.0) / 100.0;
    t.target_yaw_deg = std::round((unit(rng) * 140.0 - 70.0) * 100.0) / 100.0;
    t.start = std::size_t(k) * trial_len;
    t.length = trial_len;
    double intensity;
    if (t.gesture == 0) {
      intensity = 1.0;
    } else if (spec.vary_evaluation_intensity) {
      static constexpr double lo[3] = {0.08, 0.25, 0.45}, hi[3] = {0.25, 0.45, 1.0};
      intensity = lo[t.intensity_level - 1] + unit(rng) * (hi[t.intensity_level - 1] - lo[t.intensity_level - 1]);
    } else {
      intensity = natural_intensity(spec, rng);
    }
    requests.push_back({t.gesture, intensity});
    run.trials.push_back(t);
  }

  // arm angles relax exponentially towards each trial's target
  double pitch = 0.0, yaw = 0.0;
  std::size_t frame = 0;
  const std::size_t frames_per_trial = trial_len / samples_per_frame;
  for (const auto& t : run.trials) {
    const double p0 = pitch, y0 = yaw;
    for (std::size_t f = 0; f < frames_per_trial && frame < frames; ++f, ++frame) {
      const double decay = std::exp(-(double(f) / run.frame_rate_hz) / 0.35);
      pitch = t.target_pitch_deg + (p0 - t.target_pitch_deg) * decay;
      yaw = t.target_yaw_deg + (y0 - t.target_yaw_deg) * decay;
      run.pitch_deg.push_back(std::round(pitch * 100.0) / 100.0);
      run.yaw_deg.push_back(std::round(yaw * 100.0) / 100.0);
    }
  }

  const RawSignal carrier = carrier_noise(len, derive_seed(seed, kCarrier));
  run.signal = RawSignal(kArmbandChannels, len, fs);
  const std::size_t delay = 400, ramp = 400;
  for (std::size_t k = 0; k < run.trials.size(); ++k) {
    const Request now = requests[k];
    const Request before = k == 0 ? Request{0, 1.0} : requests[k - 1];
    for (std::size_t f = 0; f < frames_per_trial; ++f) {
      const std::size_t fi = k * frames_per_trial + f;
      const double p = run.pitch_deg[fi], y = run.yaw_deg[fi];
      const Profile e_now = envelope(spec, st.templates[std::size_t(now.gesture)], now.intensity, p, y);
      const Profile e_before =
          envelope(spec, st.templates[std::size_t(before.gesture)], before.intensity, p, y);
      for (std::size_t s = 0; s < samples_per_frame; ++s) {
        const std::size_t local = f * samples_per_frame + s;
        const std::size_t t = run.trials[k].start + local;
        const double r = local < delay ? 0.0 : std::min(1.0, double(local - delay) / double(ramp));
        for (std::size_t ch = 0; ch < kArmbandChannels; ++ch) {
          const double e = (1.0 - r) * e_before[ch] + r * e_now[ch];
          run.signal.at(ch, t) = quantize(spec.amplitude * (e * carrier.at(ch, t) + st.noise * normal(rng)));
        }
      }
    }
  }
  return run;
}

}  // namespace

// --- SessionDataset -------------------------------------------------------------------

const CycleRecording& SessionDataset::cycle(int id) const {
  for (const auto& c : cycles) {
    if (c.cycle_id == id) return c;
  }
  throw DataError("session " + participant + "/" + std::to_string(session_index) +
                  ": missing cycle " + std::to_string(id));
}

void validate_session(const SessionDataset& s) {
  if (s.cycles.empty()) throw DataError("session has no cycles");
  std::set<int> ids;
  for (const auto& c : s.cycles) {
    if (!ids.insert(c.cycle_id).second) throw DataError("duplicate cycle " + std::to_string(c.cycle_id));
    if (c.signal.channels() != kArmbandChannels) {
      throw DataError("cycle " + std::to_string(c.cycle_id) + ": expected 10 channels");
    }
    if (!c.signal.all_finite()) throw DataError("cycle " + std::to_string(c.cycle_id) + ": non-finite samples");
    if (c.segments.size() != std::size_t(kNumGestures)) {
      throw DataError("cycle " + std::to_string(c.cycle_id) + ": gesture count " +
                      std::to_string(c.segments.size()));
    }
    const double expected = s.gesture_seconds * c.signal.sample_rate();
    std::set<int> gestures;
    for (const auto& seg : c.segments) {
      if (seg.gesture < 0 || seg.gesture >= kNumGestures || !gestures.insert(seg.gesture).second) {
        throw DataError("cycle " + std::to_string(c.cycle_id) + ": bad or repeated gesture id " +
                        std::to_string(seg.gesture));
      }
      if (seg.start + seg.length > c.signal.length()) {
        throw DataError("cycle " + std::to_string(c.cycle_id) + ": segment exceeds the signal");
      }
      if (std::abs(double(seg.length) - expected) > 0.02 * expected) {
        throw DataError("cycle " + std::to_string(c.cycle_id) + ": gesture " +
                        std::to_string(seg.gesture) + " lasts " + std::to_string(seg.length) +
                        " samples, expected " + fmt(expected) + " +/- 2%");
      }
    }
  }
  for (const auto& r : s.evaluation_runs) {
    if (r.signal.channels() != kArmbandChannels) throw DataError("evaluation run: expected 10 channels");
    if (r.pitch_deg.size() != r.yaw_deg.size()) throw DataError("evaluation run: angle length mismatch");
    for (const auto& t : r.trials) {
      if (t.gesture < 0 || t.gesture >= kNumGestures || t.intensity_level < 1 || t.intensity_level > 3 ||
          t.start + t.length > r.signal.length()) {
        throw DataError("evaluation run: invalid trial");
      }
    }
  }
}

// --- hashing --------------------------------------------------------------------------

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256: digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_bytes(path)); }

// --- canonical I/O -----------------------------------------------------------------------

std::string write_canonical(const std::vector<SessionDataset>& sessions, const fs::path& root) {
  fs::create_directories(root);
  for (const auto& s : sessions) {
    validate_session(s);
    const fs::path dir = root / s.participant / session_dir_name(s.session_index);
    fs::create_directories(dir);
    write_text(dir / "session.txt", session_sidecar(s));
    for (const auto& c : s.cycles) {
      const std::string stem = "cycle_" + std::to_string(c.cycle_id);
      write_int16_interleaved(dir / (stem + ".bin"), c.signal);
      write_text(dir / (stem + ".txt"), cycle_sidecar(c));
    }
    for (std::size_t r = 0; r < s.evaluation_runs.size(); ++r) {
      const std::string stem = "eval_" + std::to_string(r + 1);
      write_int16_interleaved(dir / (stem + ".bin"), s.evaluation_runs[r].signal);
      write_text(dir / (stem + ".txt"), eval_sidecar(s.evaluation_runs[r]));
      write_angles(dir / (stem + "_angles.bin"), s.evaluation_runs[r]);
    }
  }
  const std::string manifest = manifest_text(root);
  write_text(root / "MANIFEST", manifest);
  return sha256_string(manifest);
}

LoadedDataset load_canonical(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError(root.string() + ": not a dataset directory");
  LoadedDataset out;
  std::string manifest;
  if (fs::exists(root / "MANIFEST")) {
    std::ifstream in(root / "MANIFEST", std::ios::binary);
    manifest.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string actual = manifest_text(root);
    if (actual != manifest) {
      throw DataError((root / "MANIFEST").string() + ": file checksums do not match the dataset");
    }
  } else {
    manifest = manifest_text(root);
  }
  out.checksum = sha256_string(manifest);

  std::vector<fs::path> participants;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) participants.push_back(e.path());
  }
  std::sort(participants.begin(), participants.end());
  for (const auto& pdir : participants) {
    std::vector<SessionDataset> sessions;
    for (const auto& e : fs::directory_iterator(pdir)) {
      if (e.is_directory() && e.path().filename().string().rfind("session_", 0) == 0) {
        sessions.push_back(load_session(e.path()));
      }
    }
    std::sort(sessions.begin(), sessions.end(),
              [](const SessionDataset& a, const SessionDataset& b) { return a.session_index < b.session_index; });
    for (std::size_t i = 1; i < sessions.size(); ++i) {
      if (sessions[i].session_index == sessions[i - 1].session_index) {
        throw DataError(pdir.string() + ": duplicate session index");
      }
    }
    for (auto& s : sessions) out.sessions.push_back(std::move(s));
  }
  if (out.sessions.empty()) throw DataError(root.string() + ": no sessions found");
  return out;
}

std::vector<SessionDataset> import_csv_tree(const fs::path& src, double gesture_seconds) {
  if (!fs::is_directory(src)) throw DataError(src.string() + ": not a directory");
  std::vector<SessionDataset> out;
  std::vector<fs::path> participants;
  for (const auto& e : fs::directory_iterator(src)) {
    if (e.is_directory()) participants.push_back(e.path());
  }
  std::sort(participants.begin(), participants.end());
  for (const auto& pdir : participants) {
    std::vector<fs::path> sdirs;
    for (const auto& e : fs::directory_iterator(pdir)) {
      if (e.is_directory() && e.path().filename().string().rfind("session_", 0) == 0) sdirs.push_back(e.path());
    }
    std::sort(sdirs.begin(), sdirs.end());
    for (const auto& sdir : sdirs) {
      SessionDataset s;
      s.participant = pdir.filename().string();
      s.session_index = std::stoi(sdir.filename().string().substr(8));
      s.gesture_seconds = gesture_seconds;
      if (fs::exists(sdir / "day_offset.txt")) {
        std::ifstream in(sdir / "day_offset.txt");
        in >> s.day_offset;
      }
      for (int id = 1; id <= 4; ++id) {
        const fs::path csv = sdir / ("cycle_" + std::to_string(id) + ".csv");
        if (!fs::exists(csv)) continue;
        std::ifstream in(csv);
        std::string line;
        std::vector<std::vector<double>> cols(kArmbandChannels);
        std::vector<int> labels;
        std::size_t row = 0;
        while (std::getline(in, line)) {
          ++row;
          if (line.empty() || !(std::isdigit(static_cast<unsigned char>(line[0])) || line[0] == '-')) continue;
          std::istringstream ls(line);
          std::string cell;
          std::vector<double> vals;
          while (std::getline(ls, cell, ',')) vals.push_back(std::stod(cell));
          if (vals.size() != kArmbandChannels + 1) {
            throw DataError(csv.string() + ": row " + std::to_string(row) + " has " +
                            std::to_string(vals.size()) + " columns, expected 11");
          }
          for (std::size_t c = 0; c < kArmbandChannels; ++c) cols[c].push_back(vals[c]);
          labels.push_back(int(vals[kArmbandChannels]));
        }
        CycleRecording c;
        c.cycle_id = id;
        std::vector<double> flat;
        for (const auto& col : cols) flat.insert(flat.end(), col.begin(), col.end());
        c.signal = RawSignal(kArmbandChannels, std::move(flat), 1000.0);
        std::size_t start = 0;
        for (std::size_t t = 1; t <= labels.size(); ++t) {
          if (t == labels.size() || labels[t] != labels[start]) {
            c.segments.push_back({labels[start], start, t - start});
            start = t;
          }
        }
        s.cycles.push_back(std::move(c));
      }
      try {
        validate_session(s);
      } catch (const DataError& e) {
        throw DataError(sdir.string() + ": " + e.what());
      }
      out.push_back(std::move(s));
    }
  }
  if (out.empty()) throw DataError(src.string() + ": no sessions found");
  return out;
}

// --- synthesis ------------------------------------------------------------------------

void SynthSpec::validate() const {
  auto require = [](bool ok, const char* field, const char* what) {
    if (!ok) throw UsageError(std::string("synth spec: '") + field + "' " + what);
  };
  require(num_participants >= 1, "num_participants", "must be at least 1");
  require(num_sessions >= 1, "num_sessions", "must be at least 1");
  require(cycles >= 1 && cycles <= 4, "cycles", "must lie in 1..4");
  require(gesture_seconds >= 0.2, "gesture_seconds", "must be at least 0.2");
  require(eval_runs_per_session >= 0, "eval_runs_per_session", "must be non-negative");
  require(eval_trials >= 1, "eval_trials", "must be at least 1");
  require(eval_trial_seconds >= 0.2, "eval_trial_seconds", "must be at least 0.2");
  const std::pair<const char*, double> rates[] = {
      {"days_between_sessions", days_between_sessions},
      {"amplitude", amplitude},
      {"drift_per_day", drift_per_day},
      {"session_jitter", session_jitter},
      {"gain_drift_per_day", gain_drift_per_day},
      {"shift_sd_channels", shift_sd_channels},
      {"natural_intensity_sd", natural_intensity_sd},
      {"noise_level", noise_level},
      {"noise_growth_per_day", noise_growth_per_day},
      {"position_gain", position_gain},
      {"yaw_depression_shift", yaw_depression_shift}};
  for (const auto& [name, v] : rates) require(std::isfinite(v) && v >= 0.0, name, "must be finite and non-negative");
  require(amplitude > 0.0, "amplitude", "must be positive");
  require(natural_intensity_mean > 0.0 && natural_intensity_mean <= 1.0, "natural_intensity_mean",
          "must lie in (0, 1]");
  require(session_shifts.empty() || session_shifts.size() == std::size_t(num_sessions), "session_shifts",
          "must list one shift per session");
  for (double s : session_shifts) require(std::isfinite(s), "session_shifts", "must be finite");
  if (!templates.empty()) {
    require(templates.size() == std::size_t(kNumGestures), "templates", "must have 11 rows");
    for (const auto& row : templates) {
      require(row.size() == kArmbandChannels, "templates", "rows must have 10 channels");
      double sum = 0.0;
      for (double v : row) {
        require(std::isfinite(v) && v >= 0.0, "templates", "values must be finite and non-negative");
        sum += v;
      }
      require(sum > 0.0, "templates", "contains a degenerate all-zero template");
    }
  }
}

Profile rotate_channels(const Profile& v, double offset) {
  const double n = double(kArmbandChannels);
  Profile out{};
  for (std::size_t c = 0; c < kArmbandChannels; ++c) {
    // out[c] = v[c - offset], interpolated on the ring
    double src = std::fmod(double(c) - offset, n);
    if (src < 0) src += n;
    const std::size_t i0 = std::size_t(std::floor(src)) % kArmbandChannels;
    const std::size_t i1 = (i0 + 1) % kArmbandChannels;
    const double frac = src - std::floor(src);
    out[c] = (1.0 - frac) * v[i0] + frac * v[i1];
  }
  return out;
}

Profile position_modulation(const SynthSpec& spec, double pitch_deg, double yaw_deg) {
  const double pi = std::numbers::pi;
  const double p = pitch_deg * pi / 180.0, y = yaw_deg * pi / 180.0;
  const double effort = 0.5 * (std::abs(pitch_deg) / 45.0 + std::abs(yaw_deg) / 70.0);
  Profile g{};
  for (std::size_t c = 0; c < kArmbandChannels; ++c) {
    const double phase = 2.0 * pi * double(c) / double(kArmbandChannels);
    g[c] = 1.0 + spec.position_gain *
                     (effort + 0.5 * std::sin(p) * std::cos(phase) + 0.5 * std::sin(y) * std::sin(phase));
    g[c] = std::max(g[c], 0.05);
  }
  return g;
}

std::vector<Profile> participant_templates(const SynthSpec& spec, int participant) {
  std::vector<Profile> out(kNumGestures);
  if (!spec.templates.empty()) {
    for (int g = 0; g < kNumGestures; ++g) {
      std::copy(spec.templates[std::size_t(g)].begin(), spec.templates[std::size_t(g)].end(), out[std::size_t(g)].begin());
    }
    return out;
  }
  kernel::Rng rng(derive_seed(spec.seed, kTemplates, std::uint64_t(participant)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double n = double(kArmbandChannels), width = 0.9;
  out[0].fill(0.08);
  for (int g = 1; g < kNumGestures; ++g) {
    const double center = double(g - 1) + (unit(rng) - 0.5) * 0.6;
    const double center2 = center + 3.0 + 4.0 * unit(rng);
    const double amp2 = 0.3 + 0.4 * unit(rng);
    for (std::size_t c = 0; c < kArmbandChannels; ++c) {
      const double d1 = circular_distance(double(c), center, n);
      const double d2 = circular_distance(double(c), center2, n);
      out[std::size_t(g)][c] = 0.05 + std::exp(-d1 * d1 / (2 * width * width)) +
                               amp2 * std::exp(-d2 * d2 / (2 * width * width));
    }
  }
  return out;
}

std::vector<SessionDataset> synthesize(const SynthSpec& spec) {
  spec.validate();
  std::vector<SessionDataset> out;
  for (int p = 0; p < spec.num_participants; ++p) {
    const std::vector<Profile> base = participant_templates(spec, p);
    kernel::Rng drift_rng(derive_seed(spec.seed, kDrift, std::uint64_t(p)));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Profile> direction(kNumGestures);
    for (auto& row : direction) {
      for (double& v : row) v = normal(drift_rng);
    }
    for (int s = 1; s <= spec.num_sessions; ++s) {
      kernel::Rng session_rng(derive_seed(spec.seed, kSession, std::uint64_t(p), std::uint64_t(s)));
      SessionState st;
      st.day = double(s - 1) * spec.days_between_sessions;
      st.noise = spec.noise_level * (1.0 + spec.noise_growth_per_day * st.day);
      double shift = 0.0;
      if (!spec.session_shifts.empty()) {
        shift = spec.session_shifts[std::size_t(s - 1)];
      } else if (s > 1) {
        shift = normal(session_rng) * spec.shift_sd_channels;
      }
      const double gain = 1.0 + spec.gain_drift_per_day * st.day;
      for (int g = 0; g < kNumGestures; ++g) {
        Profile t = rotate_channels(base[std::size_t(g)], shift);
        for (std::size_t c = 0; c < kArmbandChannels; ++c) {
          const double perturb = spec.drift_per_day * st.day * direction[std::size_t(g)][c] +
                                 spec.session_jitter * normal(session_rng);
          t[c] = std::max(0.01, t[c] * (1.0 + perturb)) * gain;
        }
        st.templates.push_back(t);
      }

      SessionDataset ds;
      ds.participant = participant_name(p);
      ds.session_index = s;
      ds.day_offset = st.day;
      ds.gesture_seconds = spec.gesture_seconds;
      for (int c = 1; c <= spec.cycles; ++c) {
        ds.cycles.push_back(synth_cycle(
            spec, st, c, derive_seed(spec.seed, kCycle, std::uint64_t(p) << 8 | std::uint64_t(s), std::uint64_t(c))));
      }
      for (int r = 0; r < spec.eval_runs_per_session; ++r) {
        ds.evaluation_runs.push_back(synth_evaluation(
            spec, st, derive_seed(spec.seed, kEvaluation, std::uint64_t(p) << 8 | std::uint64_t(s), std::uint64_t(r))));
      }
      out.push_back(std::move(ds));
    }
  }
  return out;
}

// --- windows ------------------------------------------------------------------------------

void WindowSet::push(std::span<const float> values, int label, const WindowContext& ctx) {
  if (values.size() != window_size()) throw UsageError("window set: window shape mismatch");
  samples.insert(samples.end(), values.begin(), values.end());
  labels.push_back(label);
  context.push_back(ctx);
}

void WindowSet::append(const WindowSet& other) {
  if (other.empty()) return;
  if (empty()) {
    channels = other.channels;
    length = other.length;
  } else if (other.channels != channels || other.length != length) {
    throw UsageError("window set: cannot append windows of a different shape");
  }
  samples.insert(samples.end(), other.samples.begin(), other.samples.end());
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  context.insert(context.end(), other.context.begin(), other.context.end());
}

WindowSet WindowSet::subset(std::span<const std::size_t> indices) const {
  WindowSet out;
  out.channels = channels;
  out.length = length;
  out.samples.reserve(indices.size() * window_size());
  for (std::size_t i : indices) out.push(window(i), labels.at(i), context.at(i));
  return out;
}

namespace {

void add_windows(WindowSet& dst, const RawSignal& filtered, std::size_t seg_start, std::size_t seg_len,
                 const PreprocessSpec& spec, int label, WindowContext ctx, const EvaluationRun* run) {
  const double rate = filtered.sample_rate();
  const std::size_t w = spec.window.window_samples(rate), stride = spec.window.stride_samples(rate);
  dst.channels = filtered.channels();
  dst.length = w;
  std::vector<float> buf(filtered.channels() * w);
  for (const WindowBounds& b : segment_windows(seg_len, w, stride)) {
    for (std::size_t c = 0; c < filtered.channels(); ++c) {
      const auto ch = filtered.channel(c);
      for (std::size_t t = 0; t < w; ++t) buf[c * w + t] = float(ch[seg_start + b.start + t]);
    }
    ctx.time_since_cue_s = double(b.start) / rate;
    if (run && !run->pitch_deg.empty()) {
      const std::size_t end = seg_start + b.start + w - 1;
      const std::size_t frame = std::min(run->pitch_deg.size() - 1,
                                         std::size_t(double(end) * run->frame_rate_hz / rate));
      ctx.pitch_deg = run->pitch_deg[frame];
      ctx.yaw_deg = run->yaw_deg[frame];
    }
    dst.push(buf, label, ctx);
  }
}

}  // namespace

SessionWindows preprocess_session(const SessionDataset& session, const PreprocessSpec& spec) {
  SessionWindows out;
  out.participant = session.participant;
  out.session_index = session.session_index;
  out.day_offset = session.day_offset;
  const std::size_t w = spec.window.window_samples(1000.0);
  for (WindowSet* set : {&out.train, &out.test, &out.max_intensity, &out.evaluation}) set->length = w;

  for (const auto& cycle : session.cycles) {
    FilterSpec f = spec.filter;
    f.sample_rate_hz = cycle.signal.sample_rate();
    const RawSignal filtered = filter_causal(cycle.signal, design_bandpass(f));
    WindowSet* dst = cycle.cycle_id == 2 ? &out.max_intensity : cycle.cycle_id == 4 ? &out.test : &out.train;
    for (const auto& seg : cycle.segments) {
      WindowContext ctx;
      ctx.cycle = cycle.cycle_id;
      add_windows(*dst, filtered, seg.start, seg.length, spec, seg.gesture, ctx, nullptr);
    }
  }
  for (std::size_t r = 0; r < session.evaluation_runs.size(); ++r) {
    const EvaluationRun& run = session.evaluation_runs[r];
    FilterSpec f = spec.filter;
    f.sample_rate_hz = run.signal.sample_rate();
    const RawSignal filtered = filter_causal(run.signal, design_bandpass(f));
    for (std::size_t k = 0; k < run.trials.size(); ++k) {
      const EvaluationTrial& t = run.trials[k];
      WindowContext ctx;
      ctx.cycle = 0;
      ctx.run = int(r);
      ctx.trial = int(k);
      ctx.requested_level = t.intensity_level;
      add_windows(out.evaluation, filtered, t.start, t.length, spec, t.gesture, ctx, &run);
    }
  }
  return out;
}

IntensityReference intensity_reference(const SessionWindows& first_session) {
  IntensityReference ref;
  std::array<std::size_t, kNumGestures> counts{};
  const WindowSet& w = first_session.max_intensity;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const int g = w.labels[i];
    ref.max_mav[std::size_t(g)] += scalar_mav(w.window(i), w.channels);
    ++counts[std::size_t(g)];
  }
  for (int g = 0; g < kNumGestures; ++g) {
    if (counts[std::size_t(g)] == 0) {
      throw DataError("intensity reference: no cycle-2 windows for gesture " + std::to_string(g));
    }
    ref.max_mav[std::size_t(g)] /= double(counts[std::size_t(g)]);
  }
  return ref;
}

double intensity_ratio(std::span<const float> window, std::size_t channels,
                       const IntensityReference& reference, int gesture) {
  if (gesture < 0 || gesture >= kNumGestures) throw UsageError("intensity ratio: bad gesture");
  const double ref = reference.max_mav[std::size_t(gesture)];
  if (!(ref > 0.0)) throw UsageError("intensity ratio: reference MAV must be positive");
  return scalar_mav(window, channels) / ref;
}

int label_intensity_level(double ratio) {
  if (ratio < 0.25) return 1;
  if (ratio <= 0.45) return 2;
  return 3;
}

void annotate_intensity(WindowSet& windows, const IntensityReference& reference) {
  for (std::size_t i = 0; i < windows.size(); ++i) {
    windows.context[i].intensity_ratio =
        intensity_ratio(windows.window(i), windows.channels, reference, windows.labels[i]);
  }
}

}  // namespace emgtl
