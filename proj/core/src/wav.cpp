#include "slowflow/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "slowflow/errors.hpp"
#include "slowflow/rng.hpp"

namespace slowflow::datagen {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
  out.push_back((v >> 16) & 0xff);
  out.push_back((v >> 24) & 0xff);
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
}

void put_tag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

void write_wav(const std::string& path, const std::vector<double>& samples,
               std::uint32_t sample_rate, bool as_float) {
  const std::uint16_t bits = as_float ? 32 : 16;
  const std::uint16_t bytes_per = bits / 8;
  const std::uint32_t data_size = static_cast<std::uint32_t>(samples.size() * bytes_per);

  std::vector<unsigned char> buf;
  buf.reserve(44 + data_size);
  put_tag(buf, "RIFF");
  put_u32(buf, 36 + data_size);
  put_tag(buf, "WAVE");
  put_tag(buf, "fmt ");
  put_u32(buf, 16);
  put_u16(buf, as_float ? 3 : 1);  // 1 = PCM, 3 = IEEE float
  put_u16(buf, 1);                 // mono
  put_u32(buf, sample_rate);
  put_u32(buf, sample_rate * bytes_per);
  put_u16(buf, bytes_per);
  put_u16(buf, bits);
  put_tag(buf, "data");
  put_u32(buf, data_size);

  for (double s : samples) {
    if (as_float) {
      const float f = static_cast<float>(s);
      unsigned char b[4];
      std::memcpy(b, &f, 4);
      buf.insert(buf.end(), b, b + 4);
    } else {
      const double clipped = std::clamp(s, -1.0, 1.0);
      const int v = static_cast<int>(std::lround(clipped * 32767.0));
      put_u16(buf, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
    }
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IngestionError("write_wav: cannot open " + path);
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!f.good()) throw IngestionError("write_wav: write failed: " + path);
}

}  // namespace

void write_wav_pcm16(const std::string& path, const std::vector<double>& samples,
                     std::uint32_t sample_rate) {
  write_wav(path, samples, sample_rate, false);
}

void write_wav_float32(const std::string& path, const std::vector<double>& samples,
                       std::uint32_t sample_rate) {
  write_wav(path, samples, sample_rate, true);
}

WavData read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IngestionError("read_wav: cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < 44 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    throw IngestionError("read_wav: not a RIFF/WAVE file: " + path);
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t data_off = 0, data_len = 0;
  bool have_fmt = false;

  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const unsigned char* hdr = buf.data() + pos;
    const std::uint32_t chunk_size = read_u32(hdr + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (body + 16 > buf.size()) throw IngestionError("read_wav: truncated fmt chunk: " + path);
      format = read_u16(buf.data() + body);
      channels = read_u16(buf.data() + body + 2);
      rate = read_u32(buf.data() + body + 4);
      bits = read_u16(buf.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data_off = body;
      data_len = std::min<std::size_t>(chunk_size, buf.size() - body);
    }
    pos = body + chunk_size + (chunk_size & 1);  // chunks are word aligned
  }

  if (!have_fmt || data_off == 0)
    throw IngestionError("read_wav: missing fmt or data chunk: " + path);
  if (channels != 1 && channels != 2)
    throw IngestionError("read_wav: only mono/stereo supported: " + path);
  const bool is_pcm16 = format == 1 && bits == 16;
  const bool is_f32 = format == 3 && bits == 32;
  if (!is_pcm16 && !is_f32)
    throw IngestionError("read_wav: unsupported encoding (need PCM16 or float32): " + path);

  const std::size_t bytes_per = bits / 8;
  const std::size_t frames = data_len / (bytes_per * channels);
  WavData wav;
  wav.sample_rate = rate;
  wav.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = buf.data() + data_off + (i * channels + c) * bytes_per;
      if (is_pcm16) {
        const std::int16_t v = static_cast<std::int16_t>(read_u16(p));
        acc += static_cast<double>(v) / 32768.0;
      } else {
        float fv;
        std::memcpy(&fv, p, 4);
        acc += static_cast<double>(fv);
      }
    }
    wav.samples[i] = acc / channels;
  }
  return wav;
}

AudioSources load_audio(const std::vector<std::string>& paths, std::size_t target_len) {
  if (paths.size() != 4) throw ContractViolation("load_audio: exactly 4 paths required");
  if (target_len < 2) throw ContractViolation("load_audio: target_len too small");

  std::vector<WavData> clips;
  for (const auto& p : paths) clips.push_back(read_wav(p));

  std::uint32_t common_rate = clips[0].sample_rate;
  for (const auto& c : clips) common_rate = std::min(common_rate, c.sample_rate);
  if (common_rate == 0) throw IngestionError("load_audio: zero sample rate");
  for (auto& c : clips) {
    if (c.sample_rate % common_rate != 0) {
      throw IngestionError("load_audio: sample rate " + std::to_string(c.sample_rate) +
                           " not an integer multiple of " + std::to_string(common_rate));
    }
    const std::uint32_t k = c.sample_rate / common_rate;
    if (k > 1) {
      std::vector<double> dec;
      dec.reserve(c.samples.size() / k + 1);
      for (std::size_t i = 0; i < c.samples.size(); i += k) dec.push_back(c.samples[i]);
      c.samples = std::move(dec);
      c.sample_rate = common_rate;
    }
  }

  AudioSources out;
  out.sources = Series(target_len, 4);
  for (std::size_t j = 0; j < 4; ++j) {
    if (clips[j].samples.size() < target_len) {
      throw IngestionError("load_audio: " + paths[j] + " too short (" +
                           std::to_string(clips[j].samples.size()) + " < " +
                           std::to_string(target_len) + " samples after decimation)");
    }
    for (std::size_t i = 0; i < target_len; ++i) out.sources(i, j) = clips[j].samples[i];
  }

  // Standardize; a silent channel cannot be.
  for (std::size_t j = 0; j < 4; ++j) {
    std::vector<double> col = column(out.sources, j);
    double m = 0.0;
    for (double v : col) m += v;
    m /= static_cast<double>(col.size());
    double s2 = 0.0;
    for (double v : col) s2 += (v - m) * (v - m);
    const double sd = std::sqrt(s2 / static_cast<double>(col.size()));
    if (sd < 1e-9) {
      throw IngestionError("load_audio: zero-variance (silent) channel from " + paths[j]);
    }
    for (std::size_t i = 0; i < target_len; ++i) out.sources(i, j) = (col[i] - m) / sd;
  }

  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = a + 1; b < 4; ++b) {
      const double r = pearson(column(out.sources, a), column(out.sources, b));
      if (std::abs(r) > 0.999) {
        out.warnings.push_back("duplicate sources: " + paths[a] + " and " + paths[b] +
                               " are nearly identical (|corr| > 0.999); independence assumption broken");
      }
    }
  }
  return out;
}

// ---- synthetic instruments ----------------------------------------------------

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

std::vector<double> synth_pluck(std::size_t n, double rate, Rng& rng) {
  static constexpr double notes[] = {220.0, 261.63, 293.66, 329.63, 392.0};
  const std::size_t note_len = static_cast<std::size_t>(rate * 0.25);
  std::vector<double> v(n);
  double freq = notes[rng.uniform_index(5)];
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t t_rel = i % note_len;
    if (t_rel == 0) freq = notes[rng.uniform_index(5)];
    const double sec = static_cast<double>(t_rel) / rate;
    const double env = std::exp(-8.0 * sec);
    double s = 0.0;
    for (int h = 1; h <= 4; ++h)
      s += std::sin(kTau * freq * h * sec) / static_cast<double>(h);
    v[i] = 0.6 * env * s;
  }
  return v;
}

std::vector<double> synth_pad(std::size_t n, double rate, Rng& rng) {
  const double base = rng.uniform(240.0, 320.0);
  const double detune = 1.008;
  const double vib_hz = 5.0, vib_depth = 0.006;
  const double lfo_hz = 0.25;
  std::vector<double> v(n);
  double phase1 = 0.0, phase2 = rng.uniform(0.0, kTau);
  for (std::size_t i = 0; i < n; ++i) {
    const double sec = static_cast<double>(i) / rate;
    const double vib = 1.0 + vib_depth * std::sin(kTau * vib_hz * sec);
    phase1 += kTau * base * vib / rate;
    phase2 += kTau * base * detune * vib / rate;
    const double amp = 0.55 + 0.45 * std::sin(kTau * lfo_hz * sec);
    v[i] = 0.5 * amp * (std::sin(phase1) + 0.7 * std::sin(phase2));
  }
  return v;
}

std::vector<double> synth_percussion(std::size_t n, double rate, Rng& rng) {
  std::vector<double> v(n, 0.0);
  std::size_t onset = static_cast<std::size_t>(rng.exponential(0.3) * rate);
  double burst_age = -1.0;
  double thump_phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i >= onset) {
      burst_age = 0.0;
      thump_phase = 0.0;
      onset = i + 1 + static_cast<std::size_t>((0.15 + rng.exponential(0.35)) * rate);
    }
    if (burst_age >= 0.0) {
      const double env = std::exp(-25.0 * burst_age);
      thump_phase += kTau * 60.0 / rate;
      v[i] = env * (0.7 * rng.normal() * 0.4 + 0.8 * std::sin(thump_phase));
      burst_age += 1.0 / rate;
    }
    v[i] += 0.002 * rng.normal();  // tiny floor keeps the channel non-silent
  }
  return v;
}

std::vector<double> synth_bass(std::size_t n, double rate, Rng& rng) {
  static constexpr double notes[] = {55.0, 65.41, 73.42, 82.41};
  const std::size_t note_len = static_cast<std::size_t>(rate * 0.5);
  std::vector<double> v(n);
  double freq = notes[rng.uniform_index(4)];
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t t_rel = i % note_len;
    if (t_rel == 0) freq = notes[rng.uniform_index(4)];
    const double sec_rel = static_cast<double>(t_rel) / rate;
    const double note_sec = static_cast<double>(note_len) / rate;
    const double attack = std::min(1.0, sec_rel / 0.02);
    const double release = std::min(1.0, (note_sec - sec_rel) / 0.05);
    phase += kTau * freq / rate;
    v[i] = 0.8 * attack * release * std::tanh(2.0 * std::sin(phase));
  }
  return v;
}

}  // namespace

Series synth_instruments(std::size_t length, std::uint32_t sample_rate, std::uint64_t seed) {
  if (length < 2) throw ContractViolation("synth_instruments: length too small");
  if (sample_rate < 2000) throw ContractViolation("synth_instruments: sample rate too low");
  const double rate = static_cast<double>(sample_rate);
  Rng r1(derive_seed(seed, 11)), r2(derive_seed(seed, 12)), r3(derive_seed(seed, 13)),
      r4(derive_seed(seed, 14));
  const std::vector<std::vector<double>> tracks = {
      synth_pluck(length, rate, r1), synth_pad(length, rate, r2),
      synth_percussion(length, rate, r3), synth_bass(length, rate, r4)};
  Series out(length, 4);
  for (std::size_t j = 0; j < 4; ++j)
    for (std::size_t i = 0; i < length; ++i) out(i, j) = tracks[j][i];
  return out;
}

}  // namespace slowflow::datagen
