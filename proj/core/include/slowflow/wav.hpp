#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slowflow/matrix.hpp"

namespace slowflow::datagen {

/// Mono audio buffer; stereo files are downmixed by channel averaging.
struct WavData {
  std::uint32_t sample_rate = 0;
  std::vector<double> samples;  // in [-1, 1] for integer PCM sources
};

/// RIFF/WAVE reader for 16-bit integer PCM and 32-bit IEEE float,
/// little-endian, mono or stereo. Anything else is an IngestionError.
WavData read_wav(const std::string& path);

/// 16-bit PCM writer; samples are clipped to [-1, 1].
void write_wav_pcm16(const std::string& path, const std::vector<double>& samples,
                     std::uint32_t sample_rate);

/// 32-bit IEEE float writer.
void write_wav_float32(const std::string& path, const std::vector<double>& samples,
                       std::uint32_t sample_rate);

struct AudioSources {
  Series sources;  // target_len x 4, channels standardized
  std::vector<std::string> warnings;
};

/// Loads exactly four WAV files as source channels. Sample rates must agree
/// up to integer decimation (everything decimated to the lowest rate); each
/// channel must then still hold target_len samples and have nonzero variance.
/// A duplicated source (|corr| > 0.999) produces a warning, not an error.
AudioSources load_audio(const std::vector<std::string>& paths, std::size_t target_len);

/// Fully synthetic four-instrument stand-in (additive synthesis): plucked
/// string, sustained pad with vibrato, sparse percussion, bass line. Unit-ish
/// amplitude, deterministic per seed.
Series synth_instruments(std::size_t length, std::uint32_t sample_rate, std::uint64_t seed);

}  // namespace slowflow::datagen
