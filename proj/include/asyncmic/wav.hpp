#pragma once

#include "asyncmic/signal.hpp"

#include <filesystem>

namespace asyncmic::wav {

enum class SampleFormat { pcm16, float32 };

// RIFF/WAVE with PCM 16-bit or IEEE float 32-bit samples, any channel count
// and rate (WAVE_FORMAT_EXTENSIBLE accepted). Throws SchemaError on anything else.
signal::AudioClip read_wav(const std::filesystem::path& path);

void write_wav(const std::filesystem::path& path, const signal::AudioClip& clip,
               SampleFormat format = SampleFormat::pcm16);

}  // namespace asyncmic::wav
