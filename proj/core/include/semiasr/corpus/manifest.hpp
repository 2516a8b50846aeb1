// semiasr/corpus/manifest.hpp
//
// Corpus manifest: JSON lines, one object per utterance:
//   {"id": "...", "audio": "<path or base64:...>", "text": "...", "split": "labeled",
//    "origin": "gold", "reference": "..."}
// "text", "origin" and "reference" are optional. Inline audio is "base64:" followed
// by base64 of little-endian PCM16 samples; anything else is a WAV path relative to
// the manifest's directory.
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "semiasr/corpus/utterance.hpp"

namespace semiasr::corpus {

struct ManifestOptions {
  bool inline_audio = true;
  /// WAV directory relative to the manifest when audio is not inlined.
  std::string audio_subdir = "wav";
};

void write_manifest(const std::filesystem::path& path, const Corpus& corpus, const ManifestOptions& options = {});
Corpus read_manifest(const std::filesystem::path& path);

/// PCM16 mono WAV at 16 kHz.
void write_wav(const std::filesystem::path& path, std::span<const float> samples);
std::vector<float> read_wav(const std::filesystem::path& path);

std::string base64_encode(std::span<const unsigned char> bytes);
std::vector<unsigned char> base64_decode(std::string_view text);

}  // namespace semiasr::corpus
