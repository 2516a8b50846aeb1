// corpus/manifest.cpp
#include "semiasr/corpus/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

#include "semiasr/error.hpp"

namespace semiasr::corpus {

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::int16_t to_pcm(float v) {
  const double s = std::round(static_cast<double>(v) * 32768.0);
  return static_cast<std::int16_t>(std::clamp(s, -32768.0, 32767.0));
}

std::vector<unsigned char> pcm_bytes(std::span<const float> samples) {
  std::vector<unsigned char> out(samples.size() * 2);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto v = static_cast<std::uint16_t>(to_pcm(samples[i]));
    out[2 * i] = static_cast<unsigned char>(v & 0xff);
    out[2 * i + 1] = static_cast<unsigned char>(v >> 8);
  }
  return out;
}

std::vector<float> pcm_samples(std::span<const unsigned char> bytes) {
  if (bytes.size() % 2) throw IoError("PCM16 payload has an odd byte count");
  std::vector<float> out(bytes.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto v = static_cast<std::int16_t>(static_cast<std::uint16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8)));
    out[i] = static_cast<float>(v) / 32768.0f;
  }
  return out;
}

template <typename T>
void put_le(std::ostream& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.put(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(std::istream& in) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = in.get();
    if (c == EOF) throw IoError("WAV: unexpected end of file");
    v |= static_cast<std::uint64_t>(c & 0xff) << (8 * i);
  }
  return static_cast<T>(v);
}

}  // namespace

std::string base64_encode(std::span<const unsigned char> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += kAlphabet[n & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const std::uint32_t n = bytes[i] << 16;
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<unsigned char> base64_decode(std::string_view text) {
  auto value = [](char c) -> int {
    const char* p = std::strchr(kAlphabet, c);
    return (c != '\0' && p) ? static_cast<int>(p - kAlphabet) : -1;
  };
  std::vector<unsigned char> out;
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=') break;
    const int v = value(c);
    if (v < 0) throw IoError("base64: invalid character");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<unsigned char>((acc >> bits) & 0xff));
    }
  }
  return out;
}

void write_wav(const std::filesystem::path& path, std::span<const float> samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write WAV '" + path.string() + "'");
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.write("RIFF", 4);
  put_le<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  put_le<std::uint32_t>(out, 16);
  put_le<std::uint16_t>(out, 1);  // PCM
  put_le<std::uint16_t>(out, 1);  // mono
  put_le<std::uint32_t>(out, kSampleRate);
  put_le<std::uint32_t>(out, kSampleRate * 2);
  put_le<std::uint16_t>(out, 2);
  put_le<std::uint16_t>(out, 16);
  out.write("data", 4);
  put_le<std::uint32_t>(out, data_bytes);
  const auto bytes = pcm_bytes(samples);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<float> read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read WAV '" + path.string() + "'");
  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "RIFF", 4) != 0) throw IoError("WAV: missing RIFF header in " + path.string());
  get_le<std::uint32_t>(in);
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "WAVE", 4) != 0) throw IoError("WAV: missing WAVE tag in " + path.string());
  bool have_fmt = false;
  while (in.read(tag, 4)) {
    const auto size = get_le<std::uint32_t>(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      const auto format = get_le<std::uint16_t>(in);
      const auto channels = get_le<std::uint16_t>(in);
      const auto rate = get_le<std::uint32_t>(in);
      get_le<std::uint32_t>(in);
      get_le<std::uint16_t>(in);
      const auto bits = get_le<std::uint16_t>(in);
      if (format != 1 || channels != 1 || rate != static_cast<std::uint32_t>(kSampleRate) || bits != 16) {
        throw IoError("WAV: " + path.string() + " is not PCM16 mono 16 kHz");
      }
      in.ignore(size - 16);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw IoError("WAV: data chunk before fmt chunk in " + path.string());
      std::vector<unsigned char> bytes(size);
      in.read(reinterpret_cast<char*>(bytes.data()), size);
      if (!in) throw IoError("WAV: truncated data chunk in " + path.string());
      return pcm_samples(bytes);
    } else {
      in.ignore(size + (size & 1));
    }
  }
  throw IoError("WAV: no data chunk in " + path.string());
}

void write_manifest(const std::filesystem::path& path, const Corpus& corpus, const ManifestOptions& options) {
  const auto dir = path.parent_path();
  if (!options.inline_audio) std::filesystem::create_directories(dir / options.audio_subdir);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
  for (const auto& u : corpus.utterances) {
    nlohmann::ordered_json j;
    j["id"] = u.id;
    if (options.inline_audio) {
      j["audio"] = "base64:" + base64_encode(pcm_bytes(u.samples));
    } else {
      const std::string rel = options.audio_subdir + "/" + u.id + ".wav";
      write_wav(dir / rel, u.samples);
      j["audio"] = rel;
    }
    if (u.transcript) j["text"] = *u.transcript;
    j["split"] = to_string(u.split);
    j["origin"] = to_string(u.origin);
    if (u.reference) j["reference"] = *u.reference;
    out << j.dump() << "\n";
  }
}

Corpus read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read manifest '" + path.string() + "'");
  Corpus corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    Utterance u;
    u.id = j.at("id").get<std::string>();
    const auto audio = j.at("audio").get<std::string>();
    if (audio.rfind("base64:", 0) == 0) {
      u.samples = pcm_samples(base64_decode(std::string_view(audio).substr(7)));
    } else {
      u.samples = read_wav(path.parent_path() / audio);
    }
    if (u.samples.empty()) throw IoError(path.string() + ":" + std::to_string(lineno) + ": empty audio for " + u.id);
    if (j.contains("text")) u.transcript = j["text"].get<std::string>();
    u.split = parse_split(j.at("split").get<std::string>());
    if (j.contains("origin")) u.origin = parse_origin(j["origin"].get<std::string>());
    if (j.contains("reference")) u.reference = j["reference"].get<std::string>();
    corpus.utterances.push_back(std::move(u));
  }
  return corpus;
}

}  // namespace semiasr::corpus
