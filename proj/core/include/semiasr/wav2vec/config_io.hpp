// semiasr/wav2vec/config_io.hpp
#pragma once

#include <filesystem>
#include <string>

#include "semiasr/json_util.hpp"
#include "semiasr/wav2vec/model.hpp"

namespace semiasr::wav2vec {

Json to_json(const Wav2VecConfig& config);
/// Fields absent from `j` keep their defaults. Validates the result.
Wav2VecConfig wav2vec_config_from_json(const Json& j, const std::string& path = "wav2vec");

/// Checkpoint at `path` plus its config in the sidecar `<path>.json`.
void save_model(const std::filesystem::path& path, const Wav2VecModel& model);
Wav2VecModel load_model(const std::filesystem::path& path);

}  // namespace semiasr::wav2vec
