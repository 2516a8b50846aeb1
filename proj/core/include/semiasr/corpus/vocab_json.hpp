// semiasr/corpus/vocab_json.hpp
#pragma once

#include "semiasr/corpus/vocab.hpp"
#include "semiasr/json_util.hpp"

namespace semiasr::corpus {

Json to_json(const Vocabulary& vocab);
Vocabulary vocabulary_from_json(const Json& j, const std::string& path = "vocab");

}  // namespace semiasr::corpus
