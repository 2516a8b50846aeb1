// semiasr/util.hpp
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace semiasr {

/// 64-bit FNV-1a. Stable across platforms; used for config hashes and seed derivation.
std::uint64_t fnv1a64(std::string_view data);

/// Derives an independent sub-seed from a master seed and a stage tag.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag);

/// Splits on single spaces, dropping empty fields.
std::vector<std::string> split_words(std::string_view text);
std::string join_words(const std::vector<std::string>& words);
/// Collapses runs of spaces and trims both ends.
std::string normalize_spaces(std::string_view text);

std::string hex64(std::uint64_t v);

/// Runs fn(0..n-1) on up to `threads` workers (1 = inline). Results must not
/// depend on scheduling. The exception of the lowest failing index is rethrown.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace semiasr
