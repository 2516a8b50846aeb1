// semiasr/ctc/ctc.hpp
//
// Emission matrices are [T, V+1] log-probabilities; column 0 is the blank and
// column i (i >= 1) is vocabulary token i - 1.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "semiasr/corpus/vocab.hpp"
#include "semiasr/error.hpp"
#include "semiasr/nn/graph.hpp"

namespace semiasr::ctc {

inline constexpr int kBlank = 0;

class InfeasibleTargetError : public Error {
 public:
  InfeasibleTargetError(std::size_t frames, std::size_t required)
      : Error("ctc: target needs at least " + std::to_string(required) + " frames, emissions have " +
              std::to_string(frames)),
        frames_(frames),
        required_(required) {}
  std::size_t frames() const { return frames_; }
  std::size_t required_frames() const { return required_; }

 private:
  std::size_t frames_;
  std::size_t required_;
};

/// |target| plus the number of adjacent repeated labels.
std::size_t required_frames(const std::vector<int>& target);

/// Vocabulary ids -> emission columns (id + 1), and back.
std::vector<int> to_columns(const std::vector<int>& ids);
std::vector<int> to_ids(const std::vector<int>& columns);

/// Negative log-likelihood of `target` (emission columns, no blanks). When
/// `grad` is given it receives d loss / d log_probs, which is minus the
/// posterior occupancy of each (frame, column).
double ctc_loss_value(const nn::Tensor& log_probs, const std::vector<int>& target, nn::Tensor* grad = nullptr);

/// Graph op over [T, V+1] log-probabilities; returns a [1, 1] loss.
nn::Var ctc_loss(nn::Var log_probs, const std::vector<int>& target);

/// Best-path decode: per-frame argmax, collapse repeats, drop blanks. Returns columns.
std::vector<int> ctc_greedy_decode(const nn::Tensor& log_probs);
std::string ctc_greedy_text(const nn::Tensor& log_probs, const corpus::Vocabulary& vocab);

/// Throws ShapeError unless every row log-sum-exps to 0 within `tolerance`.
void validate_emissions(const nn::Tensor& log_probs, double tolerance = 1e-6);

/// Binary layout: u32 T, u32 V, then T*V little-endian float32 values, row-major.
void write_emissions(const std::filesystem::path& path, const nn::Tensor& log_probs);
nn::Tensor read_emissions(const std::filesystem::path& path);

}  // namespace semiasr::ctc
