#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace skf {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A hyperparameter or argument is outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced or consumed.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Caller broke a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class InputTooShortError : public Error {
 public:
  InputTooShortError(std::size_t got, std::size_t minimum)
      : Error("input too short: " + std::to_string(got) +
              " frames, minimum is " + std::to_string(minimum)),
        got_(got),
        minimum_(minimum) {}

  std::size_t got() const noexcept { return got_; }
  std::size_t minimum() const noexcept { return minimum_; }

 private:
  std::size_t got_;
  std::size_t minimum_;
};

// CTC target cannot be aligned to the available frames.
class InfeasibleAlignmentError : public Error {
 public:
  InfeasibleAlignmentError(std::size_t frames, std::size_t required)
      : Error("infeasible CTC alignment: " + std::to_string(frames) +
              " frames, target needs at least " + std::to_string(required)),
        frames_(frames),
        required_(required) {}

  std::size_t frames() const noexcept { return frames_; }
  std::size_t required() const noexcept { return required_; }

 private:
  std::size_t frames_;
  std::size_t required_;
};

// Malformed binary file; offset is the byte position where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace skf
