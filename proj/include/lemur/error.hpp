#pragma once

#include <stdexcept>
#include <string>

namespace lemur {

// Base of every error raised by the library. The CLI maps each subclass to
// its own exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Bad magic, unsupported version or dtype.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Header is readable but the payload disagrees with it.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

class EmptyCorpusError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class TrainingDivergenceError : public NumericalError {
 public:
  TrainingDivergenceError(std::size_t epoch, std::size_t step, const std::string& what)
      : NumericalError(what), epoch_(epoch), step_(step) {}

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t epoch_;
  std::size_t step_;
};

}  // namespace lemur
