#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace deepfilter {

/// Invalid model, network or experiment configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Caller violated an API precondition (wrong shapes, stale tape, ...).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A computation produced a singular or non-finite quantity.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The relative-error normalizer vanished.
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Non-finite training loss with early stopping disabled.
class TrainingDivergedError : public std::runtime_error {
 public:
  TrainingDivergedError(std::size_t epoch, std::size_t batch, const std::string& context)
      : std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch) + (context.empty() ? "" : " (" + context + ")")),
        epoch_(epoch),
        batch_(batch) {}

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

/// Base for failures while reading persisted weights or datasets.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VersionMismatchError : public LoadError {
 public:
  using LoadError::LoadError;
};

class ChecksumError : public LoadError {
 public:
  using LoadError::LoadError;
};

class ShapeError : public LoadError {
 public:
  using LoadError::LoadError;
};

/// A cached artifact was produced by an incompatible format version.
class StaleCacheError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace deepfilter
