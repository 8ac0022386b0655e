#pragma once

#include <stdexcept>
#include <string>

namespace owr {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A file could not be opened, read or written.
class IoError : public Error {
public:
  using Error::Error;
};

/// Input bytes or text do not conform to the expected format.
class FormatError : public Error {
public:
  using Error::Error;
};

/// A domain precondition was violated (too few points, dimension mismatch,
/// invalid manifest, non-finite values, ...).
class DomainError : public Error {
public:
  using Error::Error;
};

/// Gradient descent diverged.
class TrainingError : public DomainError {
public:
  TrainingError(const std::string& what, std::size_t epoch, std::size_t batch)
      : DomainError(what + " (epoch " + std::to_string(epoch) + ", batch " +
                    std::to_string(batch) + ")"),
        epoch_(epoch), batch_(batch) {}

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }

private:
  std::size_t epoch_;
  std::size_t batch_;
};

}  // namespace owr
