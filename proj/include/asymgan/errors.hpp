#pragma once

#include <stdexcept>
#include <string>

namespace asymgan {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing or unreadable files, unwritable output locations.
class IngestionError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented precondition (labels, manifests, probabilities).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Tensor rank, channel count or spatial size mismatch.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent architecture or discriminator specification.
class SpecError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

/// Raised by the training loop; carries the name of the loss component at fault.
class TrainingError : public Error {
 public:
  TrainingError(std::string component, const std::string& what)
      : Error(component + ": " + what), component_(std::move(component)) {}

  const std::string& component() const noexcept { return component_; }

 private:
  std::string component_;
};

}  // namespace asymgan
