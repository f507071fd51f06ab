// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dbae {

/// Argument outside the domain of a time function (e.g. t < 0 or t > T).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Evaluation too close to a point where the bridge variance vanishes.
class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Caller broke an API precondition (missing rng, non-scalar loss, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MagicMismatchError : public DataError {
 public:
  using DataError::DataError;
};

class TruncationError : public DataError {
 public:
  TruncationError(const std::string& what, std::uint64_t expected, std::uint64_t actual)
      : DataError(what + ": expected " + std::to_string(expected) + " bytes, got " +
                  std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}
  std::uint64_t expected() const { return expected_; }
  std::uint64_t actual() const { return actual_; }

 private:
  std::uint64_t expected_;
  std::uint64_t actual_;
};

class RaggedCsvError : public DataError {
 public:
  using DataError::DataError;
};

class VersionMismatchError : public DataError {
 public:
  using DataError::DataError;
};

class ManifestError : public DataError {
 public:
  using DataError::DataError;
};

/// A latent dimension with zero spread cannot be normalized.
class DegenerateLatentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN/Inf produced during training or sampling.
class NumericFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dbae
