// Copyright 2026 The pcflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pcflow {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrix or network shapes do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A layer width of zero, too few layers, or a similar malformed topology.
class InvalidDimensionError : public Error {
 public:
  using Error::Error;
};

/// A precondition on a scalar argument failed (negative step, zero scale, ...).
class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

/// Integration produced non-finite activities.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// A theory routine was asked about a network that is not deep linear.
class NotLinearError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint file could not be read or written.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

// IDX parsing. Each malformed-input class has its own type so callers and
// tests can tell them apart.
class IdxError : public Error {
 public:
  using Error::Error;
};
class IdxIoError : public IdxError {
 public:
  using IdxError::IdxError;
};
class IdxMagicError : public IdxError {
 public:
  using IdxError::IdxError;
};
class IdxTruncatedError : public IdxError {
 public:
  using IdxError::IdxError;
};
class IdxTrailingDataError : public IdxError {
 public:
  using IdxError::IdxError;
};
class IdxCountMismatchError : public IdxError {
 public:
  using IdxError::IdxError;
};
class IdxLabelError : public IdxError {
 public:
  using IdxError::IdxError;
};
class IdxDimensionError : public IdxError {
 public:
  using IdxError::IdxError;
};

/// Malformed CSV input; `line()` is 1-based.
class CsvParseError : public Error {
 public:
  CsvParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace pcflow
