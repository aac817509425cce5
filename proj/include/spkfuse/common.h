// Copyright (c) 2026 The spkfuse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SPKFUSE_COMMON_H_
#define SPKFUSE_COMMON_H_

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace spkfuse {

// Dense storage used throughout. Row-major so that a frame sequence (T x F)
// or a channel map (C x T) keeps each row contiguous.
template <typename Scalar>
using Matrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

// Error hierarchy. Every error the library raises derives from Error so that
// the CLI can map families of failures onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument values or shapes.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed files (bad headers, truncated records, unparsable lines).
class FormatError : public Error {
 public:
  using Error::Error;
};

class UnsupportedFormatError : public FormatError {
 public:
  using FormatError::FormatError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Request cannot be satisfied with the available data.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// API misuse with respect to object state (e.g. stale forward cache).
class StateError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

// Well-formed input with invalid content (ragged dims, NaN, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace spkfuse

#endif  // SPKFUSE_COMMON_H_
