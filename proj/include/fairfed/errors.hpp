//
// Copyright 2026 The FairFed Authors
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
//

#ifndef FAIRFED_ERRORS_HPP_
#define FAIRFED_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace fairfed {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A mathematical precondition (PSD, symmetry, ...) was violated.
class InvariantError : public Error {
 public:
  using Error::Error;
};

// A linear solve or factorization failed. Carries the smallest eigenvalue
// of the offending matrix so callers can tell "singular" from "indefinite".
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double min_eigenvalue)
      : Error(what + " (min eigenvalue " + std::to_string(min_eigenvalue) +
              ")"),
        min_eigenvalue_(min_eigenvalue) {}

  double min_eigenvalue() const { return min_eigenvalue_; }

 private:
  double min_eigenvalue_;
};

// Argument outside its admissible range (round index, merit exponent, ...).
class RangeError : public Error {
 public:
  using Error::Error;
};

// Inconsistent or incomplete configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A fixed-capacity structure is full.
class CapacityError : public Error {
 public:
  using Error::Error;
};

}  // namespace fairfed

#endif  // FAIRFED_ERRORS_HPP_
