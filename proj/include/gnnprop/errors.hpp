// Copyright 2026 The gnnprop Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace gnnprop {

// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller-supplied value is outside its documented domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Shapes or states passed between operations do not belong together.
class ContractError : public Error {
 public:
  using Error::Error;
};

// A numerical routine failed to reach its tolerance.
class NumericError : public Error {
 public:
  using Error::Error;
};

// An input is structurally degenerate for the requested quantity
// (zero degree, zero trace, zero input row, ...).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// A file could not be parsed or failed validation. The message names the
// offending field.
class LoadError : public Error {
 public:
  using Error::Error;
};

// A theorem hypothesis required by a bound does not hold.
class HypothesisError : public Error {
 public:
  using Error::Error;
};

// Output files that cannot be created or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace gnnprop
