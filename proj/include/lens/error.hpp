// Copyright 2026 The LENS Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LENS_ERROR_HPP
#define LENS_ERROR_HPP

#include <stdexcept>
#include <string>

namespace lens {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible for the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration: unknown keys, missing columns, bad presets.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data that cannot be used: malformed files, unknown clients.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint or store that does not match what the caller expects.
class CompatibilityError : public Error {
 public:
  using Error::Error;
};

/// Training aborted, e.g. on a non-finite loss.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace lens

#endif  // LENS_ERROR_HPP
