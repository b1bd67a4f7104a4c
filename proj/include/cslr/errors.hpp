/* Copyright 2026 The CSLR Toolkit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cslr {

// Base class for every error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor dimensions do not line up for the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A configuration value is out of its legal range or a key is unknown.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data violates a documented invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// An operation was called in a way its contract forbids.
class UsageError : public Error {
 public:
  using Error::Error;
};

// A file does not match its on-disk format. Carries the byte offset at
// which parsing failed when that is known.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(what), offset_(-1) {}
  ParseError(const std::string& what, std::int64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::int64_t offset() const { return offset_; }

 private:
  std::int64_t offset_;
};

// A CTC target cannot be aligned within the available frames. Distinct from
// numeric failure so training code can tell data bugs from hard examples.
class InfeasibleTargetError : public Error {
 public:
  using Error::Error;
};

// A pipeline artifact is missing or does not match its recorded provenance.
class ProvenanceError : public Error {
 public:
  using Error::Error;
};

}  // namespace cslr
