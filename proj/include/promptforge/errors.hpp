/*
 * Copyright 2026 The promptforge authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace promptforge {

/// Base class for every error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated a documented precondition (bad index, empty set, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// File or directory access failed.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Input that the operation cannot meaningfully process (e.g. empty text
/// handed to an embedder or perplexity scorer).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Configuration file is malformed or inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A model backend failed. `kind` distinguishes transient transport
/// failures (retryable) from rate limiting and malformed replies.
class OracleError : public Error {
 public:
  enum class Kind { network, rate_limit, protocol };

  OracleError(Kind kind, const std::string& message, int attempts = 1)
      : Error(message), kind_(kind), attempts_(attempts) {}

  Kind kind() const { return kind_; }
  int attempts() const { return attempts_; }
  bool retryable() const { return kind_ != Kind::protocol; }

 private:
  Kind kind_;
  int attempts_;
};

/// The prompt generator kept re-emitting prompts already present in the
/// search history.
class DuplicationError : public Error {
 public:
  using Error::Error;
};

}  // namespace promptforge
