/**
 * Copyright (c) GraphVeil Contributors.
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

#include <cstdint>
#include <stdexcept>
#include <string>

namespace graphveil {

enum class Errc {
  parse_error,
  shape_mismatch,
  invalid_argument,
  empty_corpus,
  disconnected,
  insufficient_pool,
  unsatisfiable,
  no_solution,
  insufficient_solutions,
  missing_item,
  interface_changed,
  io_error,
};

inline const char* errc_name(Errc e) {
  switch (e) {
  case Errc::parse_error: return "ParseError";
  case Errc::shape_mismatch: return "ShapeMismatch";
  case Errc::invalid_argument: return "InvalidArgument";
  case Errc::empty_corpus: return "EmptyCorpus";
  case Errc::disconnected: return "Disconnected";
  case Errc::insufficient_pool: return "InsufficientPool";
  case Errc::unsatisfiable: return "Unsatisfiable";
  case Errc::no_solution: return "NoSolution";
  case Errc::insufficient_solutions: return "InsufficientSolutions";
  case Errc::missing_item: return "MissingItem";
  case Errc::interface_changed: return "InterfaceChanged";
  case Errc::io_error: return "IoError";
  }
  return "Error";
}

/// Domain error carrying a machine-checkable kind plus up to two integer
/// payload fields (e.g. InsufficientPool{accepted, needed}).
class Error : public std::runtime_error {
public:
  Error(Errc kind, std::string message, int64_t a = 0, int64_t b = 0)
      : std::runtime_error(std::string(errc_name(kind)) + ": " + message),
        kind_(kind), a_(a), b_(b) {}

  Errc kind() const { return kind_; }
  int64_t a() const { return a_; }
  int64_t b() const { return b_; }

private:
  Errc kind_;
  int64_t a_;
  int64_t b_;
};

} // namespace graphveil
