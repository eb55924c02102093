#pragma once

#include <stdexcept>
#include <string>

namespace pimrt {

// Bad arguments, malformed input files, structurally unsuitable indexes.
class usage_error : public std::invalid_argument {
 public:
  explicit usage_error(const std::string& what) : std::invalid_argument(what) {}
};

// A coordinate or derived value does not fit the 32-bit scaled domain.
class value_range_error : public std::out_of_range {
 public:
  explicit value_range_error(const std::string& what) : std::out_of_range(what) {}
};

// A tree that cannot be laid out in fixed-capacity records.
class serialization_error : public std::runtime_error {
 public:
  explicit serialization_error(const std::string& what) : std::runtime_error(what) {}
};

// MRAM or WRAM budget exceeded on a simulated DPU.
class capacity_error : public std::runtime_error {
 public:
  explicit capacity_error(const std::string& what) : std::runtime_error(what) {}
};

// A device kernel hit an execution limit (stack bound, malformed layout).
class kernel_error : public std::runtime_error {
 public:
  explicit kernel_error(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem failures: unreadable inputs, unwritable outputs.
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pimrt
