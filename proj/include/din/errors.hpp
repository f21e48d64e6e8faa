#pragma once

#include <stdexcept>
#include <string>

namespace din {

// Contract violations (bad shapes, bad arguments) -> std::invalid_argument.
// The more specific types below map onto the CLI exit-code classes.

struct io_error : std::runtime_error {
  explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct checkpoint_error : std::runtime_error {
  explicit checkpoint_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct nonfinite_error : std::runtime_error {
  explicit nonfinite_error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace din
