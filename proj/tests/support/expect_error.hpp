#pragma once

#include <optional>
#include <string>

#include <gtest/gtest.h>

#include "consol/error.hpp"

namespace consol::testing {

/// Kind of the consol::Error thrown by `f`, or nullopt when nothing is thrown.
template <typename F>
std::optional<ErrorKind> error_kind(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

template <typename F>
std::string error_message(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  ADD_FAILURE() << "expected a consol::Error";
  return {};
}

}  // namespace consol::testing
