#pragma once

#include <filesystem>
#include <string>

#include <unistd.h>

#include "doctest.h"

#include "hdsig/error.hpp"

namespace hdsig::test {

/// Fresh directory under the system temp dir, unique to this process and tag.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("hdsig_test_" + std::to_string(::getpid()) + "_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Error code thrown by f(); fails the test when nothing is thrown.
template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an hdsig::Error");
  return ErrorCode::InvalidArgument;
}

}  // namespace hdsig::test
