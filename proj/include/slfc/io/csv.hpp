#pragma once

#include <cstdio>
#include <fstream>
#include <string>

#include "slfc/core/errors.hpp"

namespace slfc {

/// Fixed 9-significant-digit float formatting so CSV reruns diff clean.
inline std::string csv_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace slfc
