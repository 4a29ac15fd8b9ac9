#pragma once

// Internal helpers shared by the plant and controller document readers and
// writers. Not installed.

#include "fosyn/errors.hpp"
#include "fosyn/numerics.hpp"

#include <json.hpp>

#include <cstdio>
#include <string>

namespace fosyn::detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string matrix_text(const Matrix& M) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    out += (i == 0) ? "[" : " [";
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      if (j > 0) out += ", ";
      out += format_double(M(i, j));
    }
    out += (i + 1 < M.rows()) ? "],\n         " : "]";
  }
  out += "]";
  return out;
}

inline nlohmann::json parse_document(const std::string& text, const char* who) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string(who) + ": " + e.what());
  }
}

inline Matrix matrix_from_json(const nlohmann::json& field, const std::string& key) {
  if (!field.is_array()) {
    throw ParseError("field \"" + key + "\": expected an array of rows");
  }
  const std::size_t rows = field.size();
  std::size_t cols = 0;
  if (rows > 0) {
    if (!field[0].is_array()) {
      throw ParseError("field \"" + key + "\": row 1 is not an array");
    }
    cols = field[0].size();
  }
  Matrix M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    const auto& row = field[i];
    if (!row.is_array()) {
      throw ParseError("field \"" + key + "\": row " + std::to_string(i + 1) +
                       " is not an array");
    }
    if (row.size() != cols) {
      throw ParseError("field \"" + key + "\": row " + std::to_string(i + 1) + " has " +
                       std::to_string(row.size()) + " entries, expected " + std::to_string(cols));
    }
    for (std::size_t j = 0; j < cols; ++j) {
      if (!row[j].is_number()) {
        throw ParseError("field \"" + key + "\": entry (" + std::to_string(i + 1) + "," +
                         std::to_string(j + 1) + ") is not a number");
      }
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j].get<double>();
    }
  }
  return M;
}

}  // namespace fosyn::detail
