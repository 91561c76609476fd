#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include "ctiaug/error.hpp"
#include "json.hpp"

namespace ctiaug::detail {

using nlohmann::json;

/// Calls `fn(record, line_number)` for every non-blank line. Parse failures
/// and non-object lines raise ValidationError with the file and line.
inline std::size_t for_each_record(
    const std::filesystem::path& path,
    const std::function<void(const json&, std::size_t)>& fn) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::size_t records = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": malformed record (" + e.what() + ")");
    }
    if (!record.is_object())
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": record is not an object");
    fn(record, line_no);
    ++records;
  }
  return records;
}

inline std::string require_string(const json& record, const char* field,
                                  const std::filesystem::path& path,
                                  std::size_t line_no) {
  auto it = record.find(field);
  if (it == record.end() || !it->is_string())
    throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                          ": missing string field `" + field + "`");
  return it->get<std::string>();
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  return out;
}

}  // namespace ctiaug::detail
