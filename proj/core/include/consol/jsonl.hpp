#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace consol {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Writes a newline-delimited record file: a `{"schema": name, "version": 1}`
/// header line followed by one compact JSON object per line. The file is
/// replaced atomically (temp file + rename).
void write_records(const std::filesystem::path& path, std::string_view schema,
                   const std::vector<json>& records);

/// Reads a record file written by write_records. Throws a schema error naming
/// the file and line when the header is missing, names a different schema, or
/// a line is not a JSON object.
std::vector<json> read_records(const std::filesystem::path& path, std::string_view schema);

void write_json_file(const std::filesystem::path& path, const json& value);
json read_json_file(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

// Field accessors that raise schema errors naming `where` and the field.
std::string require_string(const json& obj, std::string_view field, std::string_view where);
long require_int(const json& obj, std::string_view field, std::string_view where);
double require_number(const json& obj, std::string_view field, std::string_view where);
const json& require_array(const json& obj, std::string_view field, std::string_view where);

}  // namespace consol
