#include "consol/jsonl.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "consol/error.hpp"

namespace consol {

namespace fs = std::filesystem;

namespace {

void atomic_write(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, fmt::format("cannot write {}", tmp.string()));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::kIo, fmt::format("short write to {}", tmp.string()));
  }
  fs::rename(tmp, path);
}

}  // namespace

void write_records(const fs::path& path, std::string_view schema,
                   const std::vector<json>& records) {
  std::string out;
  out += json{{"schema", schema}, {"version", kSchemaVersion}}.dump();
  out += '\n';
  for (const auto& rec : records) {
    out += rec.dump();
    out += '\n';
  }
  atomic_write(path, out);
}

std::vector<json> read_records(const fs::path& path, std::string_view schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, fmt::format("cannot open {}", path.string()));
  std::vector<json> records;
  std::string line;
  std::size_t line_no = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    json value = json::parse(line, nullptr, false);
    if (value.is_discarded() || !value.is_object()) {
      throw Error(ErrorKind::kSchema,
                  fmt::format("{}:{}: line is not a JSON object", path.string(), line_no));
    }
    if (!seen_header) {
      if (!value.contains("schema") || !value["schema"].is_string() ||
          value["schema"].get<std::string>() != schema) {
        throw Error(ErrorKind::kSchema,
                    fmt::format("{}:{}: field 'schema': expected header for '{}'",
                                path.string(), line_no, schema));
      }
      if (!value.contains("version") || value["version"] != kSchemaVersion) {
        throw Error(ErrorKind::kSchema,
                    fmt::format("{}:{}: field 'version': unsupported schema version",
                                path.string(), line_no));
      }
      seen_header = true;
      continue;
    }
    records.push_back(std::move(value));
  }
  if (!seen_header) {
    throw Error(ErrorKind::kSchema,
                fmt::format("{}: field 'schema': missing header record", path.string()));
  }
  return records;
}

void write_json_file(const fs::path& path, const json& value) {
  atomic_write(path, value.dump(2) + "\n");
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, fmt::format("cannot open {}", path.string()));
  json value = json::parse(in, nullptr, false);
  if (value.is_discarded()) {
    throw Error(ErrorKind::kSchema, fmt::format("{}: not valid JSON", path.string()));
  }
  return value;
}

void write_text_file(const fs::path& path, std::string_view text) { atomic_write(path, text); }

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, fmt::format("cannot open {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string require_string(const json& obj, std::string_view field, std::string_view where) {
  auto it = obj.find(field);
  if (it == obj.end() || !it->is_string()) {
    throw Error(ErrorKind::kSchema,
                fmt::format("{}: field '{}': expected string", where, field));
  }
  return it->get<std::string>();
}

long require_int(const json& obj, std::string_view field, std::string_view where) {
  auto it = obj.find(field);
  if (it == obj.end() || !it->is_number_integer()) {
    throw Error(ErrorKind::kSchema,
                fmt::format("{}: field '{}': expected integer", where, field));
  }
  return it->get<long>();
}

double require_number(const json& obj, std::string_view field, std::string_view where) {
  auto it = obj.find(field);
  if (it == obj.end() || !it->is_number()) {
    throw Error(ErrorKind::kSchema,
                fmt::format("{}: field '{}': expected number", where, field));
  }
  return it->get<double>();
}

const json& require_array(const json& obj, std::string_view field, std::string_view where) {
  auto it = obj.find(field);
  if (it == obj.end() || !it->is_array()) {
    throw Error(ErrorKind::kSchema,
                fmt::format("{}: field '{}': expected array", where, field));
  }
  return *it;
}

}  // namespace consol
