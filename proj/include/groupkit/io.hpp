#pragma once

// Deterministic output formatting shared by the CLI: JSON with insertion-order
// keys and floats printed at 17 significant digits (byte-identical reruns,
// exact round-trips), plus a small CSV writer with the same number format.

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace groupkit::io {

// %.17g
std::string format_double(double v);

class JsonValue {
 public:
  JsonValue() = default;

  static JsonValue object();
  static JsonValue array();
  static JsonValue number(double v);
  static JsonValue integer(long long v);
  static JsonValue string(std::string s);
  static JsonValue boolean(bool b);
  static JsonValue number_array(const std::vector<double>& values);
  static JsonValue index_array(const std::vector<std::size_t>& values);

  JsonValue& set(const std::string& key, JsonValue v);  // objects only
  JsonValue& push(JsonValue v);                         // arrays only

  std::string dump(int indent = 2) const;

 private:
  enum class Type { kNull, kBool, kNumber, kInteger, kString, kArray, kObject };
  Type type_ = Type::kNull;
  bool bool_ = false;
  double number_ = 0.0;
  long long integer_ = 0;
  std::string string_;
  std::vector<JsonValue> items_;
  std::vector<std::pair<std::string, JsonValue>> members_;

  void dump_to(std::string& out, int indent, int depth) const;
};

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  void row(const std::vector<std::string>& cells);
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(int v) { return std::to_string(v); }
  const std::string& str() const { return text_; }

 private:
  std::size_t columns_ = 0;
  std::string text_;
};

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace groupkit::io
