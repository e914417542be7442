#pragma once

// JSON output with all floats at 17 significant digits (round-trip exact),
// plus thin wrappers around nlohmann::json for parsing.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace invplan {

using json = nlohmann::json;

inline std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return std::string(buf);
}

// Streaming writer; keys/values must be emitted in document order.
class JsonWriter {
public:
  std::string str() const { return out_; }

  JsonWriter& begin_object() {
    sep();
    out_ += '{';
    fresh_.push_back(true);
    return *this;
  }
  JsonWriter& end_object() {
    out_ += '}';
    fresh_.pop_back();
    return *this;
  }
  JsonWriter& begin_array() {
    sep();
    out_ += '[';
    fresh_.push_back(true);
    return *this;
  }
  JsonWriter& end_array() {
    out_ += ']';
    fresh_.pop_back();
    return *this;
  }
  JsonWriter& key(const std::string& k) {
    sep();
    quote(k);
    out_ += ':';
    pending_value_ = true;
    return *this;
  }
  JsonWriter& value(double x) {
    sep();
    out_ += fmt_double(x);
    return *this;
  }
  JsonWriter& value(long long x) {
    sep();
    out_ += std::to_string(x);
    return *this;
  }
  JsonWriter& value(int x) { return value(static_cast<long long>(x)); }
  JsonWriter& value(std::size_t x) { return value(static_cast<long long>(x)); }
  JsonWriter& value(bool b) {
    sep();
    out_ += b ? "true" : "false";
    return *this;
  }
  JsonWriter& value(const std::string& s) {
    sep();
    quote(s);
    return *this;
  }
  JsonWriter& value(const char* s) { return value(std::string(s)); }
  JsonWriter& null() {
    sep();
    out_ += "null";
    return *this;
  }
  JsonWriter& value(const std::vector<double>& v) {
    begin_array();
    for (double x : v) value(x);
    return end_array();
  }
  // splice pre-serialized JSON as a value
  JsonWriter& raw(const std::string& text) {
    sep();
    out_ += text;
    return *this;
  }

private:
  void sep() {
    if (pending_value_) {
      pending_value_ = false;
      return;
    }
    if (!fresh_.empty()) {
      if (!fresh_.back())
        out_ += ',';
      else
        fresh_.back() = false;
    }
  }
  void quote(const std::string& s) {
    out_ += '"';
    for (char c : s) {
      switch (c) {
        case '"': out_ += "\\\""; break;
        case '\\': out_ += "\\\\"; break;
        case '\n': out_ += "\\n"; break;
        case '\t': out_ += "\\t"; break;
        default: out_ += c;
      }
    }
    out_ += '"';
  }

  std::string out_;
  std::vector<bool> fresh_;
  bool pending_value_ = false;
};

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline json parse_json_file(const std::string& path) {
  return json::parse(read_text_file(path));
}

} // namespace invplan
