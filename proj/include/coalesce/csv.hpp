#pragma once

#include <cstdio>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace coalesce {

/// Shortest-stable text for a double: 17 significant digits.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Minimal CSV emitter: a header row, then rows of preformatted cells.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::initializer_list<std::string_view> header) : out_(out) {
    bool first = true;
    for (auto h : header) {
      if (!first) out_ << ',';
      out_ << h;
      first = false;
    }
    out_ << '\n';
    columns_ = header.size();
  }

  CsvWriter(std::ostream& out, const std::vector<std::string>& header) : out_(out) {
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
    columns_ = header.size();
  }

  CsvWriter& cell(double x) { return raw(format_double(x)); }
  CsvWriter& cell(std::size_t x) { return raw(std::to_string(x)); }
  CsvWriter& cell(int x) { return raw(std::to_string(x)); }
  CsvWriter& cell(std::string_view s) { return raw(std::string(s)); }

  void end_row() {
    out_ << '\n';
    in_row_ = 0;
  }

  std::size_t columns() const noexcept { return columns_; }

 private:
  CsvWriter& raw(const std::string& text) {
    if (in_row_++ > 0) out_ << ',';
    out_ << text;
    return *this;
  }

  std::ostream& out_;
  std::size_t columns_ = 0;
  std::size_t in_row_ = 0;
};

}  // namespace coalesce
