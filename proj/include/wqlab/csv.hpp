#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace wqlab {

/// Shortest decimal that round-trips; identical on every platform.
std::string format_double(double x);

/// Minimal CSV row writer. Fields are written verbatim except that strings
/// containing separators or quotes are quoted.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  CsvWriter& field(std::string_view s);
  CsvWriter& field(double x);
  CsvWriter& field(std::int64_t x);
  CsvWriter& field(std::uint64_t x);
  CsvWriter& field(int x) { return field(static_cast<std::int64_t>(x)); }
  void end_row();
  void header(const std::vector<std::string>& names);

 private:
  void sep();
  std::ostream& out_;
  bool first_ = true;
};

}  // namespace wqlab
