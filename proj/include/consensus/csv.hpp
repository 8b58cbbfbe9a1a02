#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace consensus::io {

/// Shortest decimal representation that round-trips to the same double
/// (std::to_chars without a precision argument).
std::string format_double(double v);

/// Minimal CSV emitter: fixed column order, one row at a time, numbers in
/// shortest round-trip form. Writes are deterministic byte-for-byte.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  void write_row(const std::vector<std::string>& cells);
  /// Convenience: all-numeric row.
  void write_row(const std::vector<double>& values);

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t n_cols_ = 0;
};

}  // namespace consensus::io
