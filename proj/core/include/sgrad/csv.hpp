#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace sgrad {

// Deterministic CSV writing: doubles render with %.17g so repeat runs are
// byte-identical and values round-trip.
std::string csv_double(double v);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> columns);

  void row(const std::vector<std::string>& cells);
  const std::string& text() const { return text_; }
  void write(const std::filesystem::path& path) const;

 private:
  std::size_t columns_;
  std::string text_;
};

// Minimal reader for the files this project writes (no quoting or escapes).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
  double value(std::size_t row, const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

}  // namespace sgrad
