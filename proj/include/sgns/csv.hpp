#pragma once

#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

namespace sgns {

/// Deterministic CSV output: '.' decimal separator, %.17g numbers, one header
/// row, UTF-8. Byte-stable across runs for identical inputs.
class CsvWriter {
  public:
    explicit CsvWriter(const std::string& path);

    void header(std::initializer_list<const char*> names);
    void row(std::initializer_list<double> values);
    void raw_row(const std::vector<std::string>& fields);

    static std::string format(double v);

  private:
    std::ofstream out_;
};

}  // namespace sgns
