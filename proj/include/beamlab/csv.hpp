#pragma once

// CSV output with a '#' header block: title, optional timestamp, the config
// echo and one line per column. Bodies are deterministic for a given config.

#include <fstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "beamlab/config.hpp"

namespace beamlab {

using CsvCell = std::variant<double, long, std::string>;

class CsvWriter {
  public:
    // columns: (name, description).
    CsvWriter(const std::string& path, const std::string& title, const RunConfig& cfg,
              const std::vector<std::pair<std::string, std::string>>& columns);
    void row(const std::vector<CsvCell>& cells);
    const std::string& path() const { return path_; }

  private:
    std::string path_;
    std::ofstream out_;
    int precision_;
    std::size_t ncols_;
};

std::string format_number(double x, int precision);

}  // namespace beamlab
