#include "beamlab/csv.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <sstream>

#include "beamlab/errors.hpp"

namespace beamlab {

std::string format_number(double x, int precision) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (x == 0) return "0";  // no "-0"
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", precision, x);
    return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::string& title, const RunConfig& cfg,
                     const std::vector<std::pair<std::string, std::string>>& columns)
    : path_(path), out_(path), precision_(cfg.integer("output", "precision")), ncols_(columns.size()) {
    if (!out_) throw ConfigError("cannot write " + path);
    out_ << "# beamlab " << title << "\n";
    if (cfg.text("output", "timestamp") == "on") {
        const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        out_ << "# generated " << buf << "\n";
    }
    out_ << "# config:\n";
    std::istringstream echo(cfg.echo());
    for (std::string line; std::getline(echo, line);) out_ << "#   " << line << "\n";
    out_ << "# columns:\n";
    for (const auto& [name, doc] : columns) out_ << "#   " << name << ": " << doc << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i].first;
    out_ << "\n";
}

void CsvWriter::row(const std::vector<CsvCell>& cells) {
    if (cells.size() != ncols_) throw PreconditionError("CSV row width does not match the columns of " + path_);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out_ << ",";
        if (const auto* d = std::get_if<double>(&cells[i]))
            out_ << format_number(*d, precision_);
        else if (const auto* l = std::get_if<long>(&cells[i]))
            out_ << *l;
        else
            out_ << std::get<std::string>(cells[i]);
    }
    out_ << "\n";
    out_.flush();
}

}  // namespace beamlab
