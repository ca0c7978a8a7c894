#include "teak/csv_io.hpp"

#include "teak/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace teak {

namespace {

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            cells.push_back(line.substr(start));
            return cells;
        }
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::string where(std::size_t row, std::size_t col) {
    return "row " + std::to_string(row) + ", column " + std::to_string(col);
}

} // namespace

CsvRead parse_pulse_csv(std::string_view text, const std::string& species) {
    std::vector<std::string_view> lines;
    {
        std::size_t start = 0;
        while (start < text.size()) {
            std::size_t end = text.find('\n', start);
            if (end == std::string_view::npos) end = text.size();
            lines.push_back(text.substr(start, end - start));
            start = end + 1;
        }
    }
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    if (lines.empty()) throw SchemaError(species + ": empty CSV");

    std::string_view first = lines[0];
    if (first.size() >= 3 && static_cast<unsigned char>(first[0]) == 0xEF) first.remove_prefix(3); // UTF-8 BOM
    const auto header = split(first);
    if (header.size() < 2 || trim(header[0]) != "time")
        throw SchemaError(species + ": header must start with 'time' followed by pulse columns");
    for (std::size_t c = 1; c < header.size(); ++c) {
        if (trim(header[c]) != "pulse_" + std::to_string(c - 1))
            throw SchemaError(species + ": " + where(1, c + 1) + ": expected header 'pulse_" + std::to_string(c - 1) +
                              "', found '" + std::string(trim(header[c])) + "'");
    }
    const std::size_t ncol = header.size();
    const std::size_t npulse = ncol - 1;

    std::vector<double> time;
    std::vector<std::vector<double>> values(npulse);
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const std::size_t row = r + 1;
        const auto cells = split(lines[r]);
        if (cells.size() != ncol)
            throw SchemaError(species + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                              " cells, expected " + std::to_string(ncol));
        for (std::size_t c = 0; c < ncol; ++c) {
            const std::string_view cell = trim(cells[c]);
            if (cell.empty()) throw SchemaError(species + ": " + where(row, c + 1) + ": missing value");
            double v = 0.0;
            const char* begin = cell.data();
            const char* end = begin + cell.size();
            if (*begin == '+') ++begin;
            const auto [ptr, ec] = std::from_chars(begin, end, v);
            if (ec != std::errc() || ptr != end || !std::isfinite(v))
                throw SchemaError(species + ": " + where(row, c + 1) + ": '" + std::string(cell) + "' is not a finite number");
            if (c == 0)
                time.push_back(v);
            else
                values[c - 1].push_back(v);
        }
        if (time.size() >= 2 && !(time.back() > time[time.size() - 2]))
            throw SchemaError(species + ": row " + std::to_string(row) + ": time is not strictly increasing");
    }
    const std::size_t n = time.size();
    if (n < TimeGrid::kMinCount)
        throw SchemaError(species + ": need at least " + std::to_string(TimeGrid::kMinCount) + " samples, found " +
                          std::to_string(n));
    if (time.front() < 0.0) throw SchemaError(species + ": time must start at or after 0");

    CsvRead out;
    const double step = (time.back() - time.front()) / static_cast<double>(n - 1);
    double deviation = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        deviation = std::max(deviation, std::abs(time[i] - (time.front() + static_cast<double>(i) * step)));
    const TimeGrid grid(time.front(), step, n);
    if (deviation > 1e-6 * step) {
        out.warnings.push_back(species + ": time axis deviates from uniform by " + format_double(deviation / step) +
                               " steps; resampled linearly onto a uniform grid");
        for (auto& col : values) {
            std::vector<double> res(n);
            std::size_t j = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const double t = grid.at(i);
                while (j + 2 < n && time[j + 1] < t) ++j;
                const double w = std::clamp((t - time[j]) / (time[j + 1] - time[j]), 0.0, 1.0);
                res[i] = col[j] + w * (col[j + 1] - col[j]);
            }
            col = std::move(res);
        }
    }
    out.series.species = species;
    for (std::size_t p = 0; p < npulse; ++p)
        out.series.pulses.emplace_back(grid, std::move(values[p]), FluxUnits::volts, species, p);
    return out;
}

CsvRead read_pulse_csv(const std::filesystem::path& path, const std::string& species) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_pulse_csv(buf.str(), species);
    } catch (const SchemaError& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_pulse_csv(const std::vector<Flux>& pulses) {
    if (pulses.empty()) throw DomainError("format_pulse_csv: no pulses");
    const TimeGrid& grid = pulses.front().grid;
    for (const auto& f : pulses)
        if (!(f.grid == grid)) throw GridMismatchError("format_pulse_csv: pulses do not share a grid");
    std::string out = "time";
    for (std::size_t p = 0; p < pulses.size(); ++p) out += ",pulse_" + std::to_string(p);
    out += '\n';
    for (std::size_t i = 0; i < grid.count(); ++i) {
        out += format_double(grid.at(i));
        for (const auto& f : pulses) {
            out += ',';
            out += format_double(f.values[i]);
        }
        out += '\n';
    }
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void write_pulse_csv(const std::filesystem::path& path, const std::vector<Flux>& pulses) {
    write_text(path, format_pulse_csv(pulses));
}

} // namespace teak
