#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "siv1/fitting.hpp"
#include "siv1/model.hpp"
#include "siv1/photophys.hpp"

namespace siv1::io {

inline constexpr const char* version = "1.0.0";

struct Column {
    std::string name;
    std::string unit;
};

/**
 * @brief Numeric table written as CSV.
 *
 * The file starts with "# key: value" comment lines followed by a "# units:"
 * line, then a header row and one line per row. Numbers use 12 significant
 * digits so output bytes depend only on the values.
 */
struct Table {
    std::vector<std::pair<std::string, std::string>> meta;
    std::vector<Column> columns;
    std::vector<std::vector<double>> rows;

    void add_row(std::vector<double> row);
};

std::string format_number(double v);
std::string format_csv(const Table& table);

/// Whole-file read; IoError on failure.
std::string read_text(const std::string& path);
/// Writes via a temporary file in the same directory; IoError on failure.
void write_text(const std::string& path, const std::string& content);

struct CsvData {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::vector<std::string> comments;

    /// Value of a "# key: value" comment line.
    std::optional<std::string> meta(const std::string& key) const;
    /// Index of the named column; IoError when absent.
    std::size_t column(const std::string& name) const;
    std::vector<double> values(std::size_t column) const;
};

/// Skips '#' lines and blank lines; the first remaining line is the header. IoError on malformed input.
CsvData parse_csv(const std::string& text);
CsvData read_csv(const std::string& path);

/**
 * @brief Dataset from named columns.
 *
 * Empty names select the defaults: "x" or the first column, "y" or the second,
 * and a column named "sigma" when present.
 */
inference::Dataset dataset_from_csv(const CsvData& csv, const std::string& x_column = "",
                                    const std::string& y_column = "", const std::string& sigma_column = "");

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);
std::string checksum_hex(std::string_view bytes);

/// {parameters: [...], objective, iterations, converged, seed, warnings}; non-finite numbers become null.
std::string fit_result_json(const FitResult& result, const std::string& kind);
/// Entries in evaluation order with unit and formula, then flags.
std::string derived_json(const photophys::DerivedQuantities& d);
/// {level: population} in canonical level order.
std::string populations_json(const std::vector<std::pair<std::string, LevelPopulations>>& states);

struct FileRecord {
    std::string path;
    std::string checksum;
};

/// Run record written next to the outputs.
struct Manifest {
    std::string command;
    std::string mode;
    std::optional<std::uint64_t> seed;
    std::string config_text;
    std::vector<std::string> overrides;
    std::vector<FileRecord> inputs;
    std::vector<FileRecord> outputs;
    std::string status = "ok";
    std::string error;
    int exit_code = 0;

    std::string to_json() const;
};

}  // namespace siv1::io
