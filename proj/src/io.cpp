#include "siv1/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "siv1/errors.hpp"

namespace siv1::io {

namespace {

using Json = nlohmann::ordered_json;

Json number_json(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_field(const std::string& text, std::size_t line_no) {
    const std::string t = trim(text);
    if (t == "nan" || t == "NaN") return std::nan("");
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size())
        throw IoError("line " + std::to_string(line_no) + ": '" + text + "' is not a number");
    return v;
}

Json records_json(const std::vector<FileRecord>& records) {
    Json arr = Json::array();
    for (const auto& r : records) arr.push_back({{"path", r.path}, {"checksum", r.checksum}});
    return arr;
}

}  // namespace

void Table::add_row(std::vector<double> row) {
    if (row.size() != columns.size()) throw DomainError("row width does not match the column count");
    rows.push_back(std::move(row));
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string format_csv(const Table& t) {
    std::string out;
    for (const auto& [k, v] : t.meta) out += "# " + k + ": " + v + "\n";
    out += "# units:";
    for (std::size_t i = 0; i < t.columns.size(); ++i)
        out += (i ? ", " : " ") + t.columns[i].name + " [" + (t.columns[i].unit.empty() ? "1" : t.columns[i].unit) + "]";
    out += "\n";
    for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i].name;
    out += "\n";
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_number(row[i]);
        out += "\n";
    }
    return out;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("error while reading '" + path + "'");
    return ss.str();
}

void write_text(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    std::error_code ec;
    const fs::path target(path);
    if (target.has_parent_path()) {
        fs::create_directories(target.parent_path(), ec);
        if (ec) throw IoError("cannot create directory '" + target.parent_path().string() + "': " + ec.message());
    }
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + path + "'");
        out << content;
        out.flush();
        if (!out) throw IoError("error while writing '" + path + "'");
    }
    fs::rename(tmp, target, ec);
    if (ec) throw IoError("cannot move '" + tmp + "' into place: " + ec.message());
}

std::optional<std::string> CsvData::meta(const std::string& key) const {
    const std::string prefix = key + ":";
    for (const auto& c : comments)
        if (c.rfind(prefix, 0) == 0) return trim(c.substr(prefix.size()));
    return std::nullopt;
}

std::size_t CsvData::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw IoError("column '" + name + "' not found");
}

std::vector<double> CsvData::values(std::size_t c) const {
    if (c >= header.size()) throw IoError("column index out of range");
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[c]);
    return out;
}

CsvData parse_csv(const std::string& text) {
    CsvData csv;
    std::stringstream ss(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            csv.comments.push_back(trim(t.substr(1)));
            continue;
        }
        auto fields = split_fields(t);
        if (csv.header.empty()) {
            for (const auto& f : fields)
                if (f.empty()) throw IoError("line " + std::to_string(line_no) + ": empty column name");
            csv.header = std::move(fields);
            continue;
        }
        if (fields.size() != csv.header.size())
            throw IoError("line " + std::to_string(line_no) + ": expected " + std::to_string(csv.header.size()) +
                          " fields, found " + std::to_string(fields.size()));
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& f : fields) row.push_back(parse_field(f, line_no));
        csv.rows.push_back(std::move(row));
    }
    if (csv.header.empty()) throw IoError("CSV has no header row");
    if (csv.rows.empty()) throw IoError("CSV has no data rows");
    return csv;
}

CsvData read_csv(const std::string& path) {
    try {
        return parse_csv(read_text(path));
    } catch (const IoError& e) {
        throw IoError(path + ": " + e.what());
    }
}

inference::Dataset dataset_from_csv(const CsvData& csv, const std::string& x_column,
                                    const std::string& y_column, const std::string& sigma_column) {
    const auto pick = [&](const std::string& name, const std::string& fallback_name,
                          std::size_t fallback_index) -> std::optional<std::size_t> {
        if (!name.empty()) return csv.column(name);
        for (std::size_t i = 0; i < csv.header.size(); ++i)
            if (csv.header[i] == fallback_name) return i;
        if (fallback_index < csv.header.size()) return fallback_index;
        return std::nullopt;
    };
    const auto xi = pick(x_column, "x", 0);
    const auto yi = pick(y_column, "y", 1);
    if (!xi || !yi) throw IoError("dataset needs at least two columns");
    std::optional<std::size_t> si;
    if (!sigma_column.empty()) {
        si = csv.column(sigma_column);
    } else {
        for (std::size_t i = 0; i < csv.header.size(); ++i)
            if (csv.header[i] == "sigma") si = i;
    }
    inference::Dataset d;
    d.x = csv.values(*xi);
    d.y = csv.values(*yi);
    if (si) d.sigma = csv.values(*si);
    return d;
}

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string checksum_hex(std::string_view bytes) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
    return buf;
}

std::string fit_result_json(const FitResult& r, const std::string& kind) {
    Json j;
    j["kind"] = kind;
    Json params = Json::array();
    for (const auto& p : r.parameters) {
        params.push_back({{"name", p.name},
                          {"unit", p.unit},
                          {"value", number_json(p.value)},
                          {"uncertainty", number_json(p.uncertainty)},
                          {"ci_low", number_json(p.ci_low)},
                          {"ci_high", number_json(p.ci_high)}});
    }
    j["parameters"] = params;
    j["objective"] = number_json(r.objective);
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["seed"] = r.seed ? Json(*r.seed) : Json(nullptr);
    j["warnings"] = r.warnings;
    return j.dump(2) + "\n";
}

std::string derived_json(const photophys::DerivedQuantities& d) {
    Json j;
    Json entries = Json::array();
    for (const auto& e : d.entries)
        entries.push_back({{"name", e.name}, {"value", number_json(e.value)}, {"unit", e.unit}, {"formula", e.formula}});
    j["quantities"] = entries;
    j["flags"] = d.flags;
    return j.dump(2) + "\n";
}

std::string populations_json(const std::vector<std::pair<std::string, LevelPopulations>>& states) {
    Json j;
    for (const auto& [label, p] : states) {
        Json m;
        const auto names = level_names(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) m[names[i]] = number_json(p[i]);
        j[label] = m;
    }
    return j.dump(2) + "\n";
}

std::string Manifest::to_json() const {
    Json j;
    j["tool"] = "siv1";
    j["version"] = version;
    j["command"] = command;
    j["mode"] = mode;
    j["seed"] = seed ? Json(*seed) : Json(nullptr);
    j["config"] = config_text;
    j["config_checksum"] = checksum_hex(config_text);
    j["overrides"] = overrides;
    j["inputs"] = records_json(inputs);
    j["outputs"] = records_json(outputs);
    j["status"] = status;
    j["exit_code"] = exit_code;
    j["error"] = error.empty() ? Json(nullptr) : Json(error);
    return j.dump(2) + "\n";
}

}  // namespace siv1::io
