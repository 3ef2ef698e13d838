#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "siv1/model.hpp"
#include "siv1/photophys.hpp"

namespace YAML {
class Node;
}

namespace siv1::config {

/// Number from text; accepts plain literals and a single quotient such as "1/11.4".
double parse_number(const std::string& text);

/**
 * @brief Structured run configuration read from YAML.
 *
 * Keys are addressed by dotted paths ("rates.gamma1"). Every key is checked
 * against a fixed schema; problems() lists all unknown keys and malformed
 * values at once.
 */
class Config {
public:
    Config();
    ~Config();
    Config(const Config&);
    Config& operator=(const Config&);

    /// IoError when the file cannot be read, ConfigError when it is not valid YAML.
    static Config from_file(const std::string& path);
    static Config from_string(const std::string& text);

    /// "path.to.key=value"; the key must exist in the schema.
    void apply_override(const std::string& assignment);

    std::vector<std::string> problems() const;
    /// Throws ConfigError carrying every problem.
    void validate() const;

    bool has(const std::string& path) const;
    bool empty() const;
    double number(const std::string& path, double fallback) const;
    int integer(const std::string& path, int fallback) const;
    std::uint64_t unsigned_integer(const std::string& path, std::uint64_t fallback) const;
    std::string string(const std::string& path, const std::string& fallback) const;
    bool boolean(const std::string& path, bool fallback) const;
    /// A list of numbers, or a map {start, stop, count} / {start, stop, step}.
    std::vector<double> numbers(const std::string& path, const std::vector<double>& fallback = {}) const;
    std::vector<std::string> strings(const std::string& path) const;

    /// Canonical YAML text of the whole tree.
    std::string dump() const;

    RateSet rates() const;
    SixLevelParams six_level() const;
    FieldCalibration field() const;
    MaterialParams material() const;
    photophys::DeriveOptions derive_options() const;

private:
    std::unique_ptr<YAML::Node> root_;
};

/// Dotted keys accepted by the schema (range sub-keys excluded).
const std::vector<std::string>& known_keys();

}  // namespace siv1::config
