#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <limits>

#include <nlohmann/json.hpp>

#include "siv1/config.hpp"
#include "siv1/errors.hpp"
#include "siv1/io.hpp"

using namespace siv1;
using siv1::config::Config;
using Catch::Approx;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("siv1_test_config_" + name)).string();
}

}  // namespace

TEST_CASE("numbers accept quotients", "[config]") {
    CHECK(config::parse_number("2.5") == 2.5);
    CHECK(config::parse_number("1/11.4") == Approx(1.0 / 11.4).epsilon(1e-15));
    CHECK(config::parse_number(" 3e-2 / 4 ") == Approx(0.0075));
    CHECK_THROWS_AS(config::parse_number("1/0"), ConfigError);
    CHECK_THROWS_AS(config::parse_number("abc"), ConfigError);
    CHECK_THROWS_AS(config::parse_number("1/2/3"), ConfigError);
    CHECK_THROWS_AS(config::parse_number(""), ConfigError);
}

TEST_CASE("typed sections mirror the model types", "[config]") {
    const Config c = Config::from_string(R"(
rates:
  gamma_r: 1/21.44
  Gamma_nr: 0.0645
  gamma1: 1/11.4
  gamma2: 1/20.5
  gamma3: 1/240
  gamma4: 1/240
  radiative_split_known: true
six_level:
  lambda_mix: 2.0
field:
  P_sat_sil: 300
material:
  refractive_index: 2.55
derive:
  wavelength_nm: 861
)");
    REQUIRE(c.problems().empty());
    const RateSet r = c.rates();
    CHECK(r.gamma_r() == Approx(1.0 / 21.44));
    CHECK(r.Gamma_nr() == 0.0645);
    CHECK(r.gamma2() == Approx(1.0 / 20.5));
    CHECK(r.radiative_split_known());
    CHECK(c.six_level().lambda_mix == 2.0);
    CHECK(c.six_level().rates == r);
    CHECK(c.field().P_sat_sil == 300.0);
    CHECK(c.field().P_sat_bulk == FieldCalibration{}.P_sat_bulk);
    CHECK(c.material().refractive_index == 2.55);
    CHECK(c.derive_options().wavelength_nm == 861.0);
    CHECK_FALSE(c.derive_options().E_local_override);
}

TEST_CASE("presets supply the reference rates", "[config]") {
    CHECK(Config::from_string("rates: {preset: depletion}").rates() == depletion_reference_rates());
    CHECK(Config{}.rates() == pulse_train_reference_rates());
    const Config mixed = Config::from_string("rates: {preset: depletion, gamma1: 0.1}");
    CHECK(mixed.rates().gamma1() == 0.1);
    CHECK(mixed.rates().gamma2() == depletion_reference_rates().gamma2());
    CHECK_FALSE(Config::from_string("rates: {preset: other}").problems().empty());
}

TEST_CASE("every problem is reported at once", "[config]") {
    const Config c = Config::from_string(R"(
rates:
  gamma1: fast
  gamm2: 0.1
materal:
  dwf: 0.08
field:
  E_bulk: [1, 2]
)");
    const auto problems = c.problems();
    CHECK(problems.size() == 4);
    try {
        c.validate();
        FAIL("validate accepted an invalid config");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("rates.gamma1") != std::string::npos);
        CHECK(msg.find("rates.gamm2: unknown key") != std::string::npos);
        CHECK(msg.find("materal: unknown key") != std::string::npos);
        CHECK(msg.find("field.E_bulk") != std::string::npos);
    }
}

TEST_CASE("physical validation runs after the schema check", "[config]") {
    const Config c = Config::from_string("rates: {gamma1: -1}\nmaterial: {epsilon: 0}");
    CHECK(c.problems().size() == 2);
    CHECK_FALSE(Config::from_string("field: {E_local: -3}").problems().empty());
}

TEST_CASE("lists and ranges", "[config]") {
    const Config c = Config::from_string(R"(
two_pulse:
  P_e: [0.2, 1/2.5, 0.6]
  delays: {start: 65, stop: 995, step: 30}
rabi:
  energies: {start: 0, stop: 1, count: 5}
depletion:
  taus: {start: 0, stop: 10}
)");
    CHECK(c.numbers("two_pulse.P_e") == std::vector<double>{0.2, 0.4, 0.6});
    const auto delays = c.numbers("two_pulse.delays");
    REQUIRE(delays.size() == 32);
    CHECK(delays.front() == 65.0);
    CHECK(delays.back() == Approx(995.0));
    CHECK(c.numbers("rabi.energies") == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
    CHECK(c.numbers("lifetime.missing", {1.0}) == std::vector<double>{1.0});
    const auto problems = c.problems();
    REQUIRE(problems.size() == 1);
    CHECK(problems.front().find("depletion.taus") != std::string::npos);
}

TEST_CASE("overrides must name known keys", "[config]") {
    Config c = Config::from_string("rates: {gamma1: 0.1}");
    c.apply_override("rates.gamma1=1/11.4");
    c.apply_override("pulse_train.P_e=0.5");
    c.apply_override("two_pulse.P_e=[0.1, 0.3]");
    CHECK(c.rates().gamma1() == Approx(1.0 / 11.4));
    CHECK(c.number("pulse_train.P_e", 0.0) == 0.5);
    CHECK(c.numbers("two_pulse.P_e") == std::vector<double>{0.1, 0.3});
    CHECK_THROWS_AS(c.apply_override("rates.gamma9=1"), ConfigError);
    CHECK_THROWS_AS(c.apply_override("no_equals_sign"), ConfigError);
    CHECK(c.problems().empty());
}

TEST_CASE("copies are independent", "[config]") {
    const Config a = Config::from_string("rates: {gamma1: 0.1}");
    Config b = a;
    b.apply_override("rates.gamma1=0.2");
    CHECK(a.rates().gamma1() == 0.1);
    CHECK(b.rates().gamma1() == 0.2);
    CHECK(a.number("rates.gamma1", 0) == 0.1);
    CHECK(a.number("rates.gamma1", 0) == 0.1);
}

TEST_CASE("malformed and missing configs", "[config]") {
    CHECK_THROWS_AS(Config::from_string("rates: [unclosed"), ConfigError);
    CHECK_THROWS_AS(Config::from_string("- just\n- a list"), ConfigError);
    CHECK_THROWS_AS(Config::from_file("/nonexistent/siv1.yaml"), IoError);
    CHECK(Config::from_string("").empty());
    CHECK(Config::from_string("# only a comment\n").empty());
    const Config c = Config::from_string("seed: 12\nthreads: 2.5\nlifetime: {transition: A2}");
    CHECK(c.unsigned_integer("seed", 0) == 12);
    CHECK_THROWS_AS(c.integer("threads", 0), ConfigError);
    CHECK(c.string("lifetime.transition", "") == "A2");
    CHECK_THROWS_AS(c.string("lifetime", ""), ConfigError);
}

TEST_CASE("dump round-trips", "[config]") {
    const Config c = Config::from_string("rates: {gamma1: 1/11.4, preset: depletion}\nseed: 4");
    const Config back = Config::from_string(c.dump());
    CHECK(back.rates() == c.rates());
    CHECK(back.dump() == c.dump());
}

TEST_CASE("CSV tables carry units and round-trip", "[io]") {
    io::Table t;
    t.meta = {{"protocol", "test"}, {"excitation_probability", "0.4"}};
    t.columns = {{"x", "ns"}, {"y", ""}, {"sigma", ""}};
    t.add_row({0.0, 1.0, 0.1});
    t.add_row({1.5, 1.0 / 3.0, 0.05});
    CHECK_THROWS_AS(t.add_row({1.0}), DomainError);
    const std::string text = io::format_csv(t);
    CHECK(text.rfind("# protocol: test\n# excitation_probability: 0.4\n# units: x [ns], y [1], sigma [1]\nx,y,sigma\n", 0) == 0);

    const auto csv = io::parse_csv(text);
    CHECK(csv.header == std::vector<std::string>{"x", "y", "sigma"});
    CHECK(csv.meta("excitation_probability") == "0.4");
    CHECK_FALSE(csv.meta("power_uw"));
    const auto d = io::dataset_from_csv(csv);
    CHECK(d.x == std::vector<double>{0.0, 1.5});
    CHECK(d.y[1] == Approx(1.0 / 3.0).epsilon(1e-11));
    REQUIRE(d.sigma);
    CHECK((*d.sigma)[1] == 0.05);
}

TEST_CASE("dataset columns by name", "[io]") {
    const auto csv = io::parse_csv("time_ns,population_g1,counts\n0,0.5,10\n1,0.4,7\n");
    const auto d = io::dataset_from_csv(csv, "time_ns", "counts");
    CHECK(d.y == std::vector<double>{10.0, 7.0});
    CHECK_FALSE(d.sigma);
    const auto positional = io::dataset_from_csv(csv);
    CHECK(positional.y == std::vector<double>{0.5, 0.4});
    CHECK_THROWS_AS(io::dataset_from_csv(csv, "t"), IoError);
}

TEST_CASE("malformed CSV is an I/O error", "[io]") {
    CHECK_THROWS_AS(io::parse_csv(""), IoError);
    CHECK_THROWS_AS(io::parse_csv("# comment only\n"), IoError);
    CHECK_THROWS_AS(io::parse_csv("x,y\n"), IoError);
    CHECK_THROWS_AS(io::parse_csv("x,y\n1,2,3\n"), IoError);
    CHECK_THROWS_AS(io::parse_csv("x,y\n1,two\n"), IoError);
    CHECK_THROWS_AS(io::read_csv("/nonexistent/data.csv"), IoError);
}

TEST_CASE("numbers format deterministically", "[io]") {
    CHECK(io::format_number(0.1) == "0.1");
    CHECK(io::format_number(1.0 / 3.0) == "0.333333333333");
    CHECK(io::format_number(std::nan("")) == "nan");
    CHECK(io::format_number(-std::numeric_limits<double>::infinity()) == "-inf");
}

TEST_CASE("FNV-1a reference values", "[io]") {
    // Published 64-bit FNV-1a test vectors.
    CHECK(io::fnv1a("") == 0xcbf29ce484222325ull);
    CHECK(io::fnv1a("a") == 0xaf63dc4c8601ec8cull);
    CHECK(io::fnv1a("foobar") == 0x85944171f73967e8ull);
    CHECK(io::checksum_hex("a") == "fnv1a64:af63dc4c8601ec8c");
}

TEST_CASE("fit report JSON maps non-finite numbers to null", "[io]") {
    FitResult r;
    r.parameters.push_back({"tau", "ns", std::nan(""), std::numeric_limits<double>::infinity(), 1.0, 2.0});
    r.objective = 3.5;
    r.iterations = 7;
    r.seed = 42;
    r.warnings = {"tau unidentifiable"};
    const auto j = nlohmann::json::parse(io::fit_result_json(r, "exponential"));
    CHECK(j["kind"] == "exponential");
    CHECK(j["parameters"][0]["name"] == "tau");
    CHECK(j["parameters"][0]["value"].is_null());
    CHECK(j["parameters"][0]["uncertainty"].is_null());
    CHECK(j["parameters"][0]["ci_high"] == 2.0);
    CHECK(j["seed"] == 42);
    CHECK(j["warnings"][0] == "tau unidentifiable");
}

TEST_CASE("manifest records status and checksums", "[io]") {
    io::Manifest m;
    m.command = "simulate";
    m.mode = "lifetime";
    m.seed = 9;
    m.config_text = "rates: {}";
    m.outputs.push_back({"lifetime.csv", io::checksum_hex("abc")});
    m.status = "failed";
    m.error = "config error: bad";
    m.exit_code = 2;
    const std::string text = m.to_json();
    CHECK(text == m.to_json());
    const auto j = nlohmann::json::parse(text);
    CHECK(j["version"] == io::version);
    CHECK(j["config_checksum"] == io::checksum_hex("rates: {}"));
    CHECK(j["outputs"][0]["checksum"] == io::checksum_hex("abc"));
    CHECK(j["exit_code"] == 2);
    CHECK(j["error"] == "config error: bad");
    for (const auto& [key, value] : j.items()) CHECK(key.find("time") == std::string::npos);
}

TEST_CASE("files are written whole and read back", "[io]") {
    const std::string dir = temp_path("dir");
    std::filesystem::remove_all(dir);
    const std::string path = dir + "/nested/out.txt";
    io::write_text(path, "first");
    io::write_text(path, "second");
    CHECK(io::read_text(path) == "second");
    CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("populations JSON uses level names", "[io]") {
    const auto j = nlohmann::json::parse(
        io::populations_json({{"saturating", LevelPopulations::pure(level::d)}}));
    CHECK(j["saturating"]["d"] == 1.0);
    CHECK(j["saturating"]["g1"] == 0.0);
}
