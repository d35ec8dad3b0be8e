#include <doctest.h>

#include <stdexcept>

#include "apnea/config.hpp"

using namespace apnea;

TEST_CASE("config parses sections, scalars and arrays") {
    const char* text =
        "# pipeline defaults\n"
        "jobs = 4\n"
        "[filter]\n"
        "band = [8.0, 12.0]  # Hz\n"
        "order = 100\n"
        "[features]\n"
        "feature_set = \"rs\"\n"
        "[train]\n"
        "lr = 0.01\n"
        "deterministic = true\n";
    TomlConfig cfg = TomlConfig::parse(text);
    CHECK(cfg.get_int("jobs") == 4);
    auto band = cfg.get_double_array("filter.band");
    REQUIRE(band.has_value());
    REQUIRE(band->size() == 2);
    CHECK((*band)[0] == 8.0);
    CHECK((*band)[1] == 12.0);
    CHECK(cfg.get_int("filter.order") == 100);
    CHECK(cfg.get_string("features.feature_set") == "rs");
    CHECK(cfg.get_double("train.lr") == 0.01);
    CHECK(cfg.get_bool("train.deterministic") == true);
    CHECK_FALSE(cfg.has("train.missing"));
    CHECK_FALSE(cfg.get_int("nope").has_value());
}

TEST_CASE("config rejects malformed input") {
    CHECK_THROWS_AS(TomlConfig::parse("[unterminated\nx = 1\n"), std::runtime_error);
    CHECK_THROWS_AS(TomlConfig::parse("just a line\n"), std::runtime_error);
    CHECK_THROWS_AS(TomlConfig::parse("= 3\n"), std::runtime_error);
    TomlConfig cfg = TomlConfig::parse("x = abc\n");
    CHECK_THROWS_AS(cfg.get_int("x"), std::runtime_error);
    CHECK_THROWS_AS(cfg.get_bool("x"), std::runtime_error);
}

TEST_CASE("quoted strings keep embedded hashes") {
    TomlConfig cfg = TomlConfig::parse("name = \"a#b\"\n");
    CHECK(cfg.get_string("name") == "a#b");
}
