#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mtlseg/config.hpp"
#include "mtlseg/common.hpp"

using namespace mtlseg;

TEST_CASE("config parses sections, keys and comments") {
    Config c = Config::from_string(
        "# comment\n; also a comment\n[data]\nsize = 64\nn = 10\n\n[train]\nlr = 0.0025\n"
        "augment = true\ntasks = S+B+R\nwidths = 8, 16 ,32\nratios = 0.5,0.25,0.25\n");

    CHECK(c.has("data", "size"));
    CHECK(!c.has("data", "lr"));
    CHECK(c.get_int("data", "size", 0) == 64);
    CHECK(c.get_int("data", "missing", 7) == 7);
    CHECK(c.get_real("train", "lr", 0.0) == doctest::Approx(0.0025));
    CHECK(c.get_bool("train", "augment", false) == true);
    CHECK(c.get_string("train", "tasks", "") == "S+B+R");
    CHECK(c.get_int_list("train", "widths", {}) == std::vector<int>{8, 16, 32});
    CHECK(c.get_real_list("train", "ratios", {}) ==
          std::vector<double>{0.5, 0.25, 0.25});
    CHECK(c.get_u64("data", "n", 0) == 10);
}

TEST_CASE("config accepts the documented bool spellings") {
    Config c = Config::from_string(
        "[s]\na = true\nb = 1\nc = yes\nd = on\ne = false\nf = 0\ng = no\nh = off\n");
    for (const char* k : {"a", "b", "c", "d"}) CHECK(c.get_bool("s", k, false));
    for (const char* k : {"e", "f", "g", "h"}) CHECK(!c.get_bool("s", k, true));
    Config bad = Config::from_string("[s]\nx = maybe\n");
    CHECK_THROWS_AS(bad.get_bool("s", "x", false), ConfigError);
}

TEST_CASE("config rejects malformed input") {
    CHECK_THROWS_AS(Config::from_string("[unclosed\nkey = 1\n"), ConfigError);
    CHECK_THROWS_AS(Config::from_string("key = 1\n"), ConfigError);  // key before section
    CHECK_THROWS_AS(Config::from_string("[s]\n= 1\n"), ConfigError);
    CHECK_THROWS_AS(Config::from_string("[s]\nnovalue\n"), ConfigError);
    CHECK_THROWS_AS(Config::from_string("[s]\nk = 1\nk = 2\n"), ConfigError);  // duplicate

    // errors carry the origin and line number
    try {
        Config::from_string("[s]\nbroken\n", "my.cfg");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("my.cfg") != std::string::npos);
        CHECK(msg.find("2") != std::string::npos);
    }
}

TEST_CASE("typed getters validate their values") {
    Config c = Config::from_string("[s]\nn = 12x\nr = 1.5.2\nlist = 1,,2\nempty =\n");
    CHECK_THROWS_AS(c.get_int("s", "n", 0), ConfigError);
    CHECK_THROWS_AS(c.get_real("s", "r", 0.0), ConfigError);
    CHECK_THROWS_AS(c.get_int_list("s", "list", {}), ConfigError);
    CHECK_THROWS_AS(c.get_int("s", "empty", 0), ConfigError);
}

TEST_CASE("check_allowed flags unknown sections and keys") {
    Config c = Config::from_string("[data]\nsize = 4\n[typo]\nx = 1\n");
    const std::map<std::string, std::set<std::string>> allowed = {{"data", {"size", "n"}}};
    CHECK_THROWS_AS(c.check_allowed(allowed), ConfigError);

    Config ok = Config::from_string("[data]\nsize = 4\n");
    CHECK_NOTHROW(ok.check_allowed(allowed));

    Config bad_key = Config::from_string("[data]\nsiez = 4\n");
    try {
        bad_key.check_allowed(allowed);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("siez") != std::string::npos);
    }
}

TEST_CASE("config reads files and reports missing ones") {
    namespace fs = std::filesystem;
    const fs::path p = fs::temp_directory_path() / "cfg_file_test.cfg";
    {
        std::ofstream f(p);
        f << "[s]\nk = 3\n";
    }
    Config c = Config::from_file(p.string());
    CHECK(c.get_int("s", "k", 0) == 3);
    fs::remove(p);
    // An unreadable config path is a configuration problem, not an I/O fault
    // of the tool itself.
    CHECK_THROWS_AS(Config::from_file(p.string()), ConfigError);
}
