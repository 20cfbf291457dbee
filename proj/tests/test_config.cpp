// Key-value run configuration: parsing, typed access, canonical hashing.

#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "etwin/config.hpp"
#include "support/temp_dir.hpp"

using namespace etwin;
using etwin_test::TempDir;

static const char* kSample = R"(# comment
[mesh]
path = heart.mesh
h_fine = 1.25
; another comment
[optimizer]
iterations = 400
lr = 0.75
use_early_stop = false
n_list = 1, 10,50
)";

TEST_CASE("sections, keys, and comments parse") {
  ConfigFile c = ConfigFile::from_string(kSample);
  REQUIRE(c.get("mesh", "path") == "heart.mesh");
  REQUIRE(c.get_double("mesh", "h_fine") == 1.25);
  REQUIRE(c.get_long("optimizer", "iterations") == 400);
  REQUIRE(c.get_bool("optimizer", "use_early_stop") == false);
  REQUIRE(c.get_int_list("optimizer", "n_list") ==
          std::vector<int>{1, 10, 50});
  REQUIRE(c.has("mesh", "path"));
  REQUIRE_FALSE(c.has("mesh", "absent"));
  REQUIRE(c.get_or("mesh", "absent", "dflt") == "dflt");
  REQUIRE(c.get_double_or("mesh", "absent", 7.5) == 7.5);
  REQUIRE(c.get_long_or("mesh", "absent", -3) == -3);
  REQUIRE(c.get_bool_or("mesh", "absent", true) == true);
}

TEST_CASE("malformed input raises errors that cite the line") {
  using Catch::Matchers::ContainsSubstring;
  REQUIRE_THROWS_MATCHES(ConfigFile::from_string("[mesh\nk = v\n"),
                         ConfigError, MessageMatches(ContainsSubstring("line 1")));
  REQUIRE_THROWS_MATCHES(ConfigFile::from_string("[m]\nnovalue\n"), ConfigError,
                         MessageMatches(ContainsSubstring("line 2")));
  REQUIRE_THROWS_AS(ConfigFile::from_string("k = v\n"), ConfigError);
  REQUIRE_THROWS_AS(ConfigFile::from_string("[]\n"), ConfigError);
  REQUIRE_THROWS_AS(ConfigFile::from_string("[m]\n = v\n"), ConfigError);
}

TEST_CASE("typed getters report the offending section and key") {
  using Catch::Matchers::ContainsSubstring;
  ConfigFile c = ConfigFile::from_string("[a]\nk = not_a_number\n");
  REQUIRE_THROWS_MATCHES(c.get_double("a", "k"), ConfigError,
                         MessageMatches(ContainsSubstring("[a] k")));
  REQUIRE_THROWS_MATCHES(c.get("a", "missing"), ConfigError,
                         MessageMatches(ContainsSubstring("missing")));
  REQUIRE_THROWS_AS(c.get_bool("a", "k"), ConfigError);
}

TEST_CASE("canonical hash ignores ordering but not content") {
  ConfigFile a = ConfigFile::from_string("[s]\nx = 1\ny = 2\n[t]\nz = 3\n");
  ConfigFile b = ConfigFile::from_string("[t]\nz = 3\n[s]\ny = 2\nx = 1\n");
  REQUIRE(a.canonical_hash() == b.canonical_hash());
  ConfigFile c = ConfigFile::from_string("[s]\nx = 1\ny = 2\n[t]\nz = 4\n");
  REQUIRE(a.canonical_hash() != c.canonical_hash());
  ConfigFile d = a;
  d.set("s", "x", "1");
  REQUIRE(a.canonical_hash() == d.canonical_hash());
  d.set("s", "x", "10");
  REQUIRE(a.canonical_hash() != d.canonical_hash());
}

TEST_CASE("from_file loads and records its source path") {
  TempDir tmp("cfg");
  std::string path = tmp.file("run.cfg");
  { std::ofstream f(path); f << kSample; }
  ConfigFile c = ConfigFile::from_file(path);
  REQUIRE(c.source() == path);
  REQUIRE(c.get_double("optimizer", "lr") == 0.75);
  REQUIRE_THROWS_AS(ConfigFile::from_file(tmp.file("missing.cfg")),
                    ConfigError);
}
