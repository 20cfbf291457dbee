// CSV reading/writing round trips.

#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "etwin/csv.hpp"
#include "support/temp_dir.hpp"

using namespace etwin;
using etwin_test::TempDir;

TEST_CASE("split_csv_line handles plain, empty, and CR-terminated fields") {
  auto f = split_csv_line("a,b,c");
  REQUIRE(f == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(split_csv_line("x") == std::vector<std::string>{"x"});
  REQUIRE(split_csv_line("a,,c") == std::vector<std::string>{"a", "", "c"});
  REQUIRE(split_csv_line("a,b\r") == std::vector<std::string>{"a", "b"});
}

TEST_CASE("writer then reader round-trips values bit-exactly") {
  TempDir tmp("csv");
  std::string path = tmp.file("t.csv");
  {
    CsvWriter w(path);
    w.row({"id", "value"});
    w.row({"0", format_double(0.1)});
    w.row({"1", format_double(-2.5e-7)});
  }
  CsvTable t = read_csv(path);
  REQUIRE(t.header == std::vector<std::string>{"id", "value"});
  REQUIRE(t.rows.size() == 2);
  REQUIRE(t.column("value") == 1);
  REQUIRE(parse_double(t.rows[0][1]) == 0.1);
  REQUIRE(parse_double(t.rows[1][1]) == -2.5e-7);
  REQUIRE_THROWS_AS(t.column("missing"), IoError);
}

TEST_CASE("reader skips blank lines and rejects missing files") {
  TempDir tmp("csv");
  std::string path = tmp.file("gaps.csv");
  {
    std::ofstream f(path);
    f << "a,b\n1,2\n\n3,4\n\r\n";
  }
  CsvTable t = read_csv(path);
  REQUIRE(t.rows.size() == 2);
  REQUIRE(t.rows[1] == std::vector<std::string>{"3", "4"});

  REQUIRE_THROWS_AS(read_csv(tmp.file("nope.csv")), IoError);

  std::string empty = tmp.file("empty.csv");
  { std::ofstream f(empty); }
  REQUIRE_THROWS_AS(read_csv(empty), IoError);
}

TEST_CASE("writer refuses unwritable paths") {
  REQUIRE_THROWS_AS(CsvWriter("/nonexistent_dir_xyz/file.csv"), IoError);
}
