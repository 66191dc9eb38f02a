#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "doctest.h"
#include "recon/csv.hpp"
#include "recon/errors.hpp"

using recon::parse_csv;

namespace {

recon::CsvTable parse(const std::string& text) {
  std::istringstream in(text);
  return parse_csv(in, "t.csv");
}

}  // namespace

TEST_CASE("csv parsing") {
  SUBCASE("plain records with LF and CRLF") {
    for (const std::string eol : {"\n", "\r\n"}) {
      const auto t = parse("a,b" + eol + "1,2" + eol + "3,4" + eol);
      CHECK(t.header == std::vector<std::string>{"a", "b"});
      REQUIRE(t.rows.size() == 2);
      CHECK(t.rows[1] == std::vector<std::string>{"3", "4"});
      CHECK(t.lines == std::vector<std::size_t>{2, 3});
      CHECK(t.column("b") == 1);
      CHECK(t.column("z") == -1);
    }
  }
  SUBCASE("no trailing newline") {
    const auto t = parse("a\nx");
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0][0] == "x");
  }
  SUBCASE("quoted fields") {
    const auto t = parse("a,b\n\"x,y\",\"say \"\"hi\"\"\"\n\"two\nlines\",z\nlast,\"\"\n");
    REQUIRE(t.rows.size() == 3);
    CHECK(t.rows[0][0] == "x,y");
    CHECK(t.rows[0][1] == "say \"hi\"");
    CHECK(t.rows[1][0] == "two\nlines");
    CHECK(t.rows[2][1].empty());
    // The record after the embedded newline starts two physical lines later.
    CHECK(t.lines == std::vector<std::size_t>{2, 3, 5});
  }
  SUBCASE("blank line is skipped") {
    const auto t = parse("a,b\n1,2\n\n3,4\n");
    CHECK(t.rows.size() == 2);
    CHECK(t.lines == std::vector<std::size_t>{2, 4});
  }
}

TEST_CASE("csv errors carry the line") {
  CHECK_THROWS_WITH_AS(parse("a,b\n1,2\n3\n"), doctest::Contains("t.csv:3"), recon::ParseError);
  CHECK_THROWS_WITH_AS(parse("a\n\"open\n"), doctest::Contains("unterminated"), recon::ParseError);
  CHECK_THROWS_WITH_AS(parse("a\nx\"y\n"), doctest::Contains("t.csv:2"), recon::ParseError);
  CHECK_THROWS_WITH_AS(parse("a\n\"x\"y\n"), doctest::Contains("after closing quote"),
                       recon::ParseError);
  CHECK_THROWS_WITH_AS(parse("a\rb\n"), doctest::Contains("carriage return"), recon::ParseError);
  CHECK_THROWS_AS(parse(""), recon::ParseError);
  CHECK_THROWS_AS(recon::read_csv("/nonexistent/file.csv"), recon::ParseError);
}

TEST_CASE("csv writer round-trips through the parser") {
  const std::vector<std::vector<std::string>> records{
      {"key", "value", "note"},
      {"plain", "1.5", ""},
      {"with,comma", "\"quoted\"", "multi\nline"},
      {"crlf\r\ninside", "x", "y"},
  };
  std::ostringstream out;
  for (const auto& r : records) recon::write_csv_row(out, r);
  const auto t = parse(out.str());
  CHECK(t.header == records[0]);
  REQUIRE(t.rows.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(t.rows[i] == records[i + 1]);
}

TEST_CASE("number formatting round-trips") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> mant(-1.0, 1.0);
  std::uniform_int_distribution<int> expo(-300, 300);
  for (int i = 0; i < 2000; ++i) {
    const double v = std::ldexp(mant(rng), expo(rng));
    double back = 0.0;
    REQUIRE(recon::parse_number(recon::format_number(v), back));
    CHECK(back == v);
  }
  CHECK(recon::format_number(0.1) == "0.1");
  CHECK(recon::format_number(12.0) == "12");

  double v = 0.0;
  CHECK(recon::parse_number("+2.5", v));
  CHECK(v == 2.5);
  CHECK(recon::parse_number("1e3", v));
  CHECK(v == 1000.0);
  CHECK_FALSE(recon::parse_number("", v));
  CHECK_FALSE(recon::parse_number("1.5x", v));
  CHECK_FALSE(recon::parse_number(" 1", v));
  CHECK_FALSE(recon::parse_number("abc", v));
}
