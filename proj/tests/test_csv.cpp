#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <string>
#include <vector>

#include "cdt/csv.hpp"
#include "cdt/errors.hpp"

using namespace cdt;

TEST_CASE("plain table round-trips") {
  const std::string text = "a,b,c\n1,2,3\n4,5,6\n";
  CsvTable t = read_csv(text);
  REQUIRE(t.header == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0] == std::vector<std::string>{"1", "2", "3"});
  CHECK(t.rows[1] == std::vector<std::string>{"4", "5", "6"});
  CHECK(write_csv(t) == text);
}

TEST_CASE("quoted fields, escapes, and embedded separators") {
  const std::string text =
      "name,note\n"
      "\"Smith, Jane\",\"says \"\"hi\"\"\"\n"
      "plain,\"two\nlines\"\n";
  CsvTable t = read_csv(text);
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][0] == "Smith, Jane");
  CHECK(t.rows[0][1] == "says \"hi\"");
  CHECK(t.rows[1][1] == "two\nlines");

  // Writing re-quotes exactly the fields that need it.
  CHECK(write_csv(t) == text);
}

TEST_CASE("crlf line endings are accepted") {
  CsvTable t = read_csv("a,b\r\n1,2\r\n3,4\r\n");
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[1][0] == "3");
}

TEST_CASE("missing trailing newline is fine") {
  CsvTable t = read_csv("a,b\n1,2");
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0][1] == "2");
}

TEST_CASE("a lone carriage return inside an unquoted field is data") {
  CsvTable t = read_csv("a,b\nx\ry,2\n");
  CHECK(t.rows[0][0] == "x\ry");
}

TEST_CASE("ragged rows are rejected with the row number") {
  CHECK_THROWS_WITH_AS(read_csv("a,b\n1,2,3\n"),
                       doctest::Contains("row 1"), DataError);
  CHECK_THROWS_AS(read_csv("a,b\n1,2\n7\n"), DataError);
}

TEST_CASE("malformed quoting is rejected") {
  CHECK_THROWS_AS(read_csv("a,b\n\"open,2\n"), DataError);       // unterminated
  CHECK_THROWS_AS(read_csv("a,b\nmid\"dle,2\n"), DataError);     // quote in bare field
  CHECK_THROWS_AS(read_csv("a,b\n\"x\"y,2\n"), DataError);       // junk after close
}

TEST_CASE("empty input has no header") {
  CHECK_THROWS_AS(read_csv(""), DataError);
}

TEST_CASE("field quoting is minimal") {
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("") == "");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("a\"b") == "\"a\"\"b\"");
  CHECK(csv_field("a\nb") == "\"a\nb\"");
}

TEST_CASE("strict number parsing") {
  CHECK(parse_number("1.5", 1, "y") == doctest::Approx(1.5));
  CHECK(parse_number("  -2e3 ", 1, "y") == doctest::Approx(-2000.0));
  CHECK_THROWS_WITH_AS(parse_number("", 4, "y"), doctest::Contains("row 4"),
                       DataError);
  CHECK_THROWS_AS(parse_number("1.5x", 1, "y"), DataError);
  CHECK_THROWS_AS(parse_number("nan", 1, "y"), DataError);
  CHECK_THROWS_AS(parse_number("inf", 1, "y"), DataError);
  CHECK_THROWS_AS(parse_number("--3", 1, "y"), DataError);
}

static CsvTable trial_table() {
  return read_csv(
      "id,x1,x2,y,z\n"
      "u1,0.5,-1,2.0,1\n"
      "u2,-0.25,3,1.0,0\n"
      "u3,1.5,0,4.0,1\n");
}

TEST_CASE("dataset extraction by column name") {
  CsvTable t = read_csv(
      "x1,x2,y,z\n"
      "0.5,-1,2.0,1\n"
      "-0.25,3,1.0,0\n"
      "1.5,0,4.0,1\n");
  Dataset d = dataset_from_csv(t, "y", "z");
  REQUIRE(d.n == 3);
  REQUIRE(d.p == 2);
  CHECK(d.columns == std::vector<std::string>{"x1", "x2"});
  CHECK(d.y == std::vector<double>{2.0, 1.0, 4.0});
  CHECK(d.z == std::vector<int>{1, 0, 1});
  CHECK(d.xat(1, 0) == doctest::Approx(-0.25));
  CHECK(d.xat(2, 1) == doctest::Approx(0.0));
}

TEST_CASE("id column is carried as labels, not a covariate") {
  const std::string id = "id";
  Dataset d = dataset_from_csv(trial_table(), "y", "z", nullptr, &id);
  REQUIRE(d.ids == std::vector<std::string>{"u1", "u2", "u3"});
  CHECK(d.columns == std::vector<std::string>{"x1", "x2"});
}

TEST_CASE("explicit covariate list narrows and orders the design") {
  const std::vector<std::string> cov = {"x2"};
  Dataset d = dataset_from_csv(trial_table(), "y", "z", &cov);
  REQUIRE(d.p == 1);
  CHECK(d.columns == std::vector<std::string>{"x2"});
  CHECK(d.xat(0, 0) == doctest::Approx(-1.0));

  const std::vector<std::string> swapped = {"x2", "x1"};
  Dataset d2 = dataset_from_csv(trial_table(), "y", "z", &swapped);
  CHECK(d2.columns == std::vector<std::string>{"x2", "x1"});
  CHECK(d2.xat(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("bad column requests are named") {
  CsvTable t = trial_table();
  CHECK_THROWS_WITH_AS(dataset_from_csv(t, "nope", "z"),
                       doctest::Contains("nope"), DataError);
  CHECK_THROWS_AS(dataset_from_csv(t, "y", "gone"), DataError);
  CHECK_THROWS_AS(dataset_from_csv(t, "y", "y"), DataError);  // same column twice
  const std::vector<std::string> empty;
  CHECK_THROWS_AS(dataset_from_csv(t, "y", "z", &empty), DataError);
  const std::vector<std::string> ghost = {"x9"};
  CHECK_THROWS_AS(dataset_from_csv(t, "y", "z", &ghost), DataError);
}

TEST_CASE("treatment must be exactly zero or one") {
  CsvTable t = read_csv("x1,y,z\n1,2,0.5\n");
  CHECK_THROWS_WITH_AS(dataset_from_csv(t, "y", "z"), doctest::Contains("row 1"),
                       DataError);
  CsvTable t2 = read_csv("x1,y,z\n1,2,2\n");
  CHECK_THROWS_AS(dataset_from_csv(t2, "y", "z"), DataError);
}

TEST_CASE("non-numeric cells point at their coordinate") {
  CsvTable t = read_csv("x1,y,z\nfoo,2,1\n");
  CHECK_THROWS_WITH_AS(dataset_from_csv(t, "y", "z"), doctest::Contains("x1"),
                       DataError);
}

TEST_CASE("file round-trip") {
  CsvTable t = trial_table();
  const std::string path = "csv_roundtrip_test.csv";
  write_csv_file(path, t);
  CsvTable back = read_csv_file(path);
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_csv_file("no_such_file_here.csv"), DataError);
}
