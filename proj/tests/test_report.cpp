#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <string>

#include "qflux/report.hpp"

using namespace qflux;

namespace {

// A bundle with the awkward cases: rows with different term sets, a label
// that needs quoting, and one failing check.
ReportBundle sample_bundle() {
  ReportBundle b;
  b.scenario = "sample";
  b.timestamp = "2000-01-01T00:00:00Z";
  b.config_echo["numerical.n"] = "64";
  b.notes.push_back("hand-built fixture");

  ReportRow a;
  a.label = "first";
  a.set("alpha", 0.1);
  a.set("gamma", -3.5e-12);
  a.require_below("gamma", 1e-10);
  b.rows.push_back(a);

  ReportRow c;
  c.label = "second, \"quoted\"";
  c.set("beta", 2.0 / 3.0);
  c.set("gamma", 7.0);
  c.require_below("gamma", 1.0);
  c.require_at_least("beta", 0.5);
  b.rows.push_back(c);
  return b;
}

} // namespace

TEST_CASE("Shortest-round-trip formatting parses back to identical doubles") {
  for (double x : {0.1, 2.0 / 3.0, -3.5e-12, 1e308, 5e-324, 0.0, 6.283185307179586}) {
    const std::string s = format_double(x);
    CHECK(std::strtod(s.c_str(), nullptr) == x);
  }
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-2.5) == "-2.5");
}

TEST_CASE("Row checks recompute from stored terms and bounds") {
  ReportRow r;
  r.label = "row";
  r.set("small", 1e-9);
  r.set("big", 4.0);
  r.require_below("small", 1e-8);
  r.require_at_least("big", 3.5);
  CHECK(r.pass());

  r.require_below("big", 1.0);
  CHECK_FALSE(r.pass());

  for (const ReportCheck& c : r.checks) {
    const bool recomputed =
        c.at_least ? std::abs(r.get(c.term)) >= c.bound : std::abs(r.get(c.term)) <= c.bound;
    CHECK(recomputed == c.pass);
  }
}

TEST_CASE("Reading an absent term is an error") {
  ReportRow r;
  r.set("present", 1.0);
  CHECK_THROWS_AS(r.get("absent"), IntegrityError);
  CHECK_THROWS_AS(r.require_below("absent", 1.0), IntegrityError);
}

TEST_CASE("JSON round trip reproduces the bundle exactly") {
  const ReportBundle b = sample_bundle();
  const ReportBundle back = bundle_from_json_text(json_text(b));
  CHECK(back == b);
  CHECK(json_text(back) == json_text(b));
}

TEST_CASE("Malformed bundle JSON is a config error") {
  CHECK_THROWS_AS(bundle_from_json_text("not json at all"), ConfigError);
  CHECK_THROWS_AS(bundle_from_json_text("{\"meta\": {}}"), ConfigError);
}

TEST_CASE("CSV has one header and stable byte-ordered columns") {
  const ReportBundle b = sample_bundle();
  const std::string csv = to_csv(b);

  const auto first_line = csv.substr(0, csv.find('\n'));
  CHECK(first_line == "label,alpha,beta,gamma,pass");

  // One header plus one line per row.
  int lines = 0;
  for (char ch : csv)
    if (ch == '\n') ++lines;
  CHECK(lines == 3);

  // Cells for terms a row lacks stay empty; verdict is the last cell.
  CHECK(csv.find("first,0.1,,-3.5e-12,1\n") != std::string::npos);

  // Labels with commas or quotes are quoted with doubled quotes.
  CHECK(csv.find("\"second, \"\"quoted\"\"\"") != std::string::npos);
}

TEST_CASE("Bundle summary counts checks and failures") {
  ReportBundle b = sample_bundle();
  CHECK(b.check_count() == 3);
  CHECK(b.failure_count() == 1);
  CHECK_FALSE(b.all_pass());

  b.rows[1].checks.clear();
  b.rows[1].require_below("gamma", 10.0);
  CHECK(b.all_pass());
}

TEST_CASE("Timestamps are UTC and second-resolved") {
  const std::string t = utc_timestamp();
  REQUIRE(t.size() == 20);
  CHECK(t[4] == '-');
  CHECK(t[10] == 'T');
  CHECK(t[19] == 'Z');
}

TEST_CASE("Text files round trip and errors carry the path") {
  const std::string path = "report_roundtrip.tmp";
  const std::string text = "line one\nline two\n";
  write_text_file(path, text);
  CHECK(read_text_file(path) == text);
  std::remove(path.c_str());

  CHECK_THROWS_WITH(read_text_file("no/such/file.json"),
                    Catch::Matchers::ContainsSubstring("no/such/file.json"));
}
