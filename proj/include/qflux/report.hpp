#pragma once

#include <charconv>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "qflux/errors.hpp"

namespace qflux {

inline constexpr const char* qflux_version = "0.1.0";

// ---------------------------------------------------------------------------
// Report model
// ---------------------------------------------------------------------------

// A check is a bound on the magnitude of one stored term, so any consumer of
// the serialized bundle can recompute the verdict: pass means |terms[term]|
// stays at or under the bound ("max"), or reaches at least the bound ("min",
// used for contrasts that must be visibly nonzero).
struct ReportCheck {
  std::string term;
  double bound = 0.0;
  bool at_least = false;
  bool pass = false;

  friend bool operator==(const ReportCheck&, const ReportCheck&) = default;
};

struct ReportRow {
  std::string label;
  std::map<std::string, double> terms;
  std::vector<ReportCheck> checks;

  void set(const std::string& name, double value) { terms[name] = value; }

  double get(const std::string& name) const {
    const auto it = terms.find(name);
    if (it == terms.end())
      throw IntegrityError("report row '" + label + "' has no term '" + name + "'");
    return it->second;
  }

  void require_below(const std::string& term, double bound) {
    checks.push_back({term, bound, false, std::abs(get(term)) <= bound});
  }

  void require_at_least(const std::string& term, double bound) {
    checks.push_back({term, bound, true, std::abs(get(term)) >= bound});
  }

  bool pass() const {
    for (const ReportCheck& c : checks)
      if (!c.pass) return false;
    return true;
  }

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct ReportBundle {
  std::string scenario;
  std::string version = qflux_version;
  std::string timestamp;
  double tolerance_scale = 1.0;
  std::map<std::string, std::string> config_echo;
  std::vector<std::string> notes;
  std::vector<ReportRow> rows;

  int check_count() const {
    int n = 0;
    for (const ReportRow& r : rows) n += static_cast<int>(r.checks.size());
    return n;
  }

  int failure_count() const {
    int n = 0;
    for (const ReportRow& r : rows)
      for (const ReportCheck& c : r.checks)
        if (!c.pass) ++n;
    return n;
  }

  bool all_pass() const { return failure_count() == 0; }

  friend bool operator==(const ReportBundle&, const ReportBundle&) = default;
};

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

// Shortest decimal form that parses back to the identical double; CSV cells
// and config echoes use it so emitted files carry full precision.
inline std::string format_double(double x) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

// Current wall-clock time in UTC. The one field two otherwise identical runs
// do not share; comparisons strip it.
inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[80];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buf;
}

inline nlohmann::json to_json(const ReportBundle& b) {
  nlohmann::json rows = nlohmann::json::array();
  for (const ReportRow& r : b.rows) {
    nlohmann::json checks = nlohmann::json::array();
    for (const ReportCheck& c : r.checks)
      checks.push_back({{"term", c.term},
                        {"bound", c.bound},
                        {"type", c.at_least ? "min" : "max"},
                        {"pass", c.pass}});
    rows.push_back({{"label", r.label},
                    {"terms", r.terms},
                    {"checks", std::move(checks)},
                    {"pass", r.pass()}});
  }
  return nlohmann::json{
      {"meta",
       {{"scenario", b.scenario},
        {"version", b.version},
        {"timestamp", b.timestamp},
        {"tolerance_scale", b.tolerance_scale}}},
      {"config", b.config_echo},
      {"notes", b.notes},
      {"rows", std::move(rows)},
      {"summary",
       {{"checks", b.check_count()},
        {"failures", b.failure_count()},
        {"pass", b.all_pass()}}},
  };
}

inline std::string json_text(const ReportBundle& b) { return to_json(b).dump(2) + "\n"; }

inline ReportBundle bundle_from_json(const nlohmann::json& j) {
  try {
    ReportBundle b;
    const auto& meta = j.at("meta");
    b.scenario = meta.at("scenario").get<std::string>();
    b.version = meta.at("version").get<std::string>();
    b.timestamp = meta.at("timestamp").get<std::string>();
    b.tolerance_scale = meta.at("tolerance_scale").get<double>();
    b.config_echo = j.at("config").get<std::map<std::string, std::string>>();
    b.notes = j.at("notes").get<std::vector<std::string>>();
    for (const auto& jr : j.at("rows")) {
      ReportRow r;
      r.label = jr.at("label").get<std::string>();
      r.terms = jr.at("terms").get<std::map<std::string, double>>();
      for (const auto& jc : jr.at("checks")) {
        ReportCheck c;
        c.term = jc.at("term").get<std::string>();
        c.bound = jc.at("bound").get<double>();
        c.at_least = jc.at("type").get<std::string>() == "min";
        c.pass = jc.at("pass").get<bool>();
        r.checks.push_back(std::move(c));
      }
      b.rows.push_back(std::move(r));
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed report bundle: ") + e.what());
  }
}

inline ReportBundle bundle_from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("report bundle is not valid JSON: ") + e.what());
  }
  return bundle_from_json(j);
}

namespace detail {

inline void csv_field(std::string& out, const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) {
    out += s;
    return;
  }
  out += '"';
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

} // namespace detail

// One data line per row. Columns: the row label, every term name appearing
// anywhere in the bundle in byte order, then "pass". Rows that lack a term
// leave the cell empty. The first line is always this header.
inline std::string to_csv(const ReportBundle& b) {
  std::map<std::string, int> columns;
  for (const ReportRow& r : b.rows)
    for (const auto& [name, value] : r.terms) columns.emplace(name, 0);

  std::string out = "label";
  for (const auto& [name, idx] : columns) {
    out += ',';
    detail::csv_field(out, name);
  }
  out += ",pass\n";

  for (const ReportRow& r : b.rows) {
    detail::csv_field(out, r.label);
    for (const auto& [name, idx] : columns) {
      out += ',';
      const auto it = r.terms.find(name);
      if (it != r.terms.end()) out += format_double(it->second);
    }
    out += r.pass() ? ",1\n" : ",0\n";
  }
  return out;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  f.flush();
  if (!f) throw Error("write failed for '" + path + "'");
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "' for reading");
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (f.bad()) throw Error("read failed for '" + path + "'");
  return text;
}

} // namespace qflux
