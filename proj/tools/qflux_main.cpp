// Command-line front end: scenario configs in, reports out.
//
//   qflux audit  --config scenario.ini [--format json|csv] [--out DIR]
//   qflux sweep  --config scenario.ini [--format json|csv] [--out DIR]
//   qflux verify [--out DIR] [--format json|csv] [--jobs N]
//   qflux report --config saved_bundle.json --format csv [--out DIR]
//
// Exit codes: 0 when every check passes, 1 when any check fails, 2 on a
// config problem (bad file, bad key, bad invocation), 3 on a numerical or
// I/O failure.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qflux/acceptance.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string format = "json";
  std::string out = ".";
  double tolerance_scale = 1.0;
  int jobs = 1;
};

void add_tuning_flags(CLI::App* cmd, CommonArgs* a) {
  cmd->add_option("--tolerance-scale", a->tolerance_scale,
                  "Multiply every pass/fail tolerance by this factor (exploratory runs)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--jobs", a->jobs, "Worker threads for sweeps and multi-run suites")
      ->check(CLI::PositiveNumber);
}

void add_output_flags(CLI::App* cmd, CommonArgs* a) {
  cmd->add_option("--format", a->format, "Report encoding: json or csv")
      ->check(CLI::IsMember({"json", "csv"}));
  cmd->add_option("--out", a->out, "Directory for emitted report files");
}

// Writes one bundle under the output directory, named after the bundle's
// scenario. Returns the path written.
std::string emit_report(const qflux::ReportBundle& b, const std::string& format,
                        const std::string& out_dir, const std::string& stem = "") {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec)
    throw qflux::Error("cannot create output directory '" + out_dir + "': " + ec.message());

  std::string name = stem.empty() ? (b.scenario.empty() ? "report" : b.scenario) : stem;
  for (char& c : name)
    if (c == '/' || c == ' ') c = '_';
  const std::string path = out_dir + "/" + name + "_report." + format;
  qflux::write_text_file(path, format == "csv" ? qflux::to_csv(b) : qflux::json_text(b));
  return path;
}

// Prints the verdict summary for one bundle, with a line per failed check.
void print_bundle(const qflux::ReportBundle& b) {
  std::printf("scenario %s: %zu rows, %d checks, %d failed\n", b.scenario.c_str(),
              b.rows.size(), b.check_count(), b.failure_count());
  for (const auto& row : b.rows)
    for (const auto& ck : row.checks)
      if (!ck.pass)
        std::printf("  FAIL %s: %s = %s (%s %s)\n", row.label.c_str(), ck.term.c_str(),
                    qflux::format_double(row.get(ck.term)).c_str(),
                    ck.at_least ? "needs at least" : "allowed up to",
                    qflux::format_double(ck.bound).c_str());
}

int run_audit(const CommonArgs& a, bool sweep) {
  const auto sc = qflux::ScenarioConfig::from_file(a.config);
  if (!sweep && sc.ini.values.count("sweep.parameter"))
    throw qflux::ConfigError("config defines a sweep (sweep.parameter); use the sweep subcommand");

  qflux::RunOptions opt;
  opt.tolerance_scale = a.tolerance_scale;
  opt.jobs = a.jobs;
  const qflux::ReportBundle b =
      sweep ? qflux::run_sweep(sc, opt) : qflux::run_scenario(sc, opt);
  print_bundle(b);
  std::printf("wrote %s\n", emit_report(b, a.format, a.out).c_str());
  return b.all_pass() ? 0 : 1;
}

int run_verify(const CommonArgs& a, bool write_files) {
  qflux::RunOptions opt;
  opt.tolerance_scale = a.tolerance_scale;
  opt.jobs = a.jobs;
  const std::vector<qflux::CriterionResult> results = qflux::run_acceptance(opt);

  int failed = 0;
  for (const auto& c : results) {
    std::printf("criterion %2d %-26s %s\n", c.number, c.name.c_str(),
                c.pass() ? "PASS" : "FAIL");
    if (!c.pass()) {
      ++failed;
      print_bundle(c.bundle);
    }
    if (write_files) {
      char stem[64];
      std::snprintf(stem, sizeof stem, "acceptance_%02d_%s", c.number, c.name.c_str());
      emit_report(c.bundle, a.format, a.out, stem);
    }
  }
  std::printf("acceptance: %zu/%zu criteria passed\n", results.size() - failed,
              results.size());
  if (write_files) std::printf("reports written to %s\n", a.out.c_str());
  return failed == 0 ? 0 : 1;
}

int run_reemit(const CommonArgs& a) {
  const qflux::ReportBundle b =
      qflux::bundle_from_json_text(qflux::read_text_file(a.config));
  print_bundle(b);
  std::printf("wrote %s\n", emit_report(b, a.format, a.out).c_str());
  return b.all_pass() ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boundary-corrected expectation-value audits for lattice quantum systems"};
  app.set_version_flag("--version", qflux::qflux_version);
  app.require_subcommand(1);

  CommonArgs args;

  CLI::App* audit = app.add_subcommand("audit", "Run a single scenario config");
  audit->add_option("--config", args.config, "Scenario config file")
      ->required()
      ->check(CLI::ExistingFile);
  add_output_flags(audit, &args);
  add_tuning_flags(audit, &args);

  CLI::App* sweep = app.add_subcommand("sweep", "Run a scenario swept over one parameter");
  sweep->add_option("--config", args.config, "Scenario config file with a [sweep] section")
      ->required()
      ->check(CLI::ExistingFile);
  add_output_flags(sweep, &args);
  add_tuning_flags(sweep, &args);

  CLI::App* verify = app.add_subcommand("verify", "Run the full acceptance suite");
  bool verify_write = false;
  verify->add_option("--out", args.out, "Directory for per-criterion report files")
      ->each([&](const std::string&) { verify_write = true; });
  verify->add_option("--format", args.format, "Report encoding: json or csv")
      ->check(CLI::IsMember({"json", "csv"}));
  add_tuning_flags(verify, &args);

  CLI::App* report = app.add_subcommand("report", "Re-emit a saved JSON bundle");
  report->add_option("--config", args.config, "Saved bundle (JSON) to re-emit")
      ->required()
      ->check(CLI::ExistingFile);
  add_output_flags(report, &args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (audit->parsed()) return run_audit(args, false);
    if (sweep->parsed()) return run_audit(args, true);
    if (verify->parsed()) return run_verify(args, verify_write);
    return run_reemit(args);
  } catch (const qflux::ConfigError& e) {
    std::fprintf(stderr, "qflux: config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "qflux: %s\n", e.what());
    return 3;
  }
}
