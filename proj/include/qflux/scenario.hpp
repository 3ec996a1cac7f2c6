#pragma once

#include <atomic>
#include <charconv>
#include <cstdio>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "qflux/auditor.hpp"
#include "qflux/berry.hpp"
#include "qflux/dynamics.hpp"
#include "qflux/report.hpp"

namespace qflux {

// ---------------------------------------------------------------------------
// Config files
// ---------------------------------------------------------------------------

// Flat INI dialect: [section] headers, key = value lines, full-line comments
// starting with '#' or ';'. Keys are addressed as "section.key" everywhere.
// Anything structurally off (duplicate keys, keys before a section, empty
// values) fails at parse time; unknown-but-wellformed keys fail later, once
// the scenario knows which keys it consumes.
struct IniFile {
  std::map<std::string, std::string> values;
  std::map<std::string, int> lines;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  return true;
}

} // namespace detail

inline IniFile parse_ini(const std::string& text) {
  IniFile out;
  std::string section;
  int lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::size_t end = nl == std::string::npos ? text.size() : nl;
    const std::string line = detail::trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++lineno;
    if (nl == std::string::npos && line.empty()) break;

    if (line.empty() || line[0] == '#' || line[0] == ';') continue;

    if (line[0] == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
      const std::string name = detail::trim(line.substr(1, line.size() - 2));
      if (!detail::valid_name(name))
        throw ConfigError("line " + std::to_string(lineno) + ": bad section name '" + name + "'");
      section = name;
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected 'key = value' or '[section]'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (!detail::valid_name(key))
      throw ConfigError("line " + std::to_string(lineno) + ": bad key name '" + key + "'");
    if (section.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": key '" + key +
                        "' appears before any [section]");
    if (value.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": key '" + key +
                        "' has an empty value");

    const std::string full = section + "." + key;
    if (out.values.count(full))
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + full + "'");
    out.values[full] = value;
    out.lines[full] = lineno;
  }
  return out;
}

// Typed access over a parsed file. Every getter records the key it touched
// and the effective value (default or parsed), so the run can echo its full
// configuration and finish() can reject any key no getter asked for.
class ConfigReader {
public:
  explicit ConfigReader(const IniFile& ini) : ini_(&ini) {}

  bool has(const std::string& key) const { return ini_->values.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) {
    const auto it = ini_->values.find(key);
    const std::string v = it == ini_->values.end() ? fallback : it->second;
    note(key, v);
    return v;
  }

  double get_double(const std::string& key, double fallback) {
    const auto it = ini_->values.find(key);
    if (it == ini_->values.end()) {
      note(key, format_double(fallback));
      return fallback;
    }
    const double v = parse_double(key, it->second);
    note(key, format_double(v));
    return v;
  }

  double get_positive(const std::string& key, double fallback) {
    const double v = get_double(key, fallback);
    if (!(v > 0.0))
      throw ConfigError(key + ": must be positive (got " + format_double(v) + ")");
    return v;
  }

  int get_int(const std::string& key, int fallback) {
    const auto it = ini_->values.find(key);
    if (it == ini_->values.end()) {
      note(key, std::to_string(fallback));
      return fallback;
    }
    const std::string& s = it->second;
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
      throw ConfigError(key + ": expected an integer (got '" + s + "')");
    note(key, std::to_string(v));
    return v;
  }

  int get_positive_int(const std::string& key, int fallback) {
    const int v = get_int(key, fallback);
    if (v <= 0) throw ConfigError(key + ": must be positive (got " + std::to_string(v) + ")");
    return v;
  }

  bool get_bool(const std::string& key, bool fallback) {
    const auto it = ini_->values.find(key);
    if (it == ini_->values.end()) {
      note(key, fallback ? "true" : "false");
      return fallback;
    }
    const std::string& s = it->second;
    bool v = false;
    if (s == "true" || s == "yes" || s == "1") v = true;
    else if (s == "false" || s == "no" || s == "0") v = false;
    else throw ConfigError(key + ": expected true or false (got '" + s + "')");
    note(key, v ? "true" : "false");
    return v;
  }

  std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) {
    const auto it = ini_->values.find(key);
    if (it == ini_->values.end()) {
      note(key, std::to_string(fallback));
      return fallback;
    }
    const std::string& s = it->second;
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
      throw ConfigError(key + ": expected an unsigned integer (got '" + s + "')");
    note(key, std::to_string(v));
    return v;
  }

  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) {
    const auto it = ini_->values.find(key);
    std::vector<double> v;
    if (it == ini_->values.end()) {
      v = fallback;
    } else {
      const std::string& s = it->second;
      std::size_t pos = 0;
      while (pos <= s.size()) {
        const std::size_t comma = s.find(',', pos);
        const std::size_t end = comma == std::string::npos ? s.size() : comma;
        const std::string item = detail::trim(s.substr(pos, end - pos));
        if (item.empty()) throw ConfigError(key + ": empty entry in list '" + s + "'");
        v.push_back(parse_double(key, item));
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
    }
    std::string echo;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) echo += ',';
      echo += format_double(v[i]);
    }
    note(key, echo);
    return v;
  }

  // Marks a key as consumed without reading it (the sweep runner owns the
  // swept key's value).
  void claim(const std::string& key) { used_.insert(key); }

  void finish() const {
    for (const auto& [key, value] : ini_->values)
      if (!used_.count(key))
        throw ConfigError("unknown key '" + key + "' (line " +
                          std::to_string(ini_->lines.at(key)) + ")");
  }

  const std::map<std::string, std::string>& effective() const { return echo_; }

private:
  static double parse_double(const std::string& key, const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
      throw ConfigError(key + ": expected a number (got '" + s + "')");
    return v;
  }

  void note(const std::string& key, const std::string& value) {
    used_.insert(key);
    echo_[key] = value;
  }

  const IniFile* ini_;
  std::set<std::string> used_;
  std::map<std::string, std::string> echo_;
};

struct ScenarioConfig {
  IniFile ini;

  static ScenarioConfig from_text(const std::string& text) { return {parse_ini(text)}; }
  static ScenarioConfig from_file(const std::string& path) {
    return from_text(read_text_file(path));
  }
};

struct RunOptions {
  double tolerance_scale = 1.0;
  int jobs = 1;
};

// ---------------------------------------------------------------------------
// Row-level parallelism
// ---------------------------------------------------------------------------

// Runs fn(0..count-1) on up to `jobs` threads. Results must land in
// preallocated slots indexed by i, which keeps output identical to the
// serial order no matter how the work interleaves.
inline void parallel_for(int jobs, int count, const std::function<void(int)>& fn) {
  jobs = std::min(std::max(jobs, 1), count);
  if (jobs <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex mu;
  std::exception_ptr first;
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (int t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          const std::lock_guard<std::mutex> lock(mu);
          if (!first) first = std::current_exception();
          return;
        }
      }
    });
  }
  for (std::thread& th : pool) th.join();
  if (first) std::rethrow_exception(first);
}

// ---------------------------------------------------------------------------
// Scenario pipelines
// ---------------------------------------------------------------------------

namespace detail {

inline Potential read_potential(ConfigReader& cfg, const std::string& fallback) {
  const std::string name = cfg.get_string("physical.potential", fallback);
  if (name == "zero") return Potential::zero();
  if (name == "cosine")
    return Potential::cosine(cfg.get_double("physical.amplitude", 0.5));
  if (name == "random_smooth")
    return Potential::random_smooth(cfg.get_double("physical.amplitude", 0.5),
                                    cfg.get_seed("physical.seed", 1));
  throw ConfigError("physical.potential: unknown preset '" + name + "'");
}

// Norm and energy drift of a stored trajectory against its first snapshot.
inline void drift_terms(ReportRow& row, const Trajectory& traj, const HamiltonianOp& op) {
  double norm_drift = 0.0, energy_drift = 0.0;
  const double e0 = energy_expectation(op, traj.states.front());
  for (int i = 0; i < static_cast<int>(traj.size()); ++i) {
    norm_drift = std::max(norm_drift, std::abs(traj.state(i).norm() - 1.0));
    energy_drift =
        std::max(energy_drift, std::abs(energy_expectation(op, traj.states[i]) - e0));
  }
  row.set("norm_drift", norm_drift);
  row.set("energy_drift_rel", energy_drift / std::max(1.0, std::abs(e0)));
}

inline ReportBundle run_free_particle(ConfigReader& cfg, const RunOptions& opt) {
  const double L = cfg.get_positive("physical.length", 1.0);
  const int mode = cfg.get_int("physical.mode", 1);
  const int n = cfg.get_positive_int("numerical.n", 256);
  const double tol_res = cfg.get_positive("tolerances.residual", 1e-8) * opt.tolerance_scale;
  std::optional<double> tol_term;
  if (cfg.has("tolerances.term"))
    tol_term = cfg.get_positive("tolerances.term", 0.0) * opt.tolerance_scale;

  const Grid1D g = Grid1D::periodic(L, n);
  const auto spec = make_spec(g, Potential::zero());
  const WaveFunction psi = plane_wave(g, mode);
  const AuditReport audit = ehrenfest_audit(spec, ObservableSpec::position(), psi);
  const double target = 2.0 * M_PI * mode / L;
  const cplx naive = audit.residual - audit.boundary;

  ReportBundle b;
  ReportRow ring;
  ring.label = "ring_audit";
  ring.set("mode", mode);
  ring.set("target", target);
  ring.set("formal_re", std::real(audit.formal));
  ring.set("formal_im", std::imag(audit.formal));
  ring.set("boundary_re", std::real(audit.boundary));
  ring.set("boundary_im", std::imag(audit.boundary));
  ring.set("residual_abs", std::abs(audit.residual));
  ring.set("naive_abs", std::abs(naive));
  ring.set("formal_gap", std::real(audit.formal) - target);
  ring.set("boundary_gap", std::real(audit.boundary) - target);
  ring.set("paradox_gap", std::abs(naive) - std::abs(target));
  ring.require_below("residual_abs", tol_res);
  if (tol_term) {
    ring.require_below("formal_gap", *tol_term);
    ring.require_below("boundary_gap", *tol_term);
    ring.require_below("paradox_gap", *tol_term);
  }
  b.rows.push_back(std::move(ring));

  // The closed-surface check is opt-in: a bare free-particle config keeps the
  // single ring row, and a [cube] section adds the face-integration row.
  if (cfg.has("cube.samples") || cfg.has("cube.volume")) {
    const double tol_cube = cfg.get_positive("tolerances.cube", 1e-10) * opt.tolerance_scale;
    const int samples = cfg.get_positive_int("cube.samples", 16);
    const double volume = cfg.get_positive("cube.volume", 1.0);
    const cplx flux = cube_position_flux({target, 0.0, 0.0}, volume, samples);
    ReportRow cube;
    cube.label = "cube_flux";
    cube.set("kx", target);
    cube.set("flux_re", std::real(flux));
    cube.set("flux_im", std::imag(flux));
    cube.set("flux_gap", std::abs(flux - cplx(0.0, -2.0 * target)));
    cube.require_below("flux_gap", tol_cube);
    b.rows.push_back(std::move(cube));
  }
  return b;
}

inline ReportBundle run_quantum_well(ConfigReader& cfg, const RunOptions& opt) {
  const double L = cfg.get_positive("physical.length", 1.0);
  const int level = cfg.get_positive_int("physical.level", 1);
  const int n = cfg.get_positive_int("numerical.n", 512);
  const double dt = cfg.get_positive("numerical.dt", 1e-4);
  const int steps = cfg.get_positive_int("numerical.steps", 1000);
  const double tol_res = cfg.get_positive("tolerances.residual", 1e-12) * opt.tolerance_scale;
  const double tol_energy = cfg.get_positive("tolerances.energy", 1e-10) * opt.tolerance_scale;
  const double tol_norm = cfg.get_positive("tolerances.norm_drift", 1e-10) * opt.tolerance_scale;
  const double tol_edrift =
      cfg.get_positive("tolerances.energy_drift", 1e-8) * opt.tolerance_scale;

  const Grid1D g = Grid1D::dirichlet(L, n);
  const auto spec = make_spec(g, Potential::zero());
  const auto sol = solve_states(spec, g, level + 1);
  const WaveFunction& state = sol.states[level - 1];

  // The discrete box eigenvalue for sin(level pi x / L); the continuum value
  // differs by O(h^2) and is reported alongside without a check.
  const double kh = level * M_PI * g.h / L;
  const double e_discrete = (1.0 - std::cos(kh)) / (g.h * g.h);

  ReportBundle b;
  ReportRow st;
  st.label = "stationary_audit";
  const AuditReport audit = ehrenfest_audit(spec, ObservableSpec::position(), state);
  st.set("level", level);
  st.set("energy", sol.energies[level - 1]);
  st.set("energy_gap_rel", (sol.energies[level - 1] - e_discrete) /
                               std::max(1.0, std::abs(e_discrete)));
  st.set("continuum_gap", sol.energies[level - 1] - well_energy(level, L));
  st.set("formal_re", std::real(audit.formal));
  st.set("boundary_abs", std::abs(audit.boundary));
  st.set("residual_abs", std::abs(audit.residual));
  st.require_below("residual_abs", tol_res);
  st.require_below("energy_gap_rel", tol_energy);
  b.rows.push_back(std::move(st));

  // Drift check propagates an equal mix of this level and the next, so the
  // state actually moves while norm and energy must not.
  WaveFunction mix{g, Eigen::VectorXcd(g.npoints), 0.0, 0.0};
  mix.samples = (sol.states[level - 1].samples + sol.states[level].samples);
  mix.normalize();
  const Propagator prop(spec, g, dt);
  const Trajectory traj = prop.run(mix, steps);

  ReportRow pr;
  pr.label = "propagation";
  pr.set("steps", steps);
  pr.set("dt", dt);
  drift_terms(pr, traj, prop.op());
  pr.require_below("norm_drift", tol_norm * (steps / 1000.0));
  pr.require_below("energy_drift_rel", tol_edrift);
  b.rows.push_back(std::move(pr));
  return b;
}

inline ReportBundle run_bloch(ConfigReader& cfg, const RunOptions& opt) {
  const double L = cfg.get_positive("physical.length", 1.0);
  const Potential v = read_potential(cfg, "cosine");
  const int band = cfg.get_int("physical.band", 0);
  const int n = cfg.get_positive_int("numerical.n", 256);
  const double delta = cfg.get_positive("numerical.delta", 1e-4);
  const int count = cfg.get_positive_int("sweep.k_count", 33);
  const double k_min = cfg.get_double("sweep.k_min", -M_PI);
  const double k_max = cfg.get_double("sweep.k_max", M_PI);
  const double tol_agree =
      cfg.get_positive("tolerances.agreement", 1e-5) * opt.tolerance_scale;
  const double tol_ring = cfg.get_positive("tolerances.ring_mean", 1e-12) * opt.tolerance_scale;
  const double tol_disp = cfg.get_positive("tolerances.display", 1e-8) * opt.tolerance_scale;
  if (band < 0) throw ConfigError("physical.band: must be nonnegative");

  const Grid1D g = Grid1D::periodic(L, n);
  ReportBundle b;
  b.rows.resize(count);

  parallel_for(opt.jobs, count, [&](int i) {
    const double k =
        count == 1 ? k_min : k_min + i * (k_max - k_min) / (count - 1);
    const BandSlopes s = band_slopes(v, g, k, delta, band);
    const SlopeParadoxReport p = hf_naive_check(v, g, k, delta, band);
    double display_max = 0.0;
    for (const cplx& t : p.display) display_max = std::max(display_max, std::abs(t));

    char label[16];
    std::snprintf(label, sizeof label, "k%02d", i);
    ReportRow row;
    row.label = label;
    row.set("k", k);
    row.set("energy", s.energy);
    row.set("spectral", s.spectral);
    row.set("corrected", s.corrected);
    row.set("momentum", s.momentum);
    row.set("minimal_mean", p.minimal_mean);
    row.set("ring_mean", p.ring_mean);
    row.set("display_max", display_max);
    row.set("gap_spectral_corrected", std::abs(s.spectral - s.corrected));
    row.set("gap_spectral_momentum", std::abs(s.spectral - s.momentum));
    row.set("gap_corrected_momentum", std::abs(s.corrected - s.momentum));
    row.require_below("gap_spectral_corrected", tol_agree);
    row.require_below("gap_spectral_momentum", tol_agree);
    row.require_below("gap_corrected_momentum", tol_agree);
    row.require_below("ring_mean", tol_ring);
    row.require_below("display_max", tol_disp);
    b.rows[i] = std::move(row);
  });
  return b;
}

inline ReportBundle run_ab_ring(ConfigReader& cfg, const RunOptions& opt) {
  const double L = cfg.get_positive("physical.length", 1.0);
  const Potential v = read_potential(cfg, "zero");
  const bool free_ring = cfg.get_string("physical.potential", "zero") == "zero";
  const double flux_a = cfg.get_double("physical.flux", 0.0);
  std::optional<double> flux_b;
  if (cfg.has("physical.flux_b")) flux_b = cfg.get_double("physical.flux_b", 0.0);
  const int bands = cfg.get_positive_int("physical.bands", 1);
  const int n = cfg.get_positive_int("numerical.n", 1024);
  const double tol_res = cfg.get_positive("tolerances.residual", 5e-6) * opt.tolerance_scale;
  const double tol_hv = cfg.get_positive("tolerances.hypervirial", 5e-6) * opt.tolerance_scale;
  const double contrast_factor = cfg.get_positive("tolerances.contrast_factor", 10.0);

  const Grid1D g = Grid1D::periodic(L, n);
  const ObservableSpec x = ObservableSpec::position();

  auto audit_flux = [&](double flux_total, const char* slot, ReportBundle& b) {
    const double a = flux_total / L;
    const auto spec = make_spec(g, v, a);
    const EigenSolution sol =
        free_ring ? ring_mode_basis(g, bands, a) : solve_states(spec, g, bands);
    for (int band = 0; band < bands; ++band) {
      const WaveFunction& psi = sol.states[band];
      const AuditReport audit = ehrenfest_audit(spec, x, psi);
      ReportRow row;
      row.label = std::string(slot) + "/band" + std::to_string(band);
      row.set("flux", flux_total);
      row.set("band", band);
      row.set("energy", sol.energies[band]);
      row.set("kin_momentum",
              std::real(expectation(ObservableSpec::kinematic_momentum(a), psi)));
      row.set("formal_re", std::real(audit.formal));
      row.set("boundary_re", std::real(audit.boundary));
      row.set("boundary_im", std::imag(audit.boundary));
      row.set("residual_abs", std::abs(audit.residual));
      row.set("hypervirial_abs", std::abs(hypervirial_check(spec, psi)));
      row.require_below("residual_abs", tol_res);
      row.require_below("hypervirial_abs", tol_hv);
      b.rows.push_back(std::move(row));
    }
  };

  ReportBundle b;
  audit_flux(flux_a, "phi_a", b);
  if (flux_b) {
    audit_flux(*flux_b, "phi_b", b);
    const cplx ba(b.rows[0].get("boundary_re"), b.rows[0].get("boundary_im"));
    const cplx bb(b.rows[bands].get("boundary_re"), b.rows[bands].get("boundary_im"));
    ReportRow contrast;
    contrast.label = "flux_contrast";
    contrast.set("flux_a", flux_a);
    contrast.set("flux_b", *flux_b);
    contrast.set("boundary_contrast", std::abs(bb - ba));
    contrast.require_at_least("boundary_contrast", contrast_factor * tol_res);
    b.rows.push_back(std::move(contrast));
  }
  return b;
}

inline ReportBundle run_superposition(ConfigReader& cfg, const RunOptions& opt) {
  const double L = cfg.get_positive("physical.length", 1.0);
  const std::vector<double> coeffs = cfg.get_list("physical.coefficients", {1.0, 1.0});
  const int n = cfg.get_positive_int("numerical.n", 1024);
  const double dt = cfg.get_positive("numerical.dt", 1e-4);
  const bool continuity = cfg.get_bool("continuity.run", true);
  const int cont_steps = cfg.get_positive_int("continuity.steps", 200);
  const double tol_dev = cfg.get_positive("tolerances.deviation", 1e-4) * opt.tolerance_scale;
  const double tol_peak = cfg.get_positive("tolerances.peak", 1e-4) * opt.tolerance_scale;
  const double tol_norm = cfg.get_positive("tolerances.norm_drift", 1e-10) * opt.tolerance_scale;
  const double tol_edrift =
      cfg.get_positive("tolerances.energy_drift", 1e-8) * opt.tolerance_scale;
  const double tol_cont = cfg.get_positive("tolerances.continuity", 1e-4) * opt.tolerance_scale;
  const double tol_ident =
      cfg.get_positive("tolerances.identity_agreement", 1e-10) * opt.tolerance_scale;
  const double tol_point =
      cfg.get_positive("tolerances.identity_pointwise", 1e-12) * opt.tolerance_scale;
  const double tol_parity = cfg.get_positive("tolerances.parity", 1e-12) * opt.tolerance_scale;
  if (coeffs.size() < 2)
    throw ConfigError("physical.coefficients: need at least two entries");

  ReportBundle b;
  const WellBeatResult beat = well_beat_audit(L, n, dt, coeffs);
  ReportRow br;
  br.label = "beat";
  br.set("beat_period", beat.beat_period);
  br.set("steps", beat.steps);
  br.set("peak_series", beat.peak_series);
  br.set("peak_measured", beat.peak_measured);
  br.set("max_deviation", beat.max_deviation);
  br.set("max_formal_deviation", beat.max_formal_deviation);
  br.set("norm_drift", beat.norm_drift);
  br.set("energy_drift_rel", beat.energy_drift / std::max(1.0, std::abs(beat.base_energy)));
  br.require_below("max_deviation", tol_dev);
  br.require_below("norm_drift", tol_norm * (beat.steps / 1000.0));
  br.require_below("energy_drift_rel", tol_edrift);

  if (coeffs.size() == 2) {
    // Closed-form peak rate for a two-level mix: the lone dipole beat term.
    const double c1 = coeffs[0] / std::sqrt(coeffs[0] * coeffs[0] + coeffs[1] * coeffs[1]);
    const double c2 = coeffs[1] / std::sqrt(coeffs[0] * coeffs[0] + coeffs[1] * coeffs[1]);
    const double peak_exact = 2.0 * std::abs(c1 * c2) *
                              (well_energy(2, L) - well_energy(1, L)) *
                              std::abs(well_position_element(1, 2, L));
    br.set("peak_exact", peak_exact);
    br.set("peak_gap_series", beat.peak_series - peak_exact);
    br.set("peak_gap_measured", beat.peak_measured - peak_exact);
    br.require_below("peak_gap_series", tol_peak);
    br.require_below("peak_gap_measured", tol_peak);
  }
  b.rows.push_back(std::move(br));

  // Dipole selection rule: elements between same-parity levels vanish, so
  // only odd level differences feed the beat series.
  const Grid1D g = Grid1D::dirichlet(L, n);
  const auto spec = make_spec(g, Potential::zero());
  const auto sol =
      solve_states(spec, g, std::max<int>(4, static_cast<int>(coeffs.size())));
  ReportRow parity;
  parity.label = "dipole_parity";
  const double e13 = std::abs(position_matrix_element(sol.states[0], sol.states[2]));
  const double e24 = std::abs(position_matrix_element(sol.states[1], sol.states[3]));
  parity.set("even_pair_max", std::max(e13, e24));
  parity.set("dipole_12", std::abs(position_matrix_element(sol.states[0], sol.states[1])));
  parity.set("dipole_12_exact", std::abs(well_position_element(1, 2, L)));
  parity.require_below("even_pair_max", tol_parity);
  b.rows.push_back(std::move(parity));

  if (continuity) {
    WaveFunction psi{g, Eigen::VectorXcd::Zero(g.npoints), 0.0, 0.0};
    for (std::size_t i = 0; i < coeffs.size(); ++i)
      psi.samples += coeffs[i] * sol.states[i].samples;
    psi.normalize();
    const Propagator prop(spec, g, dt);
    const Trajectory traj = prop.run(psi, cont_steps);

    ReportRow cr;
    cr.label = "continuity";
    cr.set("steps", cont_steps);
    cr.set("dt", dt);
    const double l2_x = continuity_residual(spec, ObservableSpec::position(), traj, 0.0);
    const double l2_id = continuity_residual(spec, ObservableSpec::identity(), traj, 0.0);
    const double l2_prob = probability_continuity_residual(traj, 0.0);
    cr.set("continuity_l2", l2_x);
    cr.set("identity_l2", l2_id);
    cr.set("probability_l2", l2_prob);
    cr.set("identity_gap", l2_id - l2_prob);

    const WaveFunction mid = traj.state(traj.size() / 2);
    const CurrentField jid = generalized_current(ObservableSpec::identity(), mid, 0.0);
    const Eigen::VectorXd jp = probability_current(mid, 0.0);
    double point_gap = 0.0;
    for (int j = 0; j < g.npoints; ++j)
      point_gap = std::max(point_gap, std::abs(jid.j.samples[j] - cplx(jp[j], 0.0)));
    cr.set("identity_pointwise_gap", point_gap);

    drift_terms(cr, traj, prop.op());
    cr.require_below("continuity_l2", tol_cont);
    cr.require_below("identity_gap", tol_ident);
    cr.require_below("identity_pointwise_gap", tol_point);
    cr.require_below("norm_drift", tol_norm * (cont_steps / 1000.0));
    cr.require_below("energy_drift_rel", tol_edrift);
    b.rows.push_back(std::move(cr));
  }
  return b;
}

inline ReportBundle run_berry(ConfigReader& cfg, const RunOptions& opt) {
  const std::string mtype = cfg.get_string("model.type", "monopole");
  FiniteModel model;
  if (mtype == "monopole") model = FiniteModel::two_level_monopole();
  else if (mtype == "planar") model = FiniteModel::two_level_planar();
  else throw ConfigError("model.type: unknown model '" + mtype + "'");

  const std::string shape = cfg.get_string("path.shape", "circle");
  const bool is_static = shape == "static";
  ParameterPath path;
  double default_period = 2000.0;
  if (is_static) {
    Eigen::Vector3d r0(cfg.get_double("path.r0x", 0.3), cfg.get_double("path.r0y", -0.2),
                       model.dim == 3 ? cfg.get_double("path.r0z", 0.8) : 0.0);
    const std::vector<double> probe_times = cfg.get_list("eval.times", {1.0});
    double tmax = 0.0;
    for (double t : probe_times) tmax = std::max(tmax, t);
    default_period = tmax + 2.0;
    path = ParameterPath::static_point(r0, cfg.get_positive("path.period", default_period));
  } else if (shape == "circle") {
    if (model.dim != 3) throw ConfigError("path.shape: circle needs the monopole model");
    const double radius = cfg.get_positive("path.radius", 1.0);
    const double polar = cfg.get_double("path.polar", M_PI / 3.0);
    const double period = cfg.get_positive("path.period", 2000.0);
    default_period = period;
    path = ParameterPath::circle(radius, polar, period);
  } else if (shape == "planar_circle") {
    if (model.dim != 2) throw ConfigError("path.shape: planar_circle needs the planar model");
    const double radius = cfg.get_positive("path.radius", 0.9);
    const double period = cfg.get_positive("path.period", 300.0);
    default_period = period;
    path = ParameterPath::planar_circle(radius, period);
  } else {
    throw ConfigError("path.shape: unknown shape '" + shape + "'");
  }

  const int band = cfg.get_int("numerical.band", 0);
  const double delta = cfg.get_positive("numerical.delta", is_static ? 2e-4 : 1e-3);
  const double dt = cfg.get_positive("numerical.dt", is_static ? 1e-3 : 1e-2);
  const double gauge_rate = cfg.get_double("numerical.gauge_rate", 0.0);
  const std::vector<double> times =
      cfg.get_list("eval.times", {is_static ? 1.0 : default_period / 40.0});
  const double tol_reality =
      cfg.get_positive("tolerances.reality", is_static ? 1e-8 : 1e-6) * opt.tolerance_scale;
  if (band < 0 || band >= 2) throw ConfigError("numerical.band: two-level models have bands 0 and 1");

  ReportBundle b;
  b.notes.push_back(
      "Scalar potential sign convention: v_pot is reported in the dynamical-"
      "phase-stripped gauge, where a pinned eigenstate reads v_pot = 0 and the "
      "connection is time independent. v_pot_raw is the unstripped reading; for "
      "a pinned eigenstate it equals +energy (not -energy), and on a driven "
      "path it equals energy minus rdot.a_conn to discretization order.");

  const std::vector<BerryPoint> pts =
      berry_fields(model, path, band, times, delta, dt, gauge_rate);
  for (const BerryPoint& p : pts) {
    ReportRow row;
    row.label = "t=" + format_double(p.time);
    row.set("time", p.time);
    row.set("energy", p.energy);
    row.set("v_pot", p.v_pot);
    row.set("v_pot_raw", p.v_pot_raw);
    row.set("balance_abs", p.balance_residual.norm());
    const double scale = p.mean_grad_h.norm();
    row.set("grad_scale", scale);
    row.set("balance_rel", p.balance_residual.norm() / std::max(1e-300, scale));
    row.set("reality_defect", p.reality_defect);
    row.set("ax", p.a_conn[0]);
    row.set("ay", p.a_conn[1]);
    row.set("az", p.a_conn[2]);
    row.set("bx", p.b_field[0]);
    row.set("by", p.b_field[1]);
    row.set("bz", p.b_field[2]);
    row.set("b_norm", p.b_field.norm());
    if (is_static) {
      row.require_below("balance_abs",
                        cfg.get_positive("tolerances.balance_abs", 1e-8) * opt.tolerance_scale);
    } else {
      row.require_below("balance_rel",
                        cfg.get_positive("tolerances.balance_rel", 1e-3) * opt.tolerance_scale);
    }
    row.require_below("reality_defect", tol_reality);
    b.rows.push_back(std::move(row));
  }

  if (cfg.has("adiabatic.samples")) {
    const int samples = cfg.get_positive_int("adiabatic.samples", 24);
    ReportRow ad;
    ad.label = "adiabatic";
    ad.set("connection_deviation", connection_deviation(model, path, band, dt, samples));
    if (cfg.has("tolerances.deviation"))
      ad.require_below("connection_deviation",
                       cfg.get_positive("tolerances.deviation", 1.0) * opt.tolerance_scale);
    b.rows.push_back(std::move(ad));
  }

  if (cfg.get_bool("loop.run", false)) {
    if (is_static) throw ConfigError("loop.run: a loop phase needs a closed path");
    const double loop_period = cfg.get_positive("loop.period", default_period);
    const double loop_dt = cfg.get_positive("loop.dt", dt);
    const double tol_loop = cfg.get_positive("tolerances.loop", 2e-2) * opt.tolerance_scale;
    ParameterPath loop_path;
    double target = M_PI;
    if (shape == "circle") {
      const double radius = cfg.get_positive("path.radius", 1.0);
      const double polar = cfg.get_double("path.polar", M_PI / 3.0);
      loop_path = ParameterPath::circle(radius, polar, loop_period);
      target = M_PI * (1.0 - std::cos(polar));
    } else {
      loop_path = ParameterPath::planar_circle(cfg.get_positive("path.radius", 0.9), loop_period);
    }
    const double phase = berry_phase_loop(model, loop_path, band, loop_dt);
    ReportRow lp;
    lp.label = "loop";
    lp.set("period", loop_period);
    lp.set("phase", phase);
    lp.set("target", target);
    lp.set("phase_gap", std::abs(phase) - target);
    lp.require_below("phase_gap", tol_loop);
    b.rows.push_back(std::move(lp));
  }
  return b;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

inline ReportBundle run_scenario(const ScenarioConfig& sc, const RunOptions& opt = {}) {
  ConfigReader cfg(sc.ini);
  const std::string kind = cfg.get_string("scenario.kind", "");
  if (kind.empty()) throw ConfigError("scenario.kind: required");

  ReportBundle b;
  try {
    if (kind == "free_particle") b = detail::run_free_particle(cfg, opt);
    else if (kind == "quantum_well") b = detail::run_quantum_well(cfg, opt);
    else if (kind == "bloch") b = detail::run_bloch(cfg, opt);
    else if (kind == "ab_ring") b = detail::run_ab_ring(cfg, opt);
    else if (kind == "superposition") b = detail::run_superposition(cfg, opt);
    else if (kind == "berry_two_level") b = detail::run_berry(cfg, opt);
    else throw ConfigError("scenario.kind: unknown scenario '" + kind + "'");
  } catch (const NumericalError& e) {
    throw NumericalError("scenario '" + kind + "': " + e.what());
  }

  cfg.finish();
  b.scenario = kind;
  b.tolerance_scale = opt.tolerance_scale;
  b.config_echo = cfg.effective();
  b.timestamp = utc_timestamp();
  return b;
}

// ---------------------------------------------------------------------------
// Parameter sweeps
// ---------------------------------------------------------------------------

// Runs the scenario once per value of the swept key, in parallel when asked,
// and concatenates the rows in sweep order with "key=value/" label prefixes.
// The swept key's entry in the config echo shows the whole value list.
inline ReportBundle run_sweep(const ScenarioConfig& sc, const RunOptions& opt = {}) {
  ConfigReader sweep_cfg(sc.ini);
  const std::string parameter = sweep_cfg.get_string("sweep.parameter", "");
  const std::string values_raw = sweep_cfg.get_string("sweep.values", "");
  if (parameter.empty() || values_raw.empty())
    throw ConfigError("sweep.parameter and sweep.values: required for a sweep run");
  if (parameter.rfind("sweep.", 0) == 0)
    throw ConfigError("sweep.parameter: cannot sweep a sweep key");

  std::vector<std::string> values;
  std::size_t pos = 0;
  while (pos <= values_raw.size()) {
    const std::size_t comma = values_raw.find(',', pos);
    const std::size_t end = comma == std::string::npos ? values_raw.size() : comma;
    const std::string item = detail::trim(values_raw.substr(pos, end - pos));
    if (item.empty()) throw ConfigError("sweep.values: empty entry in '" + values_raw + "'");
    values.push_back(item);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }

  ScenarioConfig base = sc;
  base.ini.values.erase("sweep.parameter");
  base.ini.values.erase("sweep.values");
  base.ini.lines.erase("sweep.parameter");
  base.ini.lines.erase("sweep.values");

  const std::string short_name = parameter.substr(parameter.find('.') + 1);
  std::vector<ReportBundle> parts(values.size());
  parallel_for(opt.jobs, static_cast<int>(values.size()), [&](int i) {
    ScenarioConfig run = base;
    run.ini.values[parameter] = values[i];
    run.ini.lines[parameter] = 0;
    parts[i] = run_scenario(run, opt);
  });

  ReportBundle out = parts.front();
  out.rows.clear();
  for (std::size_t i = 0; i < parts.size(); ++i) {
    for (ReportRow row : parts[i].rows) {
      row.label = short_name + "=" + values[i] + "/" + row.label;
      out.rows.push_back(std::move(row));
    }
  }
  out.config_echo[parameter] = values_raw;
  out.config_echo["sweep.parameter"] = parameter;
  out.timestamp = utc_timestamp();
  return out;
}

} // namespace qflux
