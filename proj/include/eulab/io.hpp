#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "eulab/illposedness.hpp"

namespace eulab {

/// Invalid or malformed configuration; `field` names the offending key.
class ConfigError : public std::runtime_error {
public:
  ConfigError(std::string field, const std::string& msg)
      : std::runtime_error(field.empty() ? msg : field + ": " + msg), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

private:
  std::string field_;
};

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Flat `key = value` store. Keys inside `[section]` become `section.key`;
/// lines starting with '#' or ';' are comments.
class ConfigFile {
public:
  static ConfigFile parse(std::istream& is) {
    ConfigFile cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      std::string t = trim(line);
      if (t.empty() || t[0] == '#' || t[0] == ';') continue;
      if (t.front() == '[') {
        if (t.back() != ']' || t.size() < 3)
          throw ConfigError("", "line " + std::to_string(lineno) + ": malformed section header");
        section = trim(t.substr(1, t.size() - 2));
        continue;
      }
      auto eq = t.find('=');
      if (eq == std::string::npos) throw ConfigError("", "line " + std::to_string(lineno) + ": expected key = value");
      std::string key = trim(t.substr(0, eq));
      if (key.empty()) throw ConfigError("", "line " + std::to_string(lineno) + ": empty key");
      if (!section.empty()) key = section + "." + key;
      if (cfg.values_.count(key)) throw ConfigError(key, "duplicate key");
      cfg.values_[key] = trim(t.substr(eq + 1));
    }
    return cfg;
  }

  static ConfigFile parse_string(const std::string& text) {
    std::istringstream is(text);
    return parse(is);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& v) { values_[key] = v; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::optional<std::string> get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    std::size_t used = 0;
    double x;
    try {
      x = std::stod(*v, &used);
    } catch (const std::exception&) {
      throw ConfigError(key, "not a number: '" + *v + "'");
    }
    if (used != v->size() || !std::isfinite(x)) throw ConfigError(key, "not a finite number: '" + *v + "'");
    return x;
  }

  long long get_int(const std::string& key, long long fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    std::size_t used = 0;
    long long x;
    try {
      x = std::stoll(*v, &used);
    } catch (const std::exception&) {
      throw ConfigError(key, "not an integer: '" + *v + "'");
    }
    if (used != v->size()) throw ConfigError(key, "not an integer: '" + *v + "'");
    return x;
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    if (v->empty() || v->find_first_not_of("0123456789") != std::string::npos)
      throw ConfigError(key, "not an unsigned integer: '" + *v + "'");
    try {
      return std::stoull(*v);
    } catch (const std::exception&) {
      throw ConfigError(key, "out of range: '" + *v + "'");
    }
  }

  /// Comma-separated numbers.
  std::vector<double> get_double_list(const std::string& key, const std::vector<double>& fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    std::vector<double> out;
    std::string item;
    std::istringstream is(*v);
    while (std::getline(is, item, ',')) {
      ConfigFile one;
      one.set(key, trim(item));
      out.push_back(one.get_double(key, 0.0));
    }
    if (out.empty()) throw ConfigError(key, "empty list");
    return out;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError(key, "not a boolean: '" + *v + "'");
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
  }

  /// Keys, sorted, one `key=value` per line.
  std::string canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
    return out;
  }

private:
  std::map<std::string, std::string> values_;
};

/// 64-bit FNV-1a as 16 hex digits.
inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// ---------------------------------------------------------------------------
// Run configuration

struct RunConfig {
  int dim = 2;
  int N = 64;
  double L = 2.0 * std::numbers::pi;
  double dt = 1e-3;
  double T = 1.0;
  std::string method = "rk4";
  double s = 2.5;
  double cutoff = 1.0;
  /// One separation series per entry.
  std::vector<double> R{0.1};
  int kmax = 8;
  std::uint64_t seed = 1;
  std::string out = "out";
  /// simulate: "taylor-green", "random" or "zero".
  std::string initial = "taylor-green";
  double amplitude = 0.5;
  /// simulate: "eulerian" or "lagrangian".
  std::string solver = "eulerian";
  /// illposedness: "composition", "translation", "solution-map" or "all".
  std::string experiment = "composition";
  bool keep_unresolved = false;
  int snapshot_every = 0;

  static RunConfig from(const ConfigFile& c) {
    RunConfig r;
    const auto known = r.to_config();
    for (const auto& [k, v] : c.values())
      if (!known.has(k)) throw ConfigError(k, "unknown key");
    r.dim = static_cast<int>(c.get_int("grid.dim", r.dim));
    r.N = static_cast<int>(c.get_int("grid.N", r.N));
    r.L = c.get_double("grid.L", r.L);
    r.dt = c.get_double("dynamics.dt", r.dt);
    r.T = c.get_double("dynamics.T", r.T);
    r.method = c.get_string("dynamics.method", r.method);
    r.cutoff = c.get_double("dynamics.cutoff", r.cutoff);
    r.solver = c.get_string("dynamics.solver", r.solver);
    r.s = c.get_double("sobolev.s", r.s);
    r.R = c.get_double_list("experiment.R", r.R);
    r.kmax = static_cast<int>(c.get_int("experiment.kmax", r.kmax));
    r.experiment = c.get_string("experiment.name", r.experiment);
    r.keep_unresolved = c.get_bool("experiment.keep_unresolved", r.keep_unresolved);
    r.seed = c.get_u64("data.seed", r.seed);
    r.initial = c.get_string("data.initial", r.initial);
    r.amplitude = c.get_double("data.amplitude", r.amplitude);
    r.out = c.get_string("output.dir", r.out);
    r.snapshot_every = static_cast<int>(c.get_int("output.snapshot_every", r.snapshot_every));
    return r;
  }

  /// Writes every field back in config syntax; the hash is taken over this.
  ConfigFile to_config() const {
    ConfigFile c;
    c.set("grid.dim", std::to_string(dim));
    c.set("grid.N", std::to_string(N));
    c.set("grid.L", format_double(L));
    c.set("dynamics.dt", format_double(dt));
    c.set("dynamics.T", format_double(T));
    c.set("dynamics.method", method);
    c.set("dynamics.cutoff", format_double(cutoff));
    c.set("dynamics.solver", solver);
    c.set("sobolev.s", format_double(s));
    std::string rs;
    for (std::size_t i = 0; i < R.size(); ++i) rs += (i ? "," : "") + format_double(R[i]);
    c.set("experiment.R", rs);
    c.set("experiment.kmax", std::to_string(kmax));
    c.set("experiment.name", experiment);
    c.set("experiment.keep_unresolved", keep_unresolved ? "true" : "false");
    c.set("data.seed", std::to_string(seed));
    c.set("data.initial", initial);
    c.set("data.amplitude", format_double(amplitude));
    c.set("output.dir", out);
    c.set("output.snapshot_every", std::to_string(snapshot_every));
    return c;
  }

  /// Hash of every key except output.dir, which does not change results.
  std::string hash() const {
    RunConfig c = *this;
    c.out.clear();
    return fnv1a_hex(c.to_config().canonical());
  }

  void validate() const {
    if (dim != 2 && dim != 3) throw ConfigError("grid.dim", "must be 2 or 3");
    if (N < 8 || (N & (N - 1)) != 0) throw ConfigError("grid.N", "must be a power of two >= 8");
    if (!(L > 0.0)) throw ConfigError("grid.L", "must be positive");
    if (!(dt > 0.0)) throw ConfigError("dynamics.dt", "must be positive");
    if (!(T > 0.0)) throw ConfigError("dynamics.T", "must be positive");
    if (method != "rk4" && method != "rk2") throw ConfigError("dynamics.method", "must be rk4 or rk2");
    if (!(cutoff > 0.0)) throw ConfigError("dynamics.cutoff", "must be positive");
    if (solver != "eulerian" && solver != "lagrangian")
      throw ConfigError("dynamics.solver", "must be eulerian or lagrangian");
    if (!(s >= 0.0)) throw ConfigError("sobolev.s", "must be nonnegative");
    if (R.empty()) throw ConfigError("experiment.R", "needs at least one value");
    for (double r : R)
      if (!(r > 0.0)) throw ConfigError("experiment.R", "values must be positive");
    if (kmax < 1) throw ConfigError("experiment.kmax", "must be at least 1");
    if (experiment != "composition" && experiment != "translation" && experiment != "solution-map" &&
        experiment != "all")
      throw ConfigError("experiment.name", "must be composition, translation, solution-map or all");
    if (initial != "taylor-green" && initial != "random" && initial != "zero")
      throw ConfigError("data.initial", "must be taylor-green, random or zero");
    if (initial == "taylor-green" && dim != 2) throw ConfigError("data.initial", "taylor-green needs dim = 2");
    if (!(amplitude >= 0.0)) throw ConfigError("data.amplitude", "must be nonnegative");
    if (out.empty()) throw ConfigError("output.dir", "must not be empty");
    if (snapshot_every < 0) throw ConfigError("output.snapshot_every", "must be nonnegative");
  }

  StepperConfig stepper() const {
    StepperConfig c;
    c.dt = dt;
    c.method = method == "rk2" ? StepMethod::RK2 : StepMethod::RK4;
    c.s_monitor = s;
    c.cutoff = cutoff;
    return c;
  }
};

// ---------------------------------------------------------------------------
// CSV

/// Writes `# config_hash=<hash>` and then the header row.
class CsvWriter {
public:
  CsvWriter(std::ostream& os, const std::vector<std::string>& columns, const std::string& config_hash,
            const std::vector<std::pair<std::string, std::string>>& notes = {})
      : os_(os), width_(columns.size()) {
    os_ << "# config_hash=" << config_hash << "\n";
    for (const auto& [k, v] : notes) os_ << "# " << k << "=" << v << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) os_ << (i ? "," : "") << columns[i];
    os_ << "\n";
  }

  void row(const std::vector<double>& values) {
    if (values.size() != width_) throw std::invalid_argument("CsvWriter: row width mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) os_ << (i ? "," : "") << format_double(values[i]);
    os_ << "\n";
  }

private:
  std::ostream& os_;
  std::size_t width_;
};

inline void write_series_csv(std::ostream& os, const SeparationSeries& s, const std::string& config_hash) {
  std::vector<std::string> cols{"k", "input_gap", "output_gap"};
  cols.insert(cols.end(), s.aux_names.begin(), s.aux_names.end());
  cols.push_back("resolved");
  auto notes = s.metadata;
  notes.insert(notes.begin(), {"construction", s.construction});
  CsvWriter w(os, cols, config_hash, notes);
  for (const auto& r : s.rows) {
    std::vector<double> v{static_cast<double>(r.k), r.input_gap, r.output_gap};
    v.insert(v.end(), r.aux.begin(), r.aux.end());
    v.push_back(r.resolved ? 1.0 : 0.0);
    w.row(v);
  }
}

inline void write_diagnostics_csv(std::ostream& os, const std::vector<EulerDiagnostics>& d,
                                  const std::string& config_hash) {
  CsvWriter w(os, {"t", "energy", "hs_norm", "div_drift"}, config_hash);
  for (const auto& r : d) w.row({r.t, r.energy, r.hs_norm, r.div_drift});
}

// ---------------------------------------------------------------------------
// SVG

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};

/// Log-log polyline plot with decade grid lines. Points with a nonpositive
/// coordinate are skipped.
inline void write_loglog_svg(std::ostream& os, const std::string& title, const std::string& xlabel,
                             const std::string& ylabel, const std::vector<PlotSeries>& series) {
  const double W = 640, H = 440, ml = 70, mr = 150, mt = 40, mb = 50;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
      if (s.x[i] > 0 && s.y[i] > 0) {
        x0 = std::min(x0, std::log10(s.x[i]));
        x1 = std::max(x1, std::log10(s.x[i]));
        y0 = std::min(y0, std::log10(s.y[i]));
        y1 = std::max(y1, std::log10(s.y[i]));
      }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  x0 = std::floor(x0), x1 = std::max(std::ceil(x1), x0 + 1);
  y0 = std::floor(y0), y1 = std::max(std::ceil(y1), y0 + 1);
  auto px = [&](double lx) { return ml + (lx - x0) / (x1 - x0) * (W - ml - mr); };
  auto py = [&](double ly) { return H - mb - (ly - y0) / (y1 - y0) * (H - mt - mb); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  for (int d = static_cast<int>(x0); d <= static_cast<int>(x1); ++d)
    os << "<line x1=\"" << px(d) << "\" y1=\"" << py(y0) << "\" x2=\"" << px(d) << "\" y2=\"" << py(y1)
       << "\" stroke=\"#ddd\"/><text x=\"" << px(d) << "\" y=\"" << H - mb + 18
       << "\" text-anchor=\"middle\" font-size=\"11\">1e" << d << "</text>\n";
  for (int d = static_cast<int>(y0); d <= static_cast<int>(y1); ++d)
    os << "<line x1=\"" << px(x0) << "\" y1=\"" << py(d) << "\" x2=\"" << px(x1) << "\" y2=\"" << py(d)
       << "\" stroke=\"#ddd\"/><text x=\"" << ml - 6 << "\" y=\"" << py(d) + 4
       << "\" text-anchor=\"end\" font-size=\"11\">1e" << d << "</text>\n";
  os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << W - ml - mr << "\" height=\"" << H - mt - mb
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\" font-size=\"12\">"
     << xlabel << "</text>\n";
  os << "<text x=\"16\" y=\"" << (mt + H - mb) / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
     << (mt + H - mb) / 2 << ")\">" << ylabel << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* col = colors[k % 6];
    os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
      if (s.x[i] > 0 && s.y[i] > 0) os << px(std::log10(s.x[i])) << "," << py(std::log10(s.y[i])) << " ";
    os << "\"/>\n";
    os << "<text x=\"" << W - mr + 10 << "\" y=\"" << mt + 16 * (k + 1) << "\" font-size=\"12\" fill=\"" << col
       << "\">" << s.label << "</text>\n";
  }
  os << "</svg>\n";
}

inline void write_series_svg(std::ostream& os, const SeparationSeries& s) {
  PlotSeries in{"input gap", {}, {}}, out{"output gap", {}, {}};
  for (const auto& r : s.rows) {
    in.x.push_back(r.k);
    in.y.push_back(r.input_gap);
    out.x.push_back(r.k);
    out.y.push_back(r.output_gap);
  }
  write_loglog_svg(os, s.construction + " separation", "k", "H^s gap", {in, out});
}

} // namespace eulab
