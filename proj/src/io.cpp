#include "panelmix/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace panelmix {

namespace {

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') quoted = !quoted;
    if (c == delim && !quoted) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

bool parse_double(const std::string& s, double& v) {
  if (s.empty()) return false;
  const char* b = s.data();
  const char* e = b + s.size();
  if (*b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  return ec == std::errc() && ptr == e && std::isfinite(v);
}

// Numeric keys sort numerically, anything else lexicographically.
struct KeyLess {
  bool numeric;
  bool operator()(const std::string& a, const std::string& b) const {
    if (numeric) {
      double x = 0, y = 0;
      parse_double(a, x);
      parse_double(b, y);
      if (x != y) return x < y;
    }
    return a < b;
  }
};

bool all_numeric(const std::vector<std::string>& keys) {
  double v;
  return std::all_of(keys.begin(), keys.end(), [&](const std::string& k) { return parse_double(k, v); });
}

int column_index(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw InputError("missing column '" + name + "'");
  return static_cast<int>(it - header.begin());
}

double finite_or_null(double v) { return v; }

nlohmann::json number(double v) {
  if (std::isfinite(v)) return finite_or_null(v);
  if (std::isnan(v)) return nullptr;
  return v > 0 ? "inf" : "-inf";
}

}  // namespace

PanelDataset ingest(const std::string& path, const IngestSpec& spec) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return ingest(in, spec);
}

PanelDataset ingest(std::istream& is, const IngestSpec& spec) {
  std::string line;
  std::vector<std::string> header;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    header = split(line, spec.delimiter);
    break;
  }
  if (header.empty()) throw InputError("input has no header row");

  const int c_unit = column_index(header, spec.unit_col);
  const int c_period = column_index(header, spec.period_col);
  std::vector<int> value_cols{column_index(header, spec.y_col)};
  for (const auto& c : spec.x_cols) value_cols.push_back(column_index(header, c));
  for (const auto& c : spec.z_cols) value_cols.push_back(column_index(header, c));

  // unit -> period -> values (y, x..., z...)
  std::map<std::string, std::map<std::string, std::vector<double>>> cells;
  int row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto f = split(line, spec.delimiter);
    if (f.size() != header.size()) {
      std::ostringstream os;
      os << "row " << row << " has " << f.size() << " fields, expected " << header.size();
      throw InputError(os.str());
    }
    std::vector<double> vals;
    for (int c : value_cols) {
      double v = 0;
      if (!parse_double(f[c], v)) {
        std::ostringstream os;
        os << "non-numeric value '" << f[c] << "' at row " << row << ", column '" << header[c] << "'";
        throw InputError(os.str());
      }
      vals.push_back(v);
    }
    auto& periods = cells[f[c_unit]];
    if (!periods.emplace(f[c_period], std::move(vals)).second) {
      std::ostringstream os;
      os << "duplicate observation for unit '" << f[c_unit] << "', period '" << f[c_period] << "' at row "
         << row;
      throw InputError(os.str());
    }
  }
  if (cells.empty()) throw InputError("input has no data rows");

  std::vector<std::string> units;
  std::vector<std::string> periods;
  for (const auto& [u, ps] : cells) {
    units.push_back(u);
    for (const auto& [p, v] : ps) periods.push_back(p);
  }
  std::sort(periods.begin(), periods.end());
  periods.erase(std::unique(periods.begin(), periods.end()), periods.end());
  std::sort(units.begin(), units.end(), KeyLess{all_numeric(units)});
  std::sort(periods.begin(), periods.end(), KeyLess{all_numeric(periods)});

  const int n = static_cast<int>(units.size());
  const int T = static_cast<int>(periods.size());
  const int q = static_cast<int>(spec.x_cols.size());
  const int p = static_cast<int>(spec.z_cols.size());
  PanelDataset d;
  d.y.resize(n, T);
  d.x.assign(q, Eigen::MatrixXd(n, T));
  d.z.assign(p, Eigen::MatrixXd(n, T));
  d.unit_ids = units;
  for (int i = 0; i < n; ++i) {
    const auto& ps = cells.at(units[i]);
    if (static_cast<int>(ps.size()) != T) {
      std::ostringstream os;
      os << "unbalanced panel: unit '" << units[i] << "' has " << ps.size() << " periods, expected " << T;
      throw InputError(os.str());
    }
    for (int t = 0; t < T; ++t) {
      auto it = ps.find(periods[t]);
      if (it == ps.end())
        throw InputError("unbalanced panel: unit '" + units[i] + "' lacks period '" + periods[t] + "'");
      const auto& v = it->second;
      d.y(i, t) = v[0];
      for (int k = 0; k < q; ++k) d.x[k](i, t) = v[1 + k];
      for (int k = 0; k < p; ++k) d.z[k](i, t) = v[1 + q + k];
    }
  }
  d.validate();
  return d;
}

void write_panel_csv(const PanelDataset& data, std::ostream& os, char delimiter) {
  os << "unit" << delimiter << "period" << delimiter << "y";
  for (int k = 0; k < data.q(); ++k) os << delimiter << "x" << k + 1;
  for (int k = 0; k < data.p(); ++k) os << delimiter << "z" << k + 1;
  os << "\n";
  const auto old = os.precision(std::numeric_limits<double>::max_digits10);
  for (int i = 0; i < data.n(); ++i) {
    const std::string id =
        static_cast<int>(data.unit_ids.size()) == data.n() ? data.unit_ids[i] : std::to_string(i + 1);
    for (int t = 0; t < data.T(); ++t) {
      os << id << delimiter << t + 1 << delimiter << data.y(i, t);
      for (int k = 0; k < data.q(); ++k) os << delimiter << data.x[k](i, t);
      for (int k = 0; k < data.p(); ++k) os << delimiter << data.z[k](i, t);
      os << "\n";
    }
  }
  os.precision(old);
}

nlohmann::json to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) r.push_back(number(m(i, j)));
    rows.push_back(r);
  }
  return rows;
}

nlohmann::json to_json(const MixtureParams& p) {
  nlohmann::json j;
  j["M"] = p.M();
  j["alpha"] = std::vector<double>(p.alpha.data(), p.alpha.data() + p.alpha.size());
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : p.components) {
    comps.push_back({{"mu", c.mu},
                     {"sigma_sq", c.sigma_sq},
                     {"sigma", std::sqrt(c.sigma_sq)},
                     {"beta", std::vector<double>(c.beta.data(), c.beta.data() + c.beta.size())}});
  }
  j["components"] = comps;
  j["gamma"] = std::vector<double>(p.gamma.data(), p.gamma.data() + p.gamma.size());
  return j;
}

nlohmann::json to_json(const FitResult& f, bool with_weights) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["params"] = to_json(f.params);
  j["loglik"] = number(f.loglik);
  j["penalized_loglik"] = number(f.penalized_loglik);
  j["penalty_value"] = number(f.penalty_value);
  j["iterations"] = f.iterations;
  j["converged"] = f.converged;
  j["ridge_used"] = f.ridge_used;
  j["clamp_binding"] = f.clamp_binding;
  if (with_weights) j["weights"] = to_json(f.weights);
  if (!f.trace.empty()) j["trace"] = f.trace;
  return j;
}

std::string stars(const TestOutcome& t) {
  if (t.p_source == PSource::none) return "";
  if (t.rejects(0.01)) return "***";
  if (t.rejects(0.05)) return "**";
  if (t.rejects(0.10)) return "*";
  return "";
}

nlohmann::json to_json(const TestOutcome& t) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["M0"] = t.M0;
  j["method"] = to_string(t.method);
  j["statistic"] = number(t.statistic);
  nlohmann::json ls = nlohmann::json::array();
  for (double v : t.local_stats) ls.push_back(number(v));
  j["local_stats"] = ls;
  j["best_h"] = t.best_h;
  nlohmann::json crit = nlohmann::json::object();
  for (const auto& [lvl, cv] : t.crit) {
    std::ostringstream key;
    key << lvl;
    crit[key.str()] = number(cv);
  }
  j["critical_values"] = crit;
  j["p_value"] = number(t.p_value);
  j["p_source"] = to_string(t.p_source);
  j["stars"] = stars(t);
  j["null_fit"] = to_json(t.null_fit);
  j["best_alt_fit"] = to_json(t.best_alt_fit);
  const auto& d = t.diagnostics;
  j["diagnostics"] = {{"a_n", d.a_n},
                      {"a_n_source", d.an_source},
                      {"omega", d.omega},
                      {"tau_set", d.tau_set},
                      {"K", d.K},
                      {"epsilon", d.epsilon},
                      {"null_converged", d.null_converged},
                      {"cells_total", d.cells_total},
                      {"dropped_cells", d.dropped_cells},
                      {"complementarity_failures", d.complementarity_failures},
                      {"bootstrap_dropped", d.bootstrap_dropped}};
  if (t.reference) j["reference"] = {{"n_draws", t.reference->n_draws}, {"seed", t.reference->seed}};
  return j;
}

nlohmann::json to_json(const SelectionResult& s) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["method"] = to_string(s.method);
  j["M_hat"] = s.M_hat;
  j["censored"] = s.censored;
  j["level_schedule"] = s.level_schedule;
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& st : s.per_M)
    steps.push_back({{"M", st.M},
                     {"statistic", number(st.statistic)},
                     {"threshold", number(st.threshold)},
                     {"p_value", number(st.p_value)},
                     {"decision", st.decision}});
  j["per_M"] = steps;
  j["warnings"] = s.warnings;
  return j;
}

nlohmann::json to_json(const UnboundednessReport& r) {
  return {{"schema_version", kSchemaVersion},
          {"lr_degenerate", number(r.lr_degenerate)},
          {"lr_penalized", number(r.lr_penalized)},
          {"i_star", r.i_star},
          {"s2_star", r.s2_star},
          {"sigma0_sq", r.sigma0_sq},
          {"a_n", r.a_n}};
}

}  // namespace panelmix
