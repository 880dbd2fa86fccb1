#include "conmix/io.hpp"

#include "conmix/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace conmix {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  std::string out(s.substr(b, e - b));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
      cur += ch;
    } else if (ch == ',' && !quoted) {
      cells.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  cells.push_back(trim(cur));
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

bool parse_int(const std::string& s, int& out) {
  double d = 0.0;
  if (!parse_double(s, d) || d != std::floor(d) || std::abs(d) > 1e9) return false;
  out = static_cast<int>(d);
  return true;
}

std::string at_line(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

bool all_integer_ids(const std::vector<std::string>& ids) {
  for (const auto& id : ids) {
    if (id.empty()) return false;
    std::size_t i = id[0] == '-' ? 1 : 0;
    if (i == id.size()) return false;
    for (; i < id.size(); ++i) {
      if (!std::isdigit(static_cast<unsigned char>(id[i]))) return false;
    }
  }
  return true;
}

// ---- JSON number helpers -------------------------------------------------

json num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double get_num(const json& j, const std::string& what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw ValidationError("expected a number for '" + what + "'");
}

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

json mat_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(num(m(i, k)));
    a.push_back(row);
  }
  return a;
}

Eigen::VectorXd json_vec(const json& j, const std::string& what) {
  if (!j.is_array()) throw ValidationError("expected an array for '" + what + "'");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = get_num(j[i], what);
  return v;
}

Eigen::MatrixXd json_mat(const json& j, const std::string& what) {
  if (j.is_number()) return Eigen::MatrixXd::Constant(1, 1, j.get<double>());
  if (!j.is_array()) throw ValidationError("expected a matrix for '" + what + "'");
  const std::size_t r = j.size();
  if (r == 0) return Eigen::MatrixXd(0, 0);
  if (j[0].is_number() && r == 1) return Eigen::MatrixXd::Constant(1, 1, j[0].get<double>());
  const std::size_t c = j[0].size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  for (std::size_t i = 0; i < r; ++i) {
    if (!j[i].is_array() || j[i].size() != c) throw ValidationError("ragged matrix for '" + what + "'");
    for (std::size_t k = 0; k < c; ++k) m(i, k) = get_num(j[i][k], what);
  }
  return m;
}

std::vector<std::string> json_strings(const json& j, const std::string& what) {
  if (j.is_string()) return {j.get<std::string>()};
  if (!j.is_array()) throw ValidationError("expected a list of names for '" + what + "'");
  std::vector<std::string> out;
  for (const auto& e : j) {
    if (!e.is_string()) throw ValidationError("expected a list of names for '" + what + "'");
    out.push_back(e.get<std::string>());
  }
  return out;
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError("malformed JSON in " + what + ": " + e.what());
  }
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) throw ValidationError("unknown key '" + it.key() + "' in " + where);
  }
}

const std::set<std::string> kSpecKeys = {"family",
                                         "fixed",
                                         "random",
                                         "overdispersion",
                                         "constraint",
                                         "fixed_beta",
                                         "weibull_shape",
                                         "weibull_shape_free",
                                         "per_occasion_overdispersion",
                                         "overdispersion_groups",
                                         "beta_precision"};

template <class T> T typed(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ValidationError("wrong type for '" + key + "'");
  }
}

void apply_spec(const json& j, ModelSpec& spec) {
  try {
    if (j.contains("family")) spec.family = family_from_string(typed<std::string>(j["family"], "family"));
    if (j.contains("fixed")) spec.fixed_effects = json_strings(j["fixed"], "fixed");
    if (j.contains("random")) spec.random_effects = json_strings(j["random"], "random");
    if (j.contains("overdispersion")) {
      spec.overdispersion = overdispersion_from_string(typed<std::string>(j["overdispersion"], "overdispersion"));
    }
    if (j.contains("constraint")) spec.constraint = constraint_from_string(typed<std::string>(j["constraint"], "constraint"));
  } catch (const ValidationError&) {
    throw;
  } catch (const Error& e) {
    throw ValidationError(e.what());
  }
  if (j.contains("fixed_beta")) spec.fixed_beta = get_num(j["fixed_beta"], "fixed_beta");
  if (j.contains("weibull_shape")) spec.weibull_shape = get_num(j["weibull_shape"], "weibull_shape");
  if (j.contains("weibull_shape_free")) spec.weibull_shape_free = typed<bool>(j["weibull_shape_free"], "weibull_shape_free");
  if (j.contains("per_occasion_overdispersion")) {
    spec.per_occasion_overdispersion = typed<bool>(j["per_occasion_overdispersion"], "per_occasion_overdispersion");
  }
  if (j.contains("overdispersion_groups")) spec.overdispersion_groups = typed<int>(j["overdispersion_groups"], "overdispersion_groups");
  if (j.contains("beta_precision")) spec.beta_precision = get_num(j["beta_precision"], "beta_precision");
}

json spec_json(const ModelSpec& spec) {
  json j;
  j["family"] = std::string(to_string(spec.family));
  j["fixed"] = spec.fixed_effects;
  j["random"] = spec.random_effects;
  j["overdispersion"] = std::string(to_string(spec.overdispersion));
  j["constraint"] = std::string(to_string(spec.constraint));
  j["fixed_beta"] = num(spec.fixed_beta);
  j["weibull_shape"] = num(spec.weibull_shape);
  j["weibull_shape_free"] = spec.weibull_shape_free;
  j["per_occasion_overdispersion"] = spec.per_occasion_overdispersion;
  j["overdispersion_groups"] = spec.overdispersion_groups;
  j["beta_precision"] = num(spec.beta_precision);
  return j;
}

Profile parse_profile(const json& j) {
  if (!j.is_object()) throw ValidationError("profile must be an object");
  Profile p;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "time_name") {
      p.time_name = typed<std::string>(it.value(), "time_name");
    } else {
      p.values[it.key()] = get_num(it.value(), it.key());
    }
  }
  return p;
}

std::vector<double> read_csv_column(const std::string& path, const std::string& column) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open covariate file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path + ": empty file");
  const auto header = split_csv(line);
  const auto it = std::find(header.begin(), header.end(), column);
  if (it == header.end()) throw ValidationError(path + ": no column '" + column + "'");
  const std::size_t c = static_cast<std::size_t>(it - header.begin());
  std::vector<double> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    double v = 0.0;
    if (c >= cells.size() || !parse_double(cells[c], v)) {
      throw ValidationError(at_line(path, lineno) + "unparseable value in column '" + column + "'");
    }
    out.push_back(v);
  }
  return out;
}

SimDesign parse_simulation(const json& j, std::uint64_t seed) {
  reject_unknown(j, {"subjects", "occasions", "covariates", "seed"}, "simulation");
  SimDesign d;
  d.seed = seed;
  if (j.contains("seed")) d.seed = typed<std::uint64_t>(j["seed"], "seed");
  if (j.contains("subjects")) d.subjects = typed<int>(j["subjects"], "subjects");
  if (j.contains("occasions")) {
    if (j["occasions"].is_array()) {
      d.schedule = typed<std::vector<int>>(j["occasions"], "occasions");
    } else {
      d.occasions = typed<int>(j["occasions"], "occasions");
    }
  }
  if (j.contains("covariates")) {
    for (const auto& c : j["covariates"]) {
      reject_unknown(c, {"name", "kind", "value", "p", "file", "column"}, "simulation covariate");
      if (!c.contains("name")) throw ValidationError("simulation covariate needs a name");
      const std::string name = typed<std::string>(c["name"], "name");
      const std::string kind = c.contains("kind") ? typed<std::string>(c["kind"], "kind") : "constant";
      if (kind == "constant") {
        d.covariates.push_back(CovariateGenerator::constant(name, c.contains("value") ? get_num(c["value"], "value") : 0.0));
      } else if (kind == "time") {
        d.covariates.push_back(CovariateGenerator::time(name));
      } else if (kind == "bernoulli") {
        const double p = c.contains("p") ? get_num(c["p"], "p") : c.contains("value") ? get_num(c["value"], "value") : 0.5;
        d.covariates.push_back(CovariateGenerator::bernoulli(name, p));
      } else if (kind == "column") {
        if (!c.contains("file")) throw ValidationError("column covariate '" + name + "' needs a file");
        const std::string col = c.contains("column") ? typed<std::string>(c["column"], "column") : name;
        d.covariates.push_back(CovariateGenerator::from_column(name, read_csv_column(typed<std::string>(c["file"], "file"), col)));
      } else {
        throw ValidationError("unknown covariate kind '" + kind + "'");
      }
    }
  }
  return d;
}

Params params_from_json(const ModelSpec& spec, const json& j0) {
  const json& j = j0.contains("params") && j0["params"].is_object() ? j0["params"] : j0;
  if (!j.is_object()) throw ValidationError("params must be an object");
  reject_unknown(j, {"xi", "D", "d", "alpha", "beta", "var_theta", "pi0", "nu", "rho", "sigma"}, "params");
  Params p = default_params(spec);
  if (j.contains("xi")) {
    const json& x = j["xi"];
    if (x.is_object()) {
      for (auto it = x.begin(); it != x.end(); ++it) {
        const auto pos = std::find(spec.fixed_effects.begin(), spec.fixed_effects.end(), it.key());
        if (pos == spec.fixed_effects.end()) throw ValidationError("params: '" + it.key() + "' is not a fixed effect");
        p.xi(pos - spec.fixed_effects.begin()) = get_num(it.value(), it.key());
      }
    } else {
      p.xi = json_vec(x, "xi");
    }
  }
  if (j.contains("D") && j.contains("d")) throw ValidationError("params: give either D or d");
  if (j.contains("D")) p.D = json_mat(j["D"], "D");
  if (j.contains("d")) p.D = json_mat(j["d"], "d");
  if (p.xi.size() != spec.p()) throw ValidationError("params: xi has the wrong length");
  if (p.D.rows() != spec.q() || p.D.cols() != spec.q()) throw ValidationError("params: D has the wrong shape");
  auto per_group = [&](const json& v, const std::string& what) {
    std::vector<double> out;
    if (v.is_array()) {
      for (const auto& e : v) out.push_back(get_num(e, what));
    } else {
      out.assign(p.alpha.size(), get_num(v, what));
    }
    if (out.size() != p.alpha.size()) throw ValidationError("params: '" + what + "' has the wrong length");
    return out;
  };
  if (spec.gamma_effects()) {
    const bool has_a = j.contains("alpha"), has_b = j.contains("beta"), has_v = j.contains("var_theta");
    if (has_a) p.alpha = per_group(j["alpha"], "alpha");
    if (has_b) p.beta = per_group(j["beta"], "beta");
    if (has_v) {
      const auto v = per_group(j["var_theta"], "var_theta");
      for (std::size_t g = 0; g < v.size(); ++g) {
        if (!(v[g] > 0.0)) throw ValidationError("params: var_theta must be positive");
        switch (spec.constraint) {
        case GammaConstraint::MeanOne:
          p.alpha[g] = 1.0 / v[g];
          p.beta[g] = v[g];
          break;
        case GammaConstraint::Exponential:
          p.alpha[g] = 1.0;
          p.beta[g] = std::sqrt(v[g]);
          break;
        case GammaConstraint::FixedBeta:
          p.beta[g] = spec.fixed_beta;
          p.alpha[g] = v[g] / (spec.fixed_beta * spec.fixed_beta);
          break;
        case GammaConstraint::Unconstrained:
          if (!has_b) throw ValidationError("params: var_theta with free alpha and beta also needs beta");
          p.alpha[g] = v[g] / (p.beta[g] * p.beta[g]);
          break;
        }
      }
    } else if (spec.constraint == GammaConstraint::MeanOne && has_a && !has_b) {
      for (std::size_t g = 0; g < p.alpha.size(); ++g) p.beta[g] = 1.0 / p.alpha[g];
    } else if (spec.constraint == GammaConstraint::MeanOne && has_b && !has_a) {
      for (std::size_t g = 0; g < p.beta.size(); ++g) p.alpha[g] = 1.0 / p.beta[g];
    }
  } else if (j.contains("alpha") || j.contains("beta") || j.contains("var_theta")) {
    if (!spec.beta_effects()) throw ValidationError("params: the model has no gamma effects");
  }
  if (spec.beta_effects()) {
    if (j.contains("alpha") && j.contains("beta")) {
      const double a = get_num(j["alpha"], "alpha"), b = get_num(j["beta"], "beta");
      p.pi0 = a / (a + b);
      p.nu = a + b;
    }
  }
  if (j.contains("pi0")) p.pi0 = get_num(j["pi0"], "pi0");
  if (j.contains("nu")) p.nu = get_num(j["nu"], "nu");
  if (j.contains("rho")) p.rho = get_num(j["rho"], "rho");
  if (j.contains("sigma")) p.sigma = get_num(j["sigma"], "sigma");
  return p;
}

} // namespace

// ---- datasets -------------------------------------------------------------

Dataset parse_dataset(std::istream& in, FamilyKind family, const std::string& source) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line = line.substr(3);
    if (!trim(line).empty()) {
      header = split_csv(line);
      break;
    }
  }
  if (header.empty()) throw ValidationError(source + ": missing header row");
  auto find = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int c_id = find("id"), c_occ = find("occasion"), c_y = find("y");
  for (const auto& [name, col] : {std::pair{"id", c_id}, {"occasion", c_occ}, {"y", c_y}}) {
    if (col < 0) throw ValidationError(source + ": missing required column '" + name + "'");
  }
  const int c_status = find("status");
  if (family == FamilyKind::Weibull && c_status < 0) {
    throw ValidationError(source + ": Weibull data need a status column (all 1; censoring out of scope)");
  }
  {
    std::set<std::string> seen;
    for (const auto& h : header) {
      if (h.empty()) throw ValidationError(source + ": empty column name in header");
      if (!seen.insert(h).second) throw ValidationError(source + ": duplicate column '" + h + "'");
    }
  }
  std::vector<int> cov_cols;
  Dataset raw;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    if (c != c_id && c != c_occ && c != c_y) {
      cov_cols.push_back(c);
      raw.covariate_names.push_back(header[c]);
    }
  }
  raw.covariates.resize(cov_cols.size());
  std::vector<std::size_t> lines;
  std::map<std::pair<std::string, int>, std::size_t> keys;
  const FamilyMember member{family, 1.0};
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw ValidationError(at_line(source, lineno) + "expected " + std::to_string(header.size()) + " fields, found " +
                            std::to_string(cells.size()));
    }
    const std::string& id = cells[c_id];
    if (id.empty()) throw ValidationError(at_line(source, lineno) + "empty id");
    int occ = 0;
    if (!parse_int(cells[c_occ], occ)) {
      throw ValidationError(at_line(source, lineno) + "unparseable occasion '" + cells[c_occ] + "'");
    }
    double y = 0.0;
    if (!parse_double(cells[c_y], y) || !std::isfinite(y)) {
      throw ValidationError(at_line(source, lineno) + "unparseable y '" + cells[c_y] + "'");
    }
    if (!in_support(member, y)) {
      throw ValidationError(at_line(source, lineno) + "y = " + cells[c_y] + " is outside the support of the " +
                            std::string(to_string(family)) + " family");
    }
    const auto [it, fresh] = keys.emplace(std::pair{id, occ}, lineno);
    if (!fresh) {
      throw ValidationError(at_line(source, lineno) + "duplicate (id, occasion) = (" + id + ", " +
                            std::to_string(occ) + "), first seen at line " + std::to_string(it->second));
    }
    raw.id.push_back(id);
    raw.occasion.push_back(occ);
    raw.y.push_back(y);
    for (std::size_t k = 0; k < cov_cols.size(); ++k) {
      double v = 0.0;
      if (!parse_double(cells[cov_cols[k]], v) || !std::isfinite(v)) {
        throw ValidationError(at_line(source, lineno) + "unparseable value '" + cells[cov_cols[k]] + "' in column '" +
                              header[cov_cols[k]] + "'");
      }
      if (family == FamilyKind::Weibull && cov_cols[k] == c_status && v != 1.0) {
        throw ValidationError(at_line(source, lineno) +
                              "status must be 1 (event observed); censoring out of scope");
      }
      raw.covariates[k].push_back(v);
    }
    lines.push_back(lineno);
  }
  if (raw.rows() == 0) throw ValidationError(source + ": no data rows");

  std::vector<std::size_t> order(raw.rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const bool numeric = all_integer_ids(raw.id);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ia = raw.id[a];
    const auto& ib = raw.id[b];
    if (ia != ib) {
      if (numeric) {
        const long long na = std::stoll(ia), nb = std::stoll(ib);
        if (na != nb) return na < nb;
      }
      return ia < ib;
    }
    return raw.occasion[a] < raw.occasion[b];
  });
  Dataset out;
  out.covariate_names = raw.covariate_names;
  out.covariates.resize(raw.covariates.size());
  for (std::size_t r : order) {
    out.id.push_back(raw.id[r]);
    out.occasion.push_back(raw.occasion[r]);
    out.y.push_back(raw.y[r]);
    for (std::size_t k = 0; k < raw.covariates.size(); ++k) out.covariates[k].push_back(raw.covariates[k][r]);
  }
  return out;
}

Dataset read_dataset(const std::string& path, FamilyKind family) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open data file '" + path + "'");
  return parse_dataset(in, family, path);
}

void write_dataset(std::ostream& out, const Dataset& data) {
  out << "id,occasion,y";
  for (const auto& n : data.covariate_names) out << ',' << n;
  out << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t r = 0; r < data.rows(); ++r) {
    out << data.id[r] << ',' << data.occasion[r] << ',' << data.y[r];
    for (const auto& col : data.covariates) out << ',' << col[r];
    out << '\n';
  }
}

void write_dataset(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  write_dataset(out, data);
}

// ---- configuration --------------------------------------------------------

std::vector<double> parse_grid(std::string_view text) {
  const std::string s = trim(text);
  std::vector<double> out;
  if (s.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ':')) parts.push_back(trim(part));
    double a = 0, b = 0, step = 1;
    if ((parts.size() != 2 && parts.size() != 3) || !parse_double(parts[0], a) || !parse_double(parts[1], b) ||
        (parts.size() == 3 && !parse_double(parts[2], step)) || !(step > 0.0) || b < a) {
      throw ValidationError("malformed grid '" + s + "' (expected a:b or a:b:step)");
    }
    const auto count = static_cast<long long>(std::floor((b - a) / step + 1e-9));
    if (count > 100000) throw ValidationError("grid too large");
    for (long long i = 0; i <= count; ++i) out.push_back(a + static_cast<double>(i) * step);
    return out;
  }
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    double v = 0.0;
    if (!parse_double(trim(part), v)) throw ValidationError("malformed grid value '" + part + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError("empty grid");
  return out;
}

RunConfig parse_config(const std::string& json_text) {
  const json j = parse_json(json_text, "config");
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  std::set<std::string> allowed = kSpecKeys;
  allowed.insert({"quadrature", "optimizer", "seed", "data", "out", "simulation", "params", "profile", "profiles",
                  "grid", "models", "comparisons"});
  reject_unknown(j, allowed, "config");
  RunConfig cfg;
  apply_spec(j, cfg.spec);
  if (j.contains("seed")) cfg.seed = typed<std::uint64_t>(j["seed"], "seed");
  cfg.optimizer.seed = cfg.seed;
  if (j.contains("data")) cfg.data_path = typed<std::string>(j["data"], "data");
  if (j.contains("out")) cfg.out_path = typed<std::string>(j["out"], "out");
  if (j.contains("quadrature")) {
    const json& q = j["quadrature"];
    reject_unknown(q, {"order", "order_2d", "adaptive"}, "quadrature");
    if (q.contains("order")) cfg.quadrature.order = typed<int>(q["order"], "order");
    if (q.contains("order_2d")) cfg.quadrature.order_2d = typed<int>(q["order_2d"], "order_2d");
    if (q.contains("adaptive")) cfg.quadrature.adaptive = typed<bool>(q["adaptive"], "adaptive");
  }
  if (j.contains("optimizer")) {
    const json& o = j["optimizer"];
    reject_unknown(o, {"max_iter", "tol", "starts", "jitter"}, "optimizer");
    if (o.contains("max_iter")) cfg.optimizer.max_iter = typed<int>(o["max_iter"], "max_iter");
    if (o.contains("tol")) cfg.optimizer.tol = get_num(o["tol"], "tol");
    if (o.contains("starts")) cfg.optimizer.starts = typed<int>(o["starts"], "starts");
    if (o.contains("jitter")) cfg.optimizer.jitter = get_num(o["jitter"], "jitter");
  }
  if (j.contains("simulation")) cfg.simulation = parse_simulation(j["simulation"], cfg.seed);
  if (j.contains("params")) cfg.params = params_from_json(cfg.spec, j["params"]);
  if (j.contains("profile")) cfg.profile = parse_profile(j["profile"]);
  if (j.contains("profiles")) {
    const json& ps = j["profiles"];
    if (!ps.is_object()) throw ValidationError("profiles must be an object of named profiles");
    for (auto it = ps.begin(); it != ps.end(); ++it) {
      cfg.profile_labels.push_back(it.key());
      cfg.profiles.push_back(parse_profile(it.value()));
    }
  }
  if (j.contains("grid")) {
    if (j["grid"].is_string()) {
      cfg.grid = parse_grid(j["grid"].get<std::string>());
    } else {
      cfg.grid.clear();
      for (const auto& v : j["grid"]) cfg.grid.push_back(get_num(v, "grid"));
    }
  }
  if (j.contains("models")) {
    std::set<std::string> mkeys = kSpecKeys;
    mkeys.insert({"label", "result"});
    std::set<std::string> labels;
    for (const auto& m : j["models"]) {
      reject_unknown(m, mkeys, "models entry");
      ModelEntry e;
      e.spec = cfg.spec;
      if (!m.contains("label")) throw ValidationError("each model needs a label");
      e.label = typed<std::string>(m["label"], "label");
      if (!labels.insert(e.label).second) throw ValidationError("duplicate model label '" + e.label + "'");
      apply_spec(m, e.spec);
      if (m.contains("result")) e.result_path = typed<std::string>(m["result"], "result");
      cfg.models.push_back(std::move(e));
    }
  }
  if (j.contains("comparisons")) {
    for (const auto& c : j["comparisons"]) {
      reject_unknown(c, {"null", "alt", "kind"}, "comparisons entry");
      if (!c.contains("null") || !c.contains("alt")) throw ValidationError("comparison needs null and alt labels");
      Nesting n;
      n.null_label = typed<std::string>(c["null"], "null");
      n.alt_label = typed<std::string>(c["alt"], "alt");
      if (c.contains("kind")) {
        try {
          n.kind = comparison_kind_from_string(typed<std::string>(c["kind"], "kind"));
        } catch (const ValidationError&) {
          throw;
        } catch (const Error& e) {
          throw ValidationError(e.what());
        }
      }
      cfg.comparisons.push_back(std::move(n));
    }
  }
  cfg.json = j.dump();
  return cfg;
}

RunConfig read_config(const std::string& path) { return parse_config(read_text_file(path)); }

Params parse_params(const ModelSpec& spec, const std::string& json_text) {
  return params_from_json(spec, parse_json(json_text, "params"));
}

// ---- results --------------------------------------------------------------

std::string fit_to_json(const FitResult& fit, std::uint64_t seed, const std::string& config_json) {
  json j;
  j["format"] = "conmix-fit";
  j["format_version"] = 1;
  j["software"] = {{"name", "conmix"}, {"version", "0.1.0"}};
  j["seed"] = seed;
  j["spec"] = spec_json(fit.spec);
  j["names"] = fit.names;
  j["estimates"] = vec_json(fit.estimates);
  j["se"] = vec_json(fit.se);
  j["vcov_natural"] = mat_json(fit.vcov_natural);
  j["packed_names"] = fit.packed_names;
  j["packed_estimates"] = vec_json(fit.packed_estimates);
  j["vcov"] = mat_json(fit.vcov);
  j["loglik"] = num(fit.loglik);
  j["minus2ll"] = num(fit.minus2ll);
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["gradient_norm"] = num(fit.gradient_norm);
  j["se_reliable"] = fit.se_reliable;
  j["warnings"] = fit.warnings;
  j["trace"] = vec_json(Eigen::Map<const Eigen::VectorXd>(fit.trace.data(), static_cast<Eigen::Index>(fit.trace.size())));
  j["starts"] = fit.starts;
  j["data"] = {{"rows", fit.data.rows}, {"subjects", fit.data.subjects}, {"y_hash", fit.data.y_hash}};
  j["config"] = parse_json(config_json.empty() ? "{}" : config_json, "config echo");
  return j.dump(2) + "\n";
}

bool looks_like_fit(const std::string& json_text) {
  try {
    const json j = json::parse(json_text);
    return j.is_object() && j.value("format", "") == "conmix-fit";
  } catch (const json::exception&) {
    return false;
  }
}

FitResult fit_from_json(const std::string& json_text) {
  const json j = parse_json(json_text, "result file");
  if (!j.is_object() || j.value("format", "") != "conmix-fit") throw ValidationError("not a conmix result file");
  try {
    FitResult f;
    apply_spec(j.at("spec"), f.spec);
    f.names = json_strings(j.at("names"), "names");
    f.estimates = json_vec(j.at("estimates"), "estimates");
    f.se = json_vec(j.at("se"), "se");
    f.vcov_natural = json_mat(j.at("vcov_natural"), "vcov_natural");
    f.packed_names = json_strings(j.at("packed_names"), "packed_names");
    f.packed_estimates = json_vec(j.at("packed_estimates"), "packed_estimates");
    f.vcov = json_mat(j.at("vcov"), "vcov");
    if (f.vcov.size() == 0) f.vcov.resize(f.packed_estimates.size(), f.packed_estimates.size());
    if (f.vcov_natural.size() == 0) f.vcov_natural.resize(f.estimates.size(), f.estimates.size());
    f.loglik = get_num(j.at("loglik"), "loglik");
    f.minus2ll = get_num(j.at("minus2ll"), "minus2ll");
    f.converged = j.at("converged").get<bool>();
    f.iterations = j.at("iterations").get<int>();
    f.gradient_norm = get_num(j.at("gradient_norm"), "gradient_norm");
    f.se_reliable = j.at("se_reliable").get<bool>();
    f.warnings = j.at("warnings").get<std::vector<std::string>>();
    const Eigen::VectorXd tr = json_vec(j.at("trace"), "trace");
    f.trace.assign(tr.data(), tr.data() + tr.size());
    f.starts = j.at("starts").get<int>();
    f.data.rows = j.at("data").at("rows").get<std::size_t>();
    f.data.subjects = j.at("data").at("subjects").get<std::size_t>();
    f.data.y_hash = j.at("data").at("y_hash").get<std::uint64_t>();
    if (static_cast<int>(f.packed_estimates.size()) != packed_size(f.spec)) {
      throw ValidationError("result file: packed estimates do not match the model");
    }
    return f;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed result file: ") + e.what());
  }
}

FitResult read_fit(const std::string& path) { return fit_from_json(read_text_file(path)); }

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << text;
  if (!out) throw ValidationError("failed writing '" + path + "'");
}

} // namespace conmix
