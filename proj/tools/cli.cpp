#include "cli.hpp"

#include <conmix/errors.hpp>
#include <conmix/estimate.hpp>
#include <conmix/io.hpp>
#include <conmix/moments.hpp>
#include <conmix/simulate.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

namespace conmix::cli {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::string data;
  std::string out;
  std::string params;
  std::string grid;
  std::optional<std::uint64_t> seed;
  std::optional<int> quad_order;
  bool no_adaptive = false;
  std::optional<int> starts;
  std::optional<int> max_iter;
  std::optional<double> tol;
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "JSON run configuration");
  sub->add_option("--data", o.data, "long-format CSV (id, occasion, y, covariates)");
  sub->add_option("--out", o.out, "output directory (fit, compare) or file (simulate, moments, corr)");
  sub->add_option("--seed", o.seed, "random seed");
  sub->add_option("--quad-order", o.quad_order, "Gauss-Hermite nodes per random effect");
  sub->add_flag("--no-adaptive", o.no_adaptive, "non-adaptive quadrature");
  sub->add_option("--starts", o.starts, "optimizer starting points");
  sub->add_option("--max-iter", o.max_iter, "optimizer iteration limit");
  sub->add_option("--tol", o.tol, "optimizer gradient tolerance");
  sub->add_option("--params", o.params, "parameter JSON (file or inline) or a fit result file");
  sub->add_option("--grid", o.grid, "time grid, e.g. 1:27 or 1,2,4");
}

RunConfig load_config(const Options& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : read_config(o.config);
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.optimizer.seed = *o.seed;
    if (cfg.simulation) cfg.simulation->seed = *o.seed;
  }
  if (o.quad_order) {
    cfg.quadrature.order = *o.quad_order;
    cfg.quadrature.order_2d = *o.quad_order;
  }
  if (o.no_adaptive) cfg.quadrature.adaptive = false;
  if (o.starts) cfg.optimizer.starts = *o.starts;
  if (o.max_iter) cfg.optimizer.max_iter = *o.max_iter;
  if (o.tol) cfg.optimizer.tol = *o.tol;
  if (!o.data.empty()) cfg.data_path = o.data;
  if (!o.out.empty()) cfg.out_path = o.out;
  if (!o.grid.empty()) cfg.grid = parse_grid(o.grid);
  return cfg;
}

std::string fmt(double v, int prec = 4) {
  if (std::isnan(v)) return "NA";
  std::ostringstream s;
  s << std::fixed << std::setprecision(prec) << v;
  return s.str();
}

std::string fmt_p(double p) { return p < 1e-4 ? "<0.0001" : fmt(p, 4); }

std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s + " " : s + std::string(w - s.size(), ' '); }

void print_fit(std::ostream& out, const FitResult& f) {
  out << "family: " << to_string(f.spec.family) << "  overdispersion: " << to_string(f.spec.overdispersion);
  if (f.spec.gamma_effects()) out << " (" << to_string(f.spec.constraint) << ")";
  out << "  random:";
  if (f.spec.random_effects.empty()) out << " none";
  for (const auto& r : f.spec.random_effects) out << ' ' << r;
  out << "\nsubjects: " << f.data.subjects << "  rows: " << f.data.rows << "\n\n";
  out << pad("parameter", 22) << pad("estimate", 14) << "s.e.\n";
  for (std::size_t i = 0; i < f.names.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out << pad(f.names[i], 22) << pad(fmt(f.estimates(k)), 14) << fmt(f.se.size() > k ? f.se(k) : NAN) << '\n';
  }
  out << "\n-2 log-likelihood: " << fmt(f.minus2ll, 2) << '\n';
  out << "converged: " << (f.converged ? "yes" : "no") << " (" << f.iterations << " iterations, " << f.starts
      << " start" << (f.starts == 1 ? "" : "s") << ")\n";
  for (const auto& w : f.warnings) out << "warning: " << w << '\n';
}

std::string estimates_csv(const FitResult& f) {
  std::ostringstream s;
  s << std::setprecision(17) << "parameter,estimate,se\n";
  for (std::size_t i = 0; i < f.names.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    s << f.names[i] << ',' << f.estimates(k) << ',' << (f.se.size() > k ? f.se(k) : NAN) << '\n';
  }
  return s.str();
}

Dataset load_data(const RunConfig& cfg, const ModelSpec& spec, std::ostream& err) {
  if (cfg.data_path.empty()) throw ValidationError("no data file (use --data or \"data\" in the config)");
  Dataset d = read_dataset(cfg.data_path, spec.family);
  const ValidationReport rep = validate(spec, d);
  for (const auto& i : rep.issues) {
    if (i.severity == Severity::Warning) err << "warning: " << i.message << '\n';
  }
  if (!rep.ok()) throw ValidationError(rep.summary());
  return d;
}

std::string param_text(const std::string& arg) {
  const auto first = arg.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && arg[first] == '{') return arg;
  return read_text_file(arg);
}

struct Model {
  ModelSpec spec;
  Params params;
};

Model resolve_model(const Options& o, const RunConfig& cfg) {
  if (!o.params.empty()) {
    const std::string text = param_text(o.params);
    if (looks_like_fit(text)) {
      const FitResult f = fit_from_json(text);
      return {f.spec, f.params()};
    }
    if (o.config.empty()) throw ValidationError("explicit --params need a --config describing the model");
    return {cfg.spec, parse_params(cfg.spec, text)};
  }
  if (!cfg.params) throw ValidationError("no parameters (use --params or \"params\" in the config)");
  return {cfg.spec, *cfg.params};
}

std::vector<std::pair<std::string, Profile>> profiles(const RunConfig& cfg) {
  std::vector<std::pair<std::string, Profile>> out;
  for (std::size_t i = 0; i < cfg.profiles.size(); ++i) out.emplace_back(cfg.profile_labels[i], cfg.profiles[i]);
  if (out.empty()) out.emplace_back("profile", cfg.profile);
  return out;
}

fs::path out_dir(const RunConfig& cfg) {
  fs::path dir = cfg.out_path.empty() ? fs::path(".") : fs::path(cfg.out_path);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

int cmd_fit(const Options& o, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = load_config(o);
  if (o.config.empty()) throw ValidationError("fit needs --config");
  const Dataset data = load_data(cfg, cfg.spec, err);
  const FitResult f = fit(cfg.spec, data, cfg.quadrature, cfg.optimizer);
  print_fit(out, f);
  const fs::path dir = out_dir(cfg);
  write_text_file((dir / "fit.json").string(), fit_to_json(f, cfg.seed, cfg.json));
  write_text_file((dir / "estimates.csv").string(), estimates_csv(f));
  out << "\nwrote " << (dir / "fit.json").string() << " and " << (dir / "estimates.csv").string() << '\n';
  if (!f.converged) {
    err << "error: the optimizer did not converge; results were written\n";
    return kNotConverged;
  }
  return kOk;
}

int cmd_simulate(const Options& o, std::ostream& out, std::ostream&) {
  const RunConfig cfg = load_config(o);
  if (o.config.empty()) throw ValidationError("simulate needs --config");
  if (!cfg.simulation) throw ValidationError("config has no \"simulation\" section");
  const Model m = resolve_model(o, cfg);
  const Dataset d = simulate(m.spec, m.params, *cfg.simulation);
  if (cfg.out_path.empty()) {
    write_dataset(out, d);
  } else {
    write_dataset(cfg.out_path, d);
    out << "wrote " << d.rows() << " rows to " << cfg.out_path << '\n';
  }
  return kOk;
}

int cmd_moments(const Options& o, std::ostream& out, std::ostream&) {
  const RunConfig cfg = load_config(o);
  const Model m = resolve_model(o, cfg);
  if (cfg.grid.empty()) throw ValidationError("no time grid (use --grid or \"grid\" in the config)");
  std::ostringstream csv;
  csv << std::setprecision(17) << "profile,time,mean,variance\n";
  for (const auto& [label, prof] : profiles(cfg)) {
    const MomentSet ms = model_moments(m.spec, m.params, profile_design(m.spec.fixed_effects, prof, cfg.grid),
                                       profile_design(m.spec.random_effects, prof, cfg.grid));
    out << "marginal moments for " << label << (ms.approximate ? " (approximate)" : "") << '\n';
    out << "  " << pad("time", 10) << pad("mean", 14) << "variance\n";
    for (std::size_t i = 0; i < cfg.grid.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      out << "  " << pad(fmt(cfg.grid[i], 2), 10) << pad(fmt(ms.mean(k)), 14) << fmt(ms.cov(k, k)) << '\n';
      csv << label << ',' << cfg.grid[i] << ',' << ms.mean(k) << ',' << ms.cov(k, k) << '\n';
    }
    if (cfg.grid.size() >= 2) {
      const CorrelationSummary c = marginal_correlation(m.spec, m.params, prof, cfg.grid);
      out << "  correlation: largest " << fmt(c.max) << " at (" << c.argmax.first << ", " << c.argmax.second
          << "), smallest " << fmt(c.min) << " at (" << c.argmin.first << ", " << c.argmin.second << ")\n";
    }
  }
  if (!cfg.out_path.empty()) write_text_file(cfg.out_path, csv.str());
  return kOk;
}

int cmd_corr(const Options& o, std::ostream& out, std::ostream&) {
  const RunConfig cfg = load_config(o);
  const Model m = resolve_model(o, cfg);
  if (cfg.grid.size() < 2) throw ValidationError("need a time grid with at least two points (use --grid)");
  std::ostringstream csv;
  csv << std::setprecision(17) << "profile,t,s,correlation\n";
  for (const auto& [label, prof] : profiles(cfg)) {
    const CorrelationSummary c = marginal_correlation(m.spec, m.params, prof, cfg.grid);
    out << "smallest and largest values for " << label << (c.approximate ? " (approximate)" : "") << '\n';
    out << "  largest   " << fmt(c.max) << " at (" << c.argmax.first << ", " << c.argmax.second << ")\n";
    out << "  smallest  " << fmt(c.min) << " at (" << c.argmin.first << ", " << c.argmin.second << ")\n";
    for (std::size_t i = 0; i < c.times.size(); ++i) {
      for (std::size_t k = i + 1; k < c.times.size(); ++k) {
        csv << label << ',' << c.times[i] << ',' << c.times[k] << ','
            << c.corr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) << '\n';
      }
    }
  }
  if (!cfg.out_path.empty()) write_text_file(cfg.out_path, csv.str());
  return kOk;
}

int cmd_compare(const Options& o, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = load_config(o);
  if (o.config.empty()) throw ValidationError("compare needs --config");
  if (cfg.models.empty()) throw ValidationError("config has no \"models\"");
  if (cfg.comparisons.empty()) throw ValidationError("config has no \"comparisons\"");
  std::vector<std::pair<std::string, FitResult>> fits;
  std::optional<Dataset> data;
  bool all_converged = true;
  for (const auto& e : cfg.models) {
    if (!e.result_path.empty()) {
      fits.emplace_back(e.label, read_fit(e.result_path));
      continue;
    }
    if (!data) data = load_data(cfg, cfg.models.front().spec, err);
    const ValidationReport rep = validate(e.spec, *data);
    if (!rep.ok()) throw ValidationError("model '" + e.label + "': " + rep.summary());
    FitResult f = fit(e.spec, *data, cfg.quadrature, cfg.optimizer);
    if (!f.converged) {
      all_converged = false;
      err << "warning: model '" << e.label << "' did not converge\n";
    }
    out << "model " << e.label << ": -2 log-likelihood " << fmt(f.minus2ll, 2) << '\n';
    fits.emplace_back(e.label, std::move(f));
  }
  const std::vector<Comparison> rows = compare_models(fits, cfg.comparisons);
  out << "\ncomparison of nested models\n";
  out << pad("null", 16) << pad("alternative", 16) << pad("test", 24) << pad("statistic", 12) << "p-value\n";
  std::ostringstream csv;
  csv << std::setprecision(17) << "null,alternative,test,statistic,p\n";
  for (const auto& c : rows) {
    out << pad(c.null_label, 16) << pad(c.alt_label, 16) << pad(std::string(to_string(c.kind)), 24)
        << pad(fmt(c.statistic, 3), 12) << fmt_p(c.p) << '\n';
    csv << c.null_label << ',' << c.alt_label << ',' << to_string(c.kind) << ',' << c.statistic << ',' << c.p << '\n';
  }
  if (!cfg.out_path.empty()) {
    const fs::path dir = out_dir(cfg);
    write_text_file((dir / "comparisons.csv").string(), csv.str());
    for (const auto& [label, f] : fits) {
      write_text_file((dir / ("fit_" + label + ".json")).string(), fit_to_json(f, cfg.seed, cfg.json));
    }
  }
  return all_converged ? kOk : kNotConverged;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Combined conjugate and normal random-effects models", "conmix"};
  app.require_subcommand(1);
  Options o;
  CLI::App* fit_cmd = app.add_subcommand("fit", "fit a model to long-format data");
  CLI::App* sim_cmd = app.add_subcommand("simulate", "simulate data from a model");
  CLI::App* mom_cmd = app.add_subcommand("moments", "marginal means and variances over a time grid");
  CLI::App* corr_cmd = app.add_subcommand("corr", "marginal correlation function over a time grid");
  CLI::App* cmp_cmd = app.add_subcommand("compare", "fit and compare nested models");
  for (CLI::App* s : {fit_cmd, sim_cmd, mom_cmd, corr_cmd, cmp_cmd}) add_common(s, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(o, out, err);
    if (sim_cmd->parsed()) return cmd_simulate(o, out, err);
    if (mom_cmd->parsed()) return cmd_moments(o, out, err);
    if (corr_cmd->parsed()) return cmd_corr(o, out, err);
    if (cmp_cmd->parsed()) return cmd_compare(o, out, err);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const UnsupportedError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kNumeric;
  }
  return kUsage;
}

} // namespace conmix::cli
