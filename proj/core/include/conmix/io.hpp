#ifndef CONMIX_IO_HPP
#define CONMIX_IO_HPP

#include "conmix/estimate.hpp"
#include "conmix/likelihood.hpp"
#include "conmix/model.hpp"
#include "conmix/moments.hpp"
#include "conmix/simulate.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace conmix {

/// Long-format CSV: header row with id, occasion and y; every other column
/// is a numeric covariate. Weibull data also need a status column equal to 1
/// on every row. Rows come back sorted by subject and occasion.
Dataset read_dataset(const std::string& path, FamilyKind family);
Dataset parse_dataset(std::istream& in, FamilyKind family, const std::string& source = "<input>");

void write_dataset(std::ostream& out, const Dataset& data);
void write_dataset(const std::string& path, const Dataset& data);

/// Model entry of a comparison run: either a spec to fit or a saved result.
struct ModelEntry {
  std::string label;
  ModelSpec spec;
  std::string result_path;
};

struct RunConfig {
  ModelSpec spec;
  QuadratureRule quadrature;
  FitOptions optimizer;
  std::uint64_t seed = 20240601;
  std::string data_path;
  std::string out_path;
  std::optional<SimDesign> simulation;
  std::optional<Params> params;
  Profile profile;
  std::vector<Profile> profiles; // extra named profiles for moments/corr
  std::vector<std::string> profile_labels;
  std::vector<double> grid;
  std::vector<ModelEntry> models;
  std::vector<Nesting> comparisons;
  std::string json; // normalized echo of the parsed document
};

/// Parses a JSON run configuration. Unknown keys are rejected.
RunConfig parse_config(const std::string& json_text);
RunConfig read_config(const std::string& path);

/// Parameters from a JSON object (keys xi, D, alpha, beta, var_theta, pi0,
/// nu, rho, sigma; xi by name or as an array). Missing entries take
/// default_params values; a "params" wrapper object is accepted.
Params parse_params(const ModelSpec& spec, const std::string& json_text);

/// "a:b" (step 1), "a:b:step" or a comma list.
std::vector<double> parse_grid(std::string_view text);

/// Self-contained result document: estimates, standard errors, covariances,
/// log-likelihood, the configuration echo and provenance. Doubles
/// round-trip exactly; non-finite values are written as strings.
std::string fit_to_json(const FitResult& fit, std::uint64_t seed, const std::string& config_json = "{}");
FitResult fit_from_json(const std::string& json_text);
FitResult read_fit(const std::string& path);
bool looks_like_fit(const std::string& json_text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

} // namespace conmix

#endif
