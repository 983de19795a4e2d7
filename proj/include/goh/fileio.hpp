#pragma once

#include "goh/checker.hpp"
#include "goh/problem.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace goh {

/// Input error carrying "source:line:column: message".
class FileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parsed TOML-like document. `lines` maps the JSON pointer of every key to
/// the line it was defined on, for error messages.
struct Document {
  nlohmann::json root = nlohmann::json::object();
  std::string source;
  std::map<std::string, int> lines;

  /// "source:line" of the key at `pointer`, or of its nearest defined parent.
  std::string where(const std::string& pointer) const;
};

/// Subset of TOML: tables, arrays of tables, dotted table names, basic
/// strings, numbers (incl. inf and nan), booleans, arrays and inline tables.
Document parse_toml(std::string_view text, const std::string& source = "<input>");
Document read_toml(const std::filesystem::path& path);
/// Serializes a JSON object so that parse_toml gives it back.
std::string write_toml(const nlohmann::json& root);

/// Variant names declared as [variant.NAME] tables.
std::vector<std::string> variant_names(const Document& doc);

/// Builds and validates the problem; `variant` selects a [variant.NAME]
/// table whose keys replace those of [problem].
StrictProblem load_problem(const Document& doc, const std::string& variant = "");

/// [process] pieces of a process file.
ControlSchedule load_schedule(const Document& doc, const StrictProblem& P);

/// [target] cones of a process file, when present.
std::optional<Multicone> load_target(const Document& doc, const StrictProblem& P);

bool has_multipliers(const Document& doc);
MultiplierSpec load_multipliers(const Document& doc, const StrictProblem& P);

/// [strict] pieces (duration, u, a) with optional per-piece rates.
struct StrictInput {
  StrictProcess process;
  std::vector<double> rates;
};
StrictInput load_strict(const Document& doc, const StrictProblem& P);

nlohmann::json schedule_json(const ControlSchedule& ctrl);

/// Point and pair at which a check report records the bracket of every
/// variant, with an optional set of claimed bracket vertices.
struct BracketProbe {
  Eigen::VectorXd point;
  int i = 0;  // 0-based
  int j = 1;
  std::vector<Eigen::VectorXd> claimed;
};
std::optional<BracketProbe> load_probe(const Document& doc, const StrictProblem& P);

}  // namespace goh
