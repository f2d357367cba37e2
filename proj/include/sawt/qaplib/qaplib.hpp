#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sawt/qap/instance.hpp"

namespace sawt::qaplib {

/// Parsed instance name, e.g. "bur26a" -> {"bur", 26, "a"}.
struct InstanceName {
  std::string category;
  int size = 0;
  std::string variant;

  std::string str() const { return category + std::to_string(size) + variant; }
  friend bool operator==(const InstanceName&, const InstanceName&) = default;
};

struct Solution {
  int size = 0;
  double value = 0.0;
  Permutation permutation;  // 0-based
};

struct Entry {
  InstanceName name;
  QapInstance instance;
  std::optional<double> upper_bound;
  std::optional<Solution> solution;
};

/// Whitespace-separated "n A B" format. The first matrix becomes the flow,
/// the second the distance. Throws ParseError with a byte offset.
QapInstance parse_qaplib(std::string_view text, std::string name = {});

/// .sln format: n and objective value, then the permutation (0- or 1-based,
/// detected from the value range).
Solution parse_solution(std::string_view text);

InstanceName parse_name(std::string_view name);

/// Best known objective values for the shipped fixtures and the instances
/// commonly benchmarked next to them.
const std::map<std::string, double>& known_bounds();
std::optional<double> known_bound(const std::string& name);

/// Directory holding the fixtures shipped with the source tree.
std::filesystem::path fixture_dir();

/// Download cache: $SAWT_QAP_DATA_DIR when set, else ./.sawt-cache/qaplib.
std::filesystem::path data_dir();

/// Search order: data_dir(), then the shipped fixtures.
std::vector<std::filesystem::path> search_dirs();

/// Locates `<name>.dat` (and `<name>.sln` if present) in the search path.
Entry load_entry(const std::string& name);

/// Names of every `.dat` under the search path, sorted and de-duplicated.
std::vector<std::string> available_instances();

/// Downloads `<base>/<name>.dat` and `<base>/<name>.sln` into `dest_dir`.
/// Base defaults to $SAWT_QAPLIB_URL. Returns the path of the instance file.
std::filesystem::path fetch(const std::string& name, const std::filesystem::path& dest_dir,
                            std::string base_url = {});

}  // namespace sawt::qaplib
