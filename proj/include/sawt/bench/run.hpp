#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sawt/policy/sawt.hpp"
#include "sawt/qap/instance.hpp"
#include "sawt/rl/trainer.hpp"

namespace sawt::bench {

/// Version of the results.csv / results.jsonl / summary.json layout.
inline constexpr int kSchemaVersion = 1;

struct GlobalOptions {
  std::uint64_t seed = 1;
  int threads = 1;
  std::filesystem::path out;  // run directory; defaults per command when empty
  std::optional<std::filesystem::path> config;
  bool fp64 = false;
  bool seed_given = false;     // --seed on the command line overrides config files
  bool threads_given = false;
  std::vector<std::string> argv;  // full command line, recorded in the manifest
};

/// `g.out` when set, else a fresh `runs/<command>-<UTC stamp>[-k]` directory.
std::filesystem::path resolve_run_dir(const GlobalOptions& g, const std::string& command);

/// One run directory: collects output files and writes manifest.json on finish().
class RunDir {
 public:
  RunDir(std::filesystem::path dir, std::string command, const GlobalOptions& g, nlohmann::json resolved_config);

  const std::filesystem::path& path() const { return dir_; }

  /// Writes `content` to `<dir>/<name>` and lists it in the manifest.
  void write(const std::string& name, const std::string& content);
  /// Registers a file written by other means (e.g. checkpoints).
  void record(const std::filesystem::path& file);
  /// Adds or replaces a top-level manifest field.
  void note(const std::string& key, nlohmann::json value);
  void finish();

 private:
  std::filesystem::path dir_;
  nlohmann::json manifest_;
  std::vector<std::string> outputs_;
};

struct ResultRow {
  std::string instance;
  std::string solver;
  std::uint64_t seed = 0;
  int steps = 0;
  double best_cost = 0.0;
  std::optional<double> reference;
  std::string reference_source;  // brute | tabu5k | file | qaplib | ""
  /// (best - reference) / reference; for a zero reference the absolute cost.
  std::optional<double> gap;
  std::string flag;  // "", "zero_bound", "no_bound"
  double wall_ms = 0.0;
};

std::string format_double(double v);
std::string results_csv(const std::vector<ResultRow>& rows);
std::string results_jsonl(const std::vector<ResultRow>& rows);
std::string timings_csv(const std::vector<ResultRow>& rows);
/// Mean cost, mean reference and Gap over rows that all carry a positive-mean reference.
nlohmann::json summarize(const std::vector<ResultRow>& rows);

/// Fills reference, gap and flag from `reference`.
void set_reference(ResultRow& row, std::optional<double> reference, const std::string& source);

struct NamedInstance {
  QapInstance instance;
  std::optional<double> known_bound;  // QAPLIB table value, when the input is a QAPLIB instance
};

/// Accepts instance JSON files, QAPLIB .dat files, directories written by
/// `generate` (index.json) and bare QAPLIB names resolved via the search path.
std::vector<NamedInstance> load_inputs(const std::vector<std::string>& inputs);

/// Reference costs keyed by instance name from a JSON object or a
/// `name,cost` CSV file.
std::map<std::string, double> read_reference_file(const std::filesystem::path& path);

/// Best-known cost used as the Gap denominator: brute force for n <= 10,
/// otherwise tabu{5k} from (or stored into) `cache_dir`.
struct Reference {
  double cost = 0.0;
  std::string source;
};
Reference reference_cost(const QapInstance& inst, const std::optional<std::filesystem::path>& cache_dir);

/// Cache directory for tabu references: $SAWT_QAP_DATA_DIR/bks when set,
/// else ./.sawt-cache/bks.
std::filesystem::path default_bks_cache();

// ---- commands -------------------------------------------------------------

struct GenerateOptions {
  int n = 10;
  int count = 1;
  double p = 0.7;
};
void cmd_generate(const GenerateOptions& opt, const GlobalOptions& g);

struct SolveOptions {
  std::vector<std::string> inputs;
  std::string solver = "tabu";  // brute | greedy | tabu | sm | sawt
  int steps = 5000;
  int restarts = 1;
  int tenure = -1;
  int repeats = 1;
  std::string init = "identity";
  std::string mode = "sample";  // sawt action selection: sample | greedy
  std::optional<std::filesystem::path> checkpoint;
  std::string reference = "auto";  // auto | none | <file>
  std::optional<std::filesystem::path> bks_cache;
};
void cmd_solve(const SolveOptions& opt, const GlobalOptions& g);

struct TrainOptions {
  nlohmann::json overrides = nlohmann::json::object();
  std::optional<std::filesystem::path> resume;
  std::optional<std::filesystem::path> bks_cache;
};
void cmd_train(const TrainOptions& opt, const GlobalOptions& g);

void cmd_qaplib_fetch(const std::vector<std::string>& names, const std::string& base_url, const GlobalOptions& g);

struct QaplibBenchOptions {
  std::vector<std::string> names;
  std::string category;
  std::string solver = "tabu";
  int steps = 5000;
  int restarts = 1;
  int tenure = -1;
  std::string init = "identity";
  std::optional<std::filesystem::path> checkpoint;
};
void cmd_qaplib_bench(const QaplibBenchOptions& opt, const GlobalOptions& g);

/// Per-category mean/min/max gap over rows without a flag.
std::string category_csv(const std::vector<ResultRow>& rows);

/// Parameter census: one line per tensor (name, shape, count) and a total.
std::string describe_model(const policy::SawtConfig& cfg, std::uint64_t seed);

/// Model configuration and weights from a checkpoint written by `train`.
policy::SawtConfig checkpoint_model_config(const nlohmann::json& meta);

}  // namespace sawt::bench
