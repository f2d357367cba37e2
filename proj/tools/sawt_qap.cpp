#include <algorithm>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sawt/bench/run.hpp"
#include "sawt/errors.hpp"
#include "sawt/nn/checkpoint.hpp"

namespace {

using nlohmann::json;
namespace bench = sawt::bench;

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

json read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw sawt::DataError("cannot read config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw sawt::DataError(path.string() + ": " + e.what());
  }
}

/// "key=value" with value parsed as JSON when possible, else taken as a string.
void apply_override(json& target, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
  const std::string key = kv.substr(0, eq);
  const std::string raw = kv.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  // model.d_emb=32 style keys address the nested model block
  json* node = &target;
  std::size_t start = 0;
  for (std::size_t dot; (dot = key.find('.', start)) != std::string::npos; start = dot + 1) {
    node = &(*node)[key.substr(start, dot - start)];
  }
  (*node)[key.substr(start)] = std::move(value);
}

/// Values of a JSON config object as arguments for `sub`: "--key value" for
/// options, bare values for positionals, "--key" for a true flag.
std::vector<std::string> config_args(const json& cfg, const CLI::App& sub) {
  if (!cfg.is_object()) throw sawt::DataError("config file must hold a JSON object");
  std::vector<std::string> args;
  auto text = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
  for (const auto& [key, value] : cfg.items()) {
    const CLI::Option* opt = sub.get_option_no_throw("--" + key);
    const bool positional = !opt && (opt = sub.get_option_no_throw(key)) != nullptr && opt->get_positional();
    if (!opt) throw std::invalid_argument("config key '" + key + "' is not an option of '" + sub.get_name() + "'");
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back("--" + key);
      continue;
    }
    if (!positional) args.push_back("--" + key);
    if (value.is_array()) {
      for (const auto& v : value) args.push_back(text(v));
    } else {
      args.push_back(text(value));
    }
  }
  return args;
}

int run(int argc, char** argv) {
  CLI::App app{"Solution-aware transformer search for the quadratic assignment problem", "sawt-qap"};
  app.require_subcommand(1);
  app.set_version_flag("--version", SAWT_VERSION);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  bench::GlobalOptions g;
  for (int i = 0; i < argc; ++i) g.argv.emplace_back(argv[i]);
  std::string config_path;

  auto add_globals = [&](CLI::App* a) {
    a->add_option("--seed", g.seed, "Master seed for every random choice (default 1)");
    a->add_option("--threads", g.threads, "Worker threads across instances (default 1)")->check(CLI::PositiveNumber);
    a->add_option("--out", g.out, "Run directory (default runs/<command>-<UTC time>)");
    a->add_option("--config", config_path, "JSON config file; train reads TrainConfig keys, other commands option names")
        ->check(CLI::ExistingFile);
    a->add_flag("--fp64-check", g.fp64, "Run the neural model in double precision");
  };
  add_globals(&app);

  // generate
  bench::GenerateOptions gen;
  CLI::App* generate = app.add_subcommand("generate", "Write random instances and an index.json");
  generate->add_option("--n", gen.n, "Problem size (default 10)")->check(CLI::Range(2, 4096));
  generate->add_option("--count", gen.count, "Number of instances (default 1)")->check(CLI::NonNegativeNumber);
  generate->add_option("--p", gen.p, "Probability of zeroing each flow pair (default 0.7)")->check(CLI::Range(0.0, 1.0));

  // solve
  bench::SolveOptions solve;
  std::string checkpoint, bks_cache;
  CLI::App* solve_cmd = app.add_subcommand("solve", "Run one solver over instances and report costs and gaps");
  solve_cmd->add_option("inputs", solve.inputs, "Instance .json/.dat files, generate directories or QAPLIB names");
  solve_cmd->add_option("--solver", solve.solver, "brute | greedy | tabu | sm | sawt (default tabu)")
      ->check(CLI::IsMember({"brute", "greedy", "tabu", "sm", "sawt"}));
  solve_cmd->add_option("--steps", solve.steps, "Step budget for greedy, tabu and sawt (default 5000)")
      ->check(CLI::NonNegativeNumber);
  solve_cmd->add_option("--restarts", solve.restarts, "Tabu runs, the extra ones from random starts (default 1)")
      ->check(CLI::PositiveNumber);
  solve_cmd->add_option("--tenure", solve.tenure, "Tabu tenure; negative means max(7, n/4) (default -1)");
  solve_cmd->add_option("--repeats", solve.repeats, "Runs per instance with seeds seed, seed+1, ... (default 1)")
      ->check(CLI::PositiveNumber);
  solve_cmd->add_option("--init", solve.init, "Starting solution: identity | random (default identity)")
      ->check(CLI::IsMember({"identity", "random"}));
  solve_cmd->add_option("--mode", solve.mode, "sawt action selection: sample | greedy (default sample)")
      ->check(CLI::IsMember({"sample", "greedy"}));
  solve_cmd->add_option("--checkpoint", checkpoint, "Trained model for --solver sawt")->check(CLI::ExistingFile);
  solve_cmd->add_option("--reference", solve.reference,
                        "Gap reference: auto (QAPLIB bound, brute force n<=10, else cached tabu 5k), none, "
                        "or a name,cost CSV / JSON file (default auto)");
  solve_cmd->add_option("--bks-cache", bks_cache, "Cache directory for tabu references");

  // train
  bench::TrainOptions train;
  std::vector<std::string> overrides;
  std::string resume;
  CLI::App* train_cmd = app.add_subcommand("train", "Train the policy with REINFORCE on random instances");
  train_cmd->add_option("--set", overrides, "Override a config key, e.g. --set epochs=5 --set model.layers=2");
  train_cmd->add_option("--resume", resume, "Continue from a checkpoint written by train")->check(CLI::ExistingFile);
  train_cmd->add_option("--bks-cache", bks_cache, "Cache directory for tabu references");

  // qaplib
  CLI::App* qaplib_cmd = app.add_subcommand("qaplib", "QAPLIB download and benchmark");
  qaplib_cmd->require_subcommand(1);
  std::vector<std::string> fetch_names;
  std::string base_url;
  CLI::App* fetch_cmd = qaplib_cmd->add_subcommand("fetch", "Download instances into $SAWT_QAP_DATA_DIR (default ./.sawt-cache/qaplib)");
  fetch_cmd->add_option("names", fetch_names, "Instance names, e.g. nug12 tai12a")->required();
  fetch_cmd->add_option("--url", base_url, "Base URL (default $SAWT_QAPLIB_URL, else the public QAPLIB mirror)");
  bench::QaplibBenchOptions qb;
  CLI::App* qbench_cmd = qaplib_cmd->add_subcommand("bench", "Gaps against QAPLIB bounds, aggregated per category");
  qbench_cmd->add_option("names", qb.names, "Instance names");
  qbench_cmd->add_option("--category", qb.category, "Every local instance of this category, e.g. nug");
  qbench_cmd->add_option("--solver", qb.solver, "greedy | tabu | sm | sawt | brute (default tabu)")
      ->check(CLI::IsMember({"brute", "greedy", "tabu", "sm", "sawt"}));
  qbench_cmd->add_option("--steps", qb.steps, "Step budget (default 5000)")->check(CLI::NonNegativeNumber);
  qbench_cmd->add_option("--restarts", qb.restarts, "Tabu runs (default 1)")->check(CLI::PositiveNumber);
  qbench_cmd->add_option("--tenure", qb.tenure, "Tabu tenure; negative means max(7, n/4) (default -1)");
  qbench_cmd->add_option("--init", qb.init, "Starting solution: identity | random (default identity)")
      ->check(CLI::IsMember({"identity", "random"}));
  qbench_cmd->add_option("--checkpoint", checkpoint, "Trained model for --solver sawt")->check(CLI::ExistingFile);

  // describe
  std::string describe_ckpt;
  CLI::App* describe_cmd = app.add_subcommand("describe", "Print the parameter census of a model");
  describe_cmd->add_option("--checkpoint", describe_ckpt, "Describe the model stored in this checkpoint")
      ->check(CLI::ExistingFile);

  for (CLI::App* sub : {generate, solve_cmd, train_cmd, qaplib_cmd, fetch_cmd, qbench_cmd, describe_cmd}) {
    sub->fallthrough();
  }
  // keep subcommand help complete: globals are listed on each
  for (CLI::App* sub : {generate, solve_cmd, train_cmd, qaplib_cmd, fetch_cmd, qbench_cmd, describe_cmd}) {
    sub->footer("Global flags: --seed N, --threads N, --out DIR, --config FILE, --fp64-check");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }
  g.seed_given = app.get_option("--seed")->count() > 0;
  g.threads_given = app.get_option("--threads")->count() > 0;
  if (!config_path.empty()) g.config = config_path;

  // other commands take their option defaults from the config file; the
  // command line is parsed again with those values in front of the user's
  const std::vector<std::pair<CLI::App*, std::vector<std::string>>> configurable = {
      {generate, {"generate"}}, {solve_cmd, {"solve"}}, {qbench_cmd, {"qaplib", "bench"}}};
  for (const auto& [sub, path] : configurable) {
    if (!g.config || !sub->parsed()) continue;
    const std::vector<std::string> extra = config_args(read_config(*g.config), *sub);
    std::vector<std::string> args(g.argv.begin() + 1, g.argv.end());
    auto pos = args.begin();
    for (const auto& token : path) pos = std::find(pos, args.end(), token) + 1;
    args.insert(pos, extra.begin(), extra.end());
    std::reverse(args.begin(), args.end());
    app.clear();
    try {
      app.parse(args);
    } catch (const CLI::ParseError& e) {
      return app.exit(e) == 0 ? 0 : kExitUsage;
    }
    break;
  }

  if (generate->parsed()) {
    bench::cmd_generate(gen, g);
  } else if (solve_cmd->parsed()) {
    // checked here, after the config file had its chance to supply them
    if (solve.inputs.empty()) throw std::invalid_argument("solve: no inputs given");
    if (!checkpoint.empty()) solve.checkpoint = checkpoint;
    if (!bks_cache.empty()) solve.bks_cache = bks_cache;
    bench::cmd_solve(solve, g);
  } else if (train_cmd->parsed()) {
    for (const auto& kv : overrides) apply_override(train.overrides, kv);
    if (!resume.empty()) train.resume = resume;
    if (!bks_cache.empty()) train.bks_cache = bks_cache;
    bench::cmd_train(train, g);
  } else if (fetch_cmd->parsed()) {
    bench::cmd_qaplib_fetch(fetch_names, base_url, g);
  } else if (qbench_cmd->parsed()) {
    if (!checkpoint.empty()) qb.checkpoint = checkpoint;
    bench::cmd_qaplib_bench(qb, g);
  } else if (describe_cmd->parsed()) {
    sawt::policy::SawtConfig model;
    if (!describe_ckpt.empty()) {
      model = bench::checkpoint_model_config(sawt::nn::read_checkpoint(describe_ckpt).meta);
    } else if (g.config) {
      model = sawt::rl::train_config_from_json(read_config(*g.config)).model;
    }
    std::cout << bench::describe_model(model, sawt::rl::derive_seed(g.seed, 1));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::cerr << "sawt-qap: " << e.what() << "\n";
    return kExitUsage;
  } catch (const sawt::NumericalError& e) {
    std::cerr << "sawt-qap: numerical abort: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const sawt::SizeError& e) {
    std::cerr << "sawt-qap: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "sawt-qap: usage: " << e.what() << "\n";
    return kExitUsage;
  } catch (const sawt::DataError& e) {
    std::cerr << "sawt-qap: data error: " << e.what() << "\n";
    return kExitData;
  } catch (const sawt::ParseError& e) {
    std::cerr << "sawt-qap: parse error: " << e.what() << "\n";
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "sawt-qap: bad JSON: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "sawt-qap: " << e.what() << "\n";
    return 1;
  }
}
