#include "sawt/bench/run.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <memory>
#include <numeric>
#include <sstream>
#include <variant>

#include "sawt/errors.hpp"
#include "sawt/nn/checkpoint.hpp"
#include "sawt/qap/generator.hpp"
#include "sawt/qap/objective.hpp"
#include "sawt/qap/serialization.hpp"
#include "sawt/qaplib/qaplib.hpp"
#include "sawt/solvers/exhaustive.hpp"
#include "sawt/solvers/local_search.hpp"
#include "sawt/solvers/spectral.hpp"

#ifndef SAWT_VERSION
#define SAWT_VERSION "0.0.0"
#endif

namespace sawt::bench {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_stamp(const char* format) {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, format, &tm);
  return buf;
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
  if (!out) throw DataError("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string instance_hash(const QapInstance& inst) {
  const int n = inst.size();
  std::uint64_t h = fnv1a(&n, sizeof n);
  for (const Eigen::MatrixXd* m : {&inst.flow(), &inst.distance()}) {
    for (Eigen::Index i = 0; i < m->rows(); ++i)
      for (Eigen::Index j = 0; j < m->cols(); ++j) {
        const double v = (*m)(i, j);
        h = fnv1a(&v, sizeof v, h);
      }
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string opt_double(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

Permutation start_permutation(int n, rl::InitSolution init, std::uint64_t seed) {
  if (init == rl::InitSolution::kIdentity) return identity_permutation(n);
  Rng rng(seed);
  return rl::random_permutation(n, rng);
}

// ---- policies loaded from checkpoints -------------------------------------

template <typename Scalar>
std::unique_ptr<policy::SawtPolicy<Scalar>> load_policy(const fs::path& path) {
  const nn::Checkpoint ckpt = nn::read_checkpoint(path);
  auto pol = std::make_unique<policy::SawtPolicy<Scalar>>(checkpoint_model_config(ckpt.meta), 0);
  nn::restore_checkpoint(ckpt, pol->params());
  return pol;
}

using AnyPolicy = std::variant<std::monostate, std::unique_ptr<policy::SawtPolicy<float>>,
                               std::unique_ptr<policy::SawtPolicy<double>>>;

AnyPolicy load_any_policy(const std::optional<fs::path>& path, bool fp64) {
  if (!path) throw std::invalid_argument("solver 'sawt' needs --checkpoint");
  if (fp64) return load_policy<double>(*path);
  return load_policy<float>(*path);
}

struct SolverSpec {
  std::string solver;
  int steps = 0;
  int restarts = 1;
  int tenure = -1;
  rl::InitSolution init = rl::InitSolution::kIdentity;
  policy::ActionMode mode = policy::ActionMode::kSample;
  const AnyPolicy* policy = nullptr;
};

void check_solver(const std::string& s) {
  static const char* const names[] = {"brute", "greedy", "tabu", "sm", "sawt"};
  if (std::find_if(std::begin(names), std::end(names), [&](const char* n) { return s == n; }) == std::end(names)) {
    throw std::invalid_argument("unknown solver '" + s + "' (expected brute, greedy, tabu, sm or sawt)");
  }
}

/// Runs one solver on one instance; returns the best assignment and the
/// steps/iterations it used.
std::pair<Assignment, int> run_solver(const SolverSpec& spec, const QapInstance& inst, std::uint64_t seed) {
  if (spec.solver == "brute") return {brute_force(inst), 0};
  if (spec.solver == "sm") {
    const SpectralResult r = spectral_matching(inst);
    return {r.assignment, r.iterations};
  }
  const Assignment start(inst, start_permutation(inst.size(), spec.init, seed));
  if (spec.solver == "greedy") return {greedy_descent(inst, start, spec.steps), spec.steps};
  if (spec.solver == "tabu") {
    TabuConfig cfg;
    cfg.max_steps = spec.steps;
    cfg.tenure = spec.tenure;
    cfg.restarts = spec.restarts;
    cfg.rng_seed = seed;
    return {tabu_search(inst, start, cfg), spec.steps};
  }
  if (spec.solver == "sawt") {
    if (!spec.policy) throw std::invalid_argument("solver 'sawt' needs --checkpoint");
    const rl::SearchState st = std::visit(
        [&](const auto& p) -> rl::SearchState {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, std::monostate>) {
            throw std::invalid_argument("solver 'sawt' needs --checkpoint");
          } else {
            return rl::run_search(*p, inst, spec.steps, spec.init, seed, spec.mode);
          }
        },
        *spec.policy);
    return {st.best, spec.steps};
  }
  throw std::invalid_argument("unknown solver '" + spec.solver + "'");
}

policy::ActionMode parse_mode(const std::string& m) {
  if (m == "sample") return policy::ActionMode::kSample;
  if (m == "greedy") return policy::ActionMode::kGreedy;
  throw std::invalid_argument("action mode must be 'sample' or 'greedy', got '" + m + "'");
}

std::vector<ResultRow> run_rows(const std::vector<NamedInstance>& insts, const SolverSpec& spec, int repeats,
                                std::uint64_t seed, int threads) {
  std::vector<ResultRow> rows(insts.size() * static_cast<std::size_t>(repeats));
  rl::parallel_for(static_cast<int>(rows.size()), threads, [&](int k) {
    const auto& inst = insts[static_cast<std::size_t>(k / repeats)].instance;
    auto& row = rows[static_cast<std::size_t>(k)];
    row.instance = inst.name();
    row.solver = spec.solver;
    row.seed = seed + static_cast<std::uint64_t>(k % repeats);
    const auto t0 = std::chrono::steady_clock::now();
    const auto [best, steps] = run_solver(spec, inst, row.seed);
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    row.steps = steps;
    row.best_cost = objective(inst, best.sigma());
  });
  return rows;
}

void write_results(RunDir& run, const std::vector<ResultRow>& rows, json summary_extra = json::object()) {
  run.write("results.csv", results_csv(rows));
  run.write("results.jsonl", results_jsonl(rows));
  run.write("timings.csv", timings_csv(rows));
  json summary = summarize(rows);
  summary.update(summary_extra);
  run.write("summary.json", summary.dump(2) + "\n");
}

}  // namespace

// ---- run directory -----------------------------------------------------------

fs::path resolve_run_dir(const GlobalOptions& g, const std::string& command) {
  if (!g.out.empty()) return g.out;
  const fs::path base = fs::path("runs") / (command + "-" + utc_stamp("%Y%m%dT%H%M%SZ"));
  fs::path dir = base;
  for (int k = 2; fs::exists(dir); ++k) dir = base.string() + "-" + std::to_string(k);
  return dir;
}

RunDir::RunDir(fs::path dir, std::string command, const GlobalOptions& g, json resolved_config)
    : dir_(std::move(dir)) {
  fs::create_directories(dir_);
  manifest_ = {{"schema_version", kSchemaVersion},
               {"command", std::move(command)},
               {"argv", g.argv},
               {"seed", g.seed},
               {"threads", g.threads},
               {"fp64_check", g.fp64},
               {"resolved_config", std::move(resolved_config)},
               {"code_version", SAWT_VERSION},
               {"start_time", utc_stamp("%Y-%m-%dT%H:%M:%SZ")}};
}

void RunDir::write(const std::string& name, const std::string& content) {
  write_file(dir_ / name, content);
  record(dir_ / name);
}

void RunDir::record(const fs::path& file) {
  const std::string rel = fs::relative(file, dir_).generic_string();
  if (std::find(outputs_.begin(), outputs_.end(), rel) == outputs_.end()) outputs_.push_back(rel);
}

void RunDir::note(const std::string& key, json value) { manifest_[key] = std::move(value); }

void RunDir::finish() {
  manifest_["end_time"] = utc_stamp("%Y-%m-%dT%H:%M:%SZ");
  std::vector<std::string> sorted = outputs_;
  std::sort(sorted.begin(), sorted.end());
  manifest_["outputs"] = sorted;
  write_file(dir_ / "manifest.json", manifest_.dump(2) + "\n");
}

// ---- result formatting -------------------------------------------------------

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string results_csv(const std::vector<ResultRow>& rows) {
  std::string out = "instance,solver,seed,steps,best_cost,reference,reference_source,gap,flag\n";
  for (const auto& r : rows) {
    out += csv_field(r.instance) + "," + r.solver + "," + std::to_string(r.seed) + "," + std::to_string(r.steps) + "," +
           format_double(r.best_cost) + "," + opt_double(r.reference) + "," + r.reference_source + "," +
           opt_double(r.gap) + "," + r.flag + "\n";
  }
  return out;
}

std::string results_jsonl(const std::vector<ResultRow>& rows) {
  std::string out;
  for (const auto& r : rows) {
    json j = {{"instance", r.instance}, {"solver", r.solver},       {"seed", r.seed},
              {"steps", r.steps},       {"best_cost", r.best_cost}, {"reference_source", r.reference_source},
              {"flag", r.flag}};
    j["reference"] = r.reference ? json(*r.reference) : json(nullptr);
    j["gap"] = r.gap ? json(*r.gap) : json(nullptr);
    out += j.dump() + "\n";
  }
  return out;
}

std::string timings_csv(const std::vector<ResultRow>& rows) {
  std::string out = "instance,solver,seed,wall_ms\n";
  for (const auto& r : rows) {
    out += csv_field(r.instance) + "," + r.solver + "," + std::to_string(r.seed) + "," + format_double(r.wall_ms) + "\n";
  }
  return out;
}

json summarize(const std::vector<ResultRow>& rows) {
  json s = {{"schema_version", kSchemaVersion}, {"rows", rows.size()}};
  if (rows.empty()) return s;
  double total = 0.0;
  for (const auto& r : rows) total += r.best_cost;
  s["mean_best_cost"] = total / static_cast<double>(rows.size());

  double best_sum = 0.0, ref_sum = 0.0, gap_sum = 0.0;
  std::size_t used = 0;
  for (const auto& r : rows) {
    if (!r.flag.empty() || !r.reference || !r.gap) continue;
    best_sum += r.best_cost;
    ref_sum += *r.reference;
    gap_sum += *r.gap;
    ++used;
  }
  s["gap_rows"] = used;
  if (used > 0 && ref_sum > 0.0) {
    const double mean = best_sum / static_cast<double>(used);
    const double ref = ref_sum / static_cast<double>(used);
    s["mean"] = mean;
    s["reference_mean"] = ref;
    s["gap"] = gap(mean, ref);
    s["mean_row_gap"] = gap_sum / static_cast<double>(used);
  }
  std::vector<std::string> sources;
  for (const auto& r : rows)
    if (!r.reference_source.empty() &&
        std::find(sources.begin(), sources.end(), r.reference_source) == sources.end())
      sources.push_back(r.reference_source);
  s["reference_sources"] = sources;
  return s;
}

void set_reference(ResultRow& row, std::optional<double> reference, const std::string& source) {
  row.reference = reference;
  row.reference_source = reference ? source : "";
  if (!reference) {
    row.gap.reset();
    row.flag = "no_bound";
  } else if (*reference <= 0.0) {
    row.gap = row.best_cost;
    row.flag = "zero_bound";
  } else {
    row.gap = gap(row.best_cost, *reference);
    row.flag.clear();
  }
}

// ---- inputs and references ---------------------------------------------------

std::vector<NamedInstance> load_inputs(const std::vector<std::string>& inputs) {
  std::vector<NamedInstance> out;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      const fs::path index = p / "index.json";
      if (!fs::exists(index)) throw DataError(in + " is a directory without index.json");
      const json j = read_json(index);
      for (const auto& e : j.at("instances")) out.push_back({load_instance(p / e.at("file").get<std::string>()), {}});
    } else if (fs::exists(p) && p.extension() == ".json") {
      out.push_back({load_instance(p), {}});
    } else if (fs::exists(p) && p.extension() == ".dat") {
      const std::string name = p.stem().string();
      out.push_back({qaplib::parse_qaplib(read_text(p), name), qaplib::known_bound(name)});
    } else if (!fs::exists(p) && p.extension().empty()) {
      qaplib::Entry e = qaplib::load_entry(in);
      out.push_back({std::move(e.instance), e.upper_bound});
    } else {
      throw DataError("cannot interpret input '" + in + "' (expected .json, .dat, a generate directory or a QAPLIB name)");
    }
  }
  return out;
}

std::map<std::string, double> read_reference_file(const fs::path& path) {
  std::map<std::string, double> refs;
  if (path.extension() == ".json") {
    const json j = read_json(path);
    if (!j.is_object()) throw DataError(path.string() + ": expected an object of name -> cost");
    for (const auto& [k, v] : j.items()) refs[k] = v.get<double>();
    return refs;
  }
  std::istringstream in(read_text(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected name,cost");
    const std::string name = line.substr(0, comma);
    const std::string value = line.substr(comma + 1);
    try {
      refs[name] = std::stod(value);
    } catch (const std::exception&) {
      if (refs.empty() && (name == "instance" || name == "name")) continue;  // header
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad cost '" + value + "'");
    }
  }
  return refs;
}

fs::path default_bks_cache() {
  if (const char* env = std::getenv("SAWT_QAP_DATA_DIR"); env && *env) return fs::path(env) / "bks";
  return fs::path(".sawt-cache") / "bks";
}

Reference reference_cost(const QapInstance& inst, const std::optional<fs::path>& cache_dir) {
  if (inst.size() <= kBruteForceMaxSize) return {brute_force(inst).cost(), "brute"};
  const fs::path dir = cache_dir.value_or(default_bks_cache());
  const fs::path file = dir / (inst.name() + "-" + instance_hash(inst) + ".json");
  // entries from an older search are recomputed
  constexpr int kBksVersion = 2;
  if (fs::exists(file)) {
    const json j = read_json(file);
    if (j.value("version", 1) == kBksVersion) return {j.at("cost").get<double>(), "tabu5k"};
  }
  TabuConfig cfg;
  cfg.max_steps = 5000;
  const Assignment best = tabu_search(inst, Assignment(inst, identity_permutation(inst.size())), cfg);
  json j = {{"name", inst.name()}, {"cost", best.cost()}, {"permutation", best.sigma()}, {"steps", cfg.max_steps},
           {"version", kBksVersion}};
  write_file(file, j.dump(2) + "\n");
  return {best.cost(), "tabu5k"};
}

// ---- generate ----------------------------------------------------------------

void cmd_generate(const GenerateOptions& opt, const GlobalOptions& g) {
  if (opt.count < 0) throw std::invalid_argument("--count must be >= 0");
  if (opt.n < 2) throw std::invalid_argument("--n must be >= 2");
  if (opt.p < 0.0 || opt.p > 1.0) throw std::invalid_argument("--p must lie in [0, 1]");
  const json resolved = {{"n", opt.n}, {"count", opt.count}, {"p", opt.p}, {"seed", g.seed}};
  RunDir run(resolve_run_dir(g, "generate"), "generate", g, resolved);
  json index = {{"schema_version", kSchemaVersion}, {"n", opt.n}, {"p", opt.p}, {"seed", g.seed},
                {"instances", json::array()}};
  for (int k = 0; k < opt.count; ++k) {
    const QapInstance inst = generate_instance(opt.n, opt.p, rl::derive_seed(g.seed, 2, static_cast<std::uint64_t>(k)));
    const std::string file = "instances/" + inst.name() + ".json";
    run.write(file, to_json(inst).dump() + "\n");
    index["instances"].push_back({{"name", inst.name()}, {"file", file}});
  }
  index["count"] = opt.count;
  run.write("index.json", index.dump(2) + "\n");
  run.finish();
}

// ---- solve -------------------------------------------------------------------

void cmd_solve(const SolveOptions& opt, const GlobalOptions& g) {
  check_solver(opt.solver);
  if (opt.inputs.empty()) throw std::invalid_argument("solve needs at least one instance input");
  if (opt.steps < 0 || opt.restarts < 1 || opt.repeats < 1) {
    throw std::invalid_argument("--steps must be >= 0, --restarts and --repeats >= 1");
  }
  const rl::InitSolution init = rl::parse_init_solution(opt.init);
  const policy::ActionMode mode = parse_mode(opt.mode);

  const std::vector<NamedInstance> insts = load_inputs(opt.inputs);
  for (const auto& ni : insts) {
    if (opt.solver == "brute" && ni.instance.size() > kBruteForceMaxSize)
      throw SizeError(ni.instance.name() + ": brute force is limited to n <= " + std::to_string(kBruteForceMaxSize));
    if (opt.solver == "sm" && ni.instance.size() > kAssociationGraphMaxSize)
      throw SizeError(ni.instance.name() + ": spectral matching is limited to n <= " +
                      std::to_string(kAssociationGraphMaxSize));
  }
  const AnyPolicy pol = opt.solver == "sawt" ? load_any_policy(opt.checkpoint, g.fp64) : AnyPolicy{};

  json resolved = {{"inputs", opt.inputs},   {"solver", opt.solver},   {"steps", opt.steps},
                   {"restarts", opt.restarts}, {"tenure", opt.tenure}, {"repeats", opt.repeats},
                   {"init", opt.init},       {"mode", opt.mode},       {"reference", opt.reference}};
  if (opt.checkpoint) resolved["checkpoint"] = opt.checkpoint->string();
  RunDir run(resolve_run_dir(g, "solve"), "solve", g, resolved);

  SolverSpec spec{opt.solver, opt.steps, opt.restarts, opt.tenure, init, mode, &pol};
  std::vector<ResultRow> rows = run_rows(insts, spec, opt.repeats, g.seed, g.threads);

  std::optional<std::map<std::string, double>> file_refs;
  if (opt.reference != "auto" && opt.reference != "none") file_refs = read_reference_file(opt.reference);
  std::vector<std::optional<Reference>> refs(insts.size());
  if (opt.reference != "none") {
    rl::parallel_for(static_cast<int>(insts.size()), g.threads, [&](int k) {
      const auto& ni = insts[static_cast<std::size_t>(k)];
      if (file_refs) {
        if (auto it = file_refs->find(ni.instance.name()); it != file_refs->end())
          refs[static_cast<std::size_t>(k)] = Reference{it->second, "file"};
      } else if (ni.known_bound) {
        refs[static_cast<std::size_t>(k)] = Reference{*ni.known_bound, "qaplib"};
      } else {
        refs[static_cast<std::size_t>(k)] = reference_cost(ni.instance, opt.bks_cache);
      }
    });
  }
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& ref = refs[k / static_cast<std::size_t>(opt.repeats)];
    set_reference(rows[k], ref ? std::optional<double>(ref->cost) : std::nullopt, ref ? ref->source : "");
  }
  write_results(run, rows, {{"solver", opt.solver}});
  run.finish();
}

// ---- train -------------------------------------------------------------------

policy::SawtConfig checkpoint_model_config(const json& meta) {
  if (!meta.contains("model")) throw DataError("checkpoint metadata lacks the model configuration");
  return policy::sawt_config_from_json(meta.at("model"));
}

namespace {

template <typename Scalar>
void train_impl(const rl::TrainConfig& cfg, int start_epoch, const std::optional<nn::Checkpoint>& resume,
                const TrainOptions& opt, RunDir& run) {
  policy::SawtPolicy<Scalar> pol(cfg.model, rl::derive_seed(cfg.seed, 1));
  if (resume) nn::restore_checkpoint(*resume, pol.params());

  std::vector<QapInstance> train_set, eval_set;
  for (int k = 0; k < cfg.train_instances; ++k)
    train_set.push_back(generate_instance(cfg.problem_size, cfg.sparsity, rl::derive_seed(cfg.seed, 2, k)));
  for (int k = 0; k < cfg.eval_instances; ++k)
    eval_set.push_back(generate_instance(cfg.problem_size, cfg.sparsity, rl::derive_seed(cfg.seed, 3, k)));
  std::vector<double> refs(eval_set.size());
  std::vector<std::string> ref_sources(eval_set.size());
  rl::parallel_for(static_cast<int>(eval_set.size()), cfg.threads, [&](int k) {
    const Reference r = reference_cost(eval_set[static_cast<std::size_t>(k)], opt.bks_cache);
    refs[static_cast<std::size_t>(k)] = r.cost;
    ref_sources[static_cast<std::size_t>(k)] = r.source;
  });

  rl::Trainer<Scalar> trainer(pol, cfg);
  const fs::path metrics_path = run.path() / "metrics.jsonl";
  std::ofstream metrics(metrics_path, start_epoch > 0 ? std::ios::app : std::ios::trunc);
  if (!metrics) throw DataError("cannot write " + metrics_path.string());
  run.record(metrics_path);

  std::optional<double> last_gap;
  typename rl::Trainer<Scalar>::Hooks hooks;
  hooks.on_epoch = [&](const rl::EpochMetrics& m) {
    last_gap = m.eval_gap;
    metrics << rl::to_json(m).dump() << "\n" << std::flush;
  };
  hooks.on_checkpoint = [&](int epoch, const std::string& tag) {
    json meta = {{"model", policy::to_json(cfg.model)},
                 {"train_config", rl::to_json(cfg)},
                 {"epoch", epoch},
                 {"tag", tag},
                 {"precision", sizeof(Scalar) == 8 ? "fp64" : "fp32"}};
    meta["eval_gap"] = last_gap ? json(*last_gap) : json(nullptr);
    std::ostringstream name;
    if (tag == "periodic") {
      name << "checkpoints/epoch_" << std::setw(4) << std::setfill('0') << epoch << ".ckpt";
    } else {
      name << "checkpoints/" << tag << ".ckpt";
    }
    const fs::path path = run.path() / name.str();
    fs::create_directories(path.parent_path());
    nn::write_checkpoint(nn::make_checkpoint(pol.params(), meta), path);
    run.record(path);
  };
  trainer.train(train_set, eval_set, refs, start_epoch, hooks);

  std::vector<ResultRow> rows;
  for (int steps : cfg.test_steps) {
    const rl::EvalResult r = trainer.evaluate(eval_set, steps, rl::derive_seed(cfg.seed, 8));
    for (std::size_t k = 0; k < eval_set.size(); ++k) {
      ResultRow row;
      row.instance = eval_set[k].name();
      row.solver = "sawt";
      row.seed = cfg.seed;
      row.steps = steps;
      row.best_cost = r.best_costs[k];
      set_reference(row, refs[k], ref_sources[k]);
      rows.push_back(std::move(row));
    }
  }
  json by_steps = json::object();
  for (int steps : cfg.test_steps) {
    std::vector<ResultRow> subset;
    std::copy_if(rows.begin(), rows.end(), std::back_inserter(subset), [&](const ResultRow& r) { return r.steps == steps; });
    by_steps[std::to_string(steps)] = summarize(subset);
  }
  write_results(run, rows, {{"solver", "sawt"}, {"epochs", cfg.epochs}, {"by_steps", by_steps}});
}

}  // namespace

void cmd_train(const TrainOptions& opt, const GlobalOptions& g) {
  rl::TrainConfig cfg;
  int start_epoch = 0;
  std::optional<nn::Checkpoint> resume;
  if (opt.resume) {
    resume = nn::read_checkpoint(*opt.resume);
    if (!resume->meta.contains("train_config") || !resume->meta.contains("epoch"))
      throw DataError(opt.resume->string() + " was not written by `train`");
    cfg = rl::train_config_from_json(resume->meta.at("train_config"));
    start_epoch = resume->meta.at("epoch").get<int>();
  }
  if (g.config) cfg = rl::train_config_from_json(read_json(*g.config), cfg);
  if (!opt.overrides.empty()) cfg = rl::train_config_from_json(opt.overrides, cfg);
  if (g.seed_given || (!g.config && !opt.resume)) cfg.seed = g.seed;
  if (g.threads_given) cfg.threads = g.threads;
  cfg.validate();
  if (resume && checkpoint_model_config(resume->meta).n_init != cfg.model.n_init)
    throw DataError("resume: the checkpoint's model configuration differs from the requested one");

  json resolved = rl::to_json(cfg);
  if (opt.resume) resolved["resume"] = opt.resume->string();
  RunDir run(resolve_run_dir(g, "train"), "train", g, resolved);
  run.note("start_epoch", start_epoch);
  if (g.fp64) {
    train_impl<double>(cfg, start_epoch, resume, opt, run);
  } else {
    train_impl<float>(cfg, start_epoch, resume, opt, run);
  }
  run.finish();
}

// ---- qaplib --------------------------------------------------------------------

void cmd_qaplib_fetch(const std::vector<std::string>& names, const std::string& base_url, const GlobalOptions& g) {
  if (names.empty()) throw std::invalid_argument("qaplib fetch needs at least one instance name");
  const fs::path dest = qaplib::data_dir();
  std::optional<RunDir> run;
  if (!g.out.empty()) run.emplace(g.out, "qaplib fetch", g, json{{"names", names}, {"base_url", base_url}});
  for (const auto& name : names) {
    qaplib::parse_name(name);
    const fs::path file = qaplib::fetch(name, dest, base_url);
    std::printf("%s -> %s\n", name.c_str(), file.string().c_str());
  }
  if (run) run->finish();
}

std::string category_csv(const std::vector<ResultRow>& rows) {
  struct Agg {
    int count = 0, excluded = 0;
    double sum = 0.0, lo = 0.0, hi = 0.0;
  };
  std::map<std::string, Agg> cats;
  for (const auto& r : rows) {
    std::string cat;
    try {
      cat = qaplib::parse_name(r.instance).category;
    } catch (const std::exception&) {
      cat = r.instance;
    }
    Agg& a = cats[cat];
    if (!r.flag.empty() || !r.gap) {
      ++a.excluded;
      continue;
    }
    a.lo = a.count == 0 ? *r.gap : std::min(a.lo, *r.gap);
    a.hi = a.count == 0 ? *r.gap : std::max(a.hi, *r.gap);
    a.sum += *r.gap;
    ++a.count;
  }
  std::string out = "category,count,mean_gap,min_gap,max_gap,excluded\n";
  for (const auto& [cat, a] : cats) {
    out += cat + "," + std::to_string(a.count) + ",";
    if (a.count > 0) {
      out += format_double(a.sum / a.count) + "," + format_double(a.lo) + "," + format_double(a.hi);
    } else {
      out += ",,";
    }
    out += "," + std::to_string(a.excluded) + "\n";
  }
  return out;
}

void cmd_qaplib_bench(const QaplibBenchOptions& opt, const GlobalOptions& g) {
  check_solver(opt.solver);
  std::vector<std::string> names = opt.names;
  if (!opt.category.empty()) {
    for (const auto& n : qaplib::available_instances()) {
      try {
        if (qaplib::parse_name(n).category == opt.category) names.push_back(n);
      } catch (const ParseError&) {
      }
    }
  }
  if (names.empty()) throw std::invalid_argument("qaplib bench needs instance names or a --category with local data");
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());

  const rl::InitSolution init = rl::parse_init_solution(opt.init);
  std::vector<NamedInstance> insts;
  for (const auto& n : names) {
    qaplib::Entry e = qaplib::load_entry(n);
    insts.push_back({std::move(e.instance), e.upper_bound});
  }
  const AnyPolicy pol = opt.solver == "sawt" ? load_any_policy(opt.checkpoint, g.fp64) : AnyPolicy{};

  json resolved = {{"names", names},       {"solver", opt.solver}, {"steps", opt.steps},
                   {"restarts", opt.restarts}, {"tenure", opt.tenure}, {"init", opt.init}};
  if (opt.checkpoint) resolved["checkpoint"] = opt.checkpoint->string();
  RunDir run(resolve_run_dir(g, "qaplib-bench"), "qaplib bench", g, resolved);

  SolverSpec spec{opt.solver, opt.steps, opt.restarts, opt.tenure, init, policy::ActionMode::kSample, &pol};
  std::vector<ResultRow> rows = run_rows(insts, spec, 1, g.seed, g.threads);
  for (std::size_t k = 0; k < rows.size(); ++k) set_reference(rows[k], insts[k].known_bound, "qaplib");
  run.write("categories.csv", category_csv(rows));
  write_results(run, rows, {{"solver", opt.solver}});
  run.finish();
}

// ---- describe ------------------------------------------------------------------

std::string describe_model(const policy::SawtConfig& cfg, std::uint64_t seed) {
  const policy::SawtPolicy<float> pol(cfg, seed);
  std::size_t width = 4;
  for (const auto& p : pol.params()) width = std::max(width, p.name.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "name" << "  " << std::setw(10) << "shape"
     << "  count\n";
  for (const auto& p : pol.params()) {
    const std::string shape = std::to_string(p.value.rows()) + "x" + std::to_string(p.value.cols());
    os << std::left << std::setw(static_cast<int>(width)) << p.name << "  " << std::setw(10) << shape << "  "
       << p.count() << "\n";
  }
  os << "total parameters: " << pol.params().total_count() << " in " << pol.params().size() << " tensors\n";
  return os.str();
}

}  // namespace sawt::bench
