#include "sawt/qaplib/qaplib.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "sawt/errors.hpp"

#ifndef SAWT_FIXTURE_DIR
#define SAWT_FIXTURE_DIR "data/qaplib"
#endif

namespace sawt::qaplib {
namespace {

struct Token {
  std::string_view text;
  std::size_t offset;
};

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) tokens.push_back({text.substr(start, i - start), start});
  }
  return tokens;
}

double to_number(const Token& t) {
  double value = 0.0;
  const char* first = t.text.data();
  const char* last = first + t.text.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || !std::isfinite(value)) {
    throw ParseError("non-numeric token '" + std::string(t.text) + "'", t.offset);
  }
  return value;
}

int to_size(const Token& t) {
  const double v = to_number(t);
  if (v < 1 || v != std::floor(v) || v > 1 << 16) {
    throw ParseError("expected a positive integer size, got '" + std::string(t.text) + "'", t.offset);
  }
  return static_cast<int>(v);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

QapInstance parse_qaplib(std::string_view text, std::string name) {
  const auto tokens = tokenize(text);
  if (tokens.empty()) throw ParseError("empty QAPLIB input", 0);
  const int n = to_size(tokens[0]);
  const std::size_t expected = 1 + 2 * static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
  if (tokens.size() != expected) {
    const std::size_t offset = tokens.size() > expected ? tokens[expected].offset : text.size();
    throw ParseError("expected " + std::to_string(expected) + " tokens for n=" + std::to_string(n) + ", found " +
                         std::to_string(tokens.size()),
                     offset);
  }
  Eigen::MatrixXd a(n, n), b(n, n);
  std::size_t k = 1;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = to_number(tokens[k++]);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) b(i, j) = to_number(tokens[k++]);
  return QapInstance(std::move(name), std::move(a), std::move(b));
}

Solution parse_solution(std::string_view text) {
  const auto tokens = tokenize(text);
  if (tokens.size() < 2) throw ParseError("solution file needs a size and a value", text.size());
  Solution sol;
  sol.size = to_size(tokens[0]);
  sol.value = to_number(tokens[1]);
  const auto n = static_cast<std::size_t>(sol.size);
  if (tokens.size() != 2 + n) {
    const std::size_t offset = tokens.size() > 2 + n ? tokens[2 + n].offset : text.size();
    throw ParseError("expected " + std::to_string(n) + " permutation entries", offset);
  }
  Permutation p;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = to_number(tokens[2 + i]);
    if (v != std::floor(v)) throw ParseError("permutation entry is not an integer", tokens[2 + i].offset);
    p.push_back(static_cast<int>(v));
  }
  // 1-based files hold exactly {1..n}; 0-based hold {0..n-1}.
  const bool one_based = *std::min_element(p.begin(), p.end()) == 1;
  if (one_based)
    for (int& v : p) --v;
  if (!is_permutation(p, sol.size)) throw ParseError("solution is not a permutation", tokens[2].offset);
  sol.permutation = std::move(p);
  return sol;
}

InstanceName parse_name(std::string_view name) {
  std::size_t i = 0;
  while (i < name.size() && std::isalpha(static_cast<unsigned char>(name[i]))) ++i;
  const std::size_t digits_begin = i;
  while (i < name.size() && std::isdigit(static_cast<unsigned char>(name[i]))) ++i;
  if (digits_begin == 0 || i == digits_begin) {
    throw ParseError("instance name '" + std::string(name) + "' lacks category letters followed by a size",
                     digits_begin);
  }
  const std::size_t variant_begin = i;
  while (i < name.size() && std::isalpha(static_cast<unsigned char>(name[i]))) ++i;
  if (i != name.size()) throw ParseError("unexpected character in instance name '" + std::string(name) + "'", i);
  InstanceName out;
  out.category = std::string(name.substr(0, digits_begin));
  out.size = std::stoi(std::string(name.substr(digits_begin, variant_begin - digits_begin)));
  out.variant = std::string(name.substr(variant_begin));
  return out;
}

const std::map<std::string, double>& known_bounds() {
  static const std::map<std::string, double> table = {
      {"bur26a", 5426670}, {"bur26b", 3817852}, {"bur26c", 5426795}, {"bur26d", 3821225},
      {"bur26e", 5386879}, {"bur26f", 3782044}, {"bur26g", 10117172}, {"bur26h", 7098658}, {"chr12a", 9552},
      {"chr12b", 9742}, {"chr12c", 11156}, {"chr15a", 9896}, {"chr15b", 7990}, {"chr15c", 9504},
      {"chr18a", 11098}, {"chr18b", 1534}, {"chr20a", 2192}, {"chr20b", 2298}, {"chr20c", 14142},
      {"chr22a", 6156}, {"chr22b", 6194}, {"chr25a", 3796}, {"els19", 17212548}, {"esc16a", 68},
      {"esc16b", 292}, {"esc16c", 160}, {"esc16d", 16}, {"esc16e", 28}, {"esc16f", 0}, {"esc16g", 26},
      {"esc16h", 996}, {"esc16i", 14}, {"esc16j", 8}, {"esc32a", 130}, {"esc32b", 168}, {"esc32c", 642},
      {"esc32d", 200}, {"esc32e", 2}, {"esc32g", 6}, {"esc32h", 438}, {"esc64a", 116}, {"esc128", 64},
      {"had12", 1652}, {"had14", 2724}, {"had16", 3720}, {"had18", 5358}, {"had20", 6922}, {"kra30a", 88900},
      {"kra30b", 91420}, {"kra32", 88700}, {"lipa20a", 3683}, {"lipa20b", 27076}, {"lipa30a", 13178},
      {"lipa30b", 151426}, {"lipa40a", 31538}, {"lipa40b", 476581}, {"lipa50a", 62093}, {"lipa50b", 1210244},
      {"lipa60a", 107218}, {"lipa60b", 2520135}, {"lipa70a", 169755}, {"lipa70b", 4603200},
      {"lipa80a", 253195}, {"lipa80b", 7763962}, {"lipa90a", 360630}, {"lipa90b", 12490441}, {"nug12", 578},
      {"nug14", 1014}, {"nug15", 1150}, {"nug16a", 1610}, {"nug16b", 1240}, {"nug17", 1732}, {"nug18", 1930},
      {"nug20", 2570}, {"nug21", 2438}, {"nug22", 3596}, {"nug24", 3488}, {"nug25", 3744}, {"nug27", 5234},
      {"nug28", 5166}, {"nug30", 6124}, {"rou12", 235528}, {"rou15", 354210}, {"rou20", 725522},
      {"scr12", 31410}, {"scr15", 51140}, {"scr20", 110030}, {"sko42", 15812}, {"sko49", 23386},
      {"sko56", 34458}, {"sko64", 48498}, {"sko72", 66256}, {"sko81", 90998}, {"sko90", 115534},
      {"sko100a", 152002}, {"sko100b", 153890}, {"sko100c", 147862}, {"sko100d", 149576},
      {"sko100e", 149150}, {"sko100f", 149036}, {"ste36a", 9526}, {"ste36b", 15852}, {"ste36c", 8239110},
      {"tai12a", 224416}, {"tai12b", 39464925}, {"tai15a", 388214}, {"tai15b", 51765268}, {"tai17a", 491812},
      {"tai20a", 703482}, {"tai20b", 122455319}, {"tai25a", 1167256}, {"tai25b", 344355646},
      {"tai30a", 1818146}, {"tai30b", 637117113}, {"tai35a", 2422002}, {"tai35b", 283315445},
      {"tai40a", 3139370}, {"tai40b", 637250948}, {"tai50a", 4938796}, {"tai50b", 458821517},
      {"tai60a", 7205962}, {"tai60b", 608215054}, {"tai64c", 1855928}, {"tai80a", 13499184},
      {"tai80b", 818415043}, {"tai100a", 21052466}, {"tai100b", 1185996137}, {"tai150b", 498896643},
      {"tho30", 149936}, {"tho40", 240516}, {"tho150", 8133398}, {"wil50", 48816}, {"wil100", 273038}
  };
  return table;
}

std::optional<double> known_bound(const std::string& name) {
  const auto& table = known_bounds();
  if (auto it = table.find(name); it != table.end()) return it->second;
  return std::nullopt;
}

std::filesystem::path fixture_dir() { return SAWT_FIXTURE_DIR; }

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("SAWT_QAP_DATA_DIR"); env && *env) return env;
  return std::filesystem::path(".sawt-cache") / "qaplib";
}

std::vector<std::filesystem::path> search_dirs() { return {data_dir(), fixture_dir()}; }

Entry load_entry(const std::string& name) {
  for (const auto& dir : search_dirs()) {
    const auto dat = dir / (name + ".dat");
    if (!std::filesystem::exists(dat)) continue;
    Entry entry{parse_name(name), parse_qaplib(read_file(dat), name), known_bound(name), std::nullopt};
    if (entry.name.size != entry.instance.size()) {
      throw ParseError(name + ": name declares size " + std::to_string(entry.name.size) + " but file holds n=" +
                           std::to_string(entry.instance.size()),
                       0);
    }
    if (const auto sln = dir / (name + ".sln"); std::filesystem::exists(sln)) {
      entry.solution = parse_solution(read_file(sln));
    }
    return entry;
  }
  throw DataError("QAPLIB instance '" + name + "' not found; try `sawt-qap qaplib fetch " + name + "`");
}

std::vector<std::string> available_instances() {
  std::set<std::string> names;
  for (const auto& dir : search_dirs()) {
    if (!std::filesystem::is_directory(dir)) continue;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
      if (e.path().extension() == ".dat") names.insert(e.path().stem().string());
    }
  }
  return {names.begin(), names.end()};
}

}  // namespace sawt::qaplib
