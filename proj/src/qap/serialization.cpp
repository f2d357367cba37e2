#include "sawt/qap/serialization.hpp"

#include <fstream>
#include <stdexcept>

#include "sawt/errors.hpp"

namespace sawt {
namespace {

nlohmann::json flat(const Eigen::MatrixXd& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

Eigen::MatrixXd unflat(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows * cols) {
    throw std::invalid_argument(std::string("instance JSON: field '") + what + "' must hold " +
                                std::to_string(rows * cols) + " numbers");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j[static_cast<std::size_t>(i * cols + c)].get<double>();
  return m;
}

}  // namespace

nlohmann::json to_json(const QapInstance& inst) {
  nlohmann::json j;
  j["name"] = inst.name();
  j["n"] = inst.size();
  j["flow"] = flat(inst.flow());
  j["distance"] = flat(inst.distance());
  if (inst.coords()) j["coords"] = flat(*inst.coords());
  if (inst.seed) j["seed"] = *inst.seed;
  if (inst.sparsity) j["p"] = *inst.sparsity;
  return j;
}

QapInstance instance_from_json(const nlohmann::json& j) {
  const auto n = j.at("n").get<Eigen::Index>();
  if (n < 1) throw std::invalid_argument("instance JSON: n must be positive");
  std::optional<Coords> coords;
  if (j.contains("coords")) coords = Coords(unflat(j["coords"], n, 2, "coords"));
  QapInstance inst(j.value("name", std::string{}), unflat(j.at("flow"), n, n, "flow"),
                   unflat(j.at("distance"), n, n, "distance"), std::move(coords));
  if (j.contains("seed")) inst.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("p")) inst.sparsity = j["p"].get<double>();
  return inst;
}

void save_instance(const QapInstance& inst, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json(inst).dump() << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

QapInstance load_instance(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  return instance_from_json(nlohmann::json::parse(in));
}

}  // namespace sawt
