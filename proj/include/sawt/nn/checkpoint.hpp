#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sawt/errors.hpp"
#include "sawt/nn/parameter.hpp"

namespace sawt::nn {

/// On-disk layout (all integers little-endian):
///   "SAWTCKPT" | u32 version | u32 meta_len | meta JSON | u64 adam_step |
///   u32 count | count x { u32 name_len | name | u32 rows | u32 cols |
///   f32 value[rows*cols] | f32 adam_m[..] | f32 adam_v[..] } (row-major) |
///   u64 FNV-1a of every preceding byte.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<float> value, adam_m, adam_v;  // row-major
};

struct Checkpoint {
  nlohmann::json meta;
  std::uint64_t adam_step = 0;
  std::vector<CheckpointEntry> entries;
};

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Throws std::runtime_error on bad magic, version, truncation or checksum.
Checkpoint read_checkpoint(const std::filesystem::path& path);

template <typename Scalar>
Checkpoint make_checkpoint(const ParameterSet<Scalar>& params, nlohmann::json meta) {
  Checkpoint ckpt;
  ckpt.meta = std::move(meta);
  ckpt.adam_step = static_cast<std::uint64_t>(params.adam_step);
  for (const auto& p : params) {
    CheckpointEntry e;
    e.name = p.name;
    e.rows = static_cast<std::uint32_t>(p.value.rows());
    e.cols = static_cast<std::uint32_t>(p.value.cols());
    for (Eigen::Index i = 0; i < p.value.rows(); ++i) {
      for (Eigen::Index j = 0; j < p.value.cols(); ++j) {
        e.value.push_back(static_cast<float>(p.value(i, j)));
        e.adam_m.push_back(static_cast<float>(p.adam_m(i, j)));
        e.adam_v.push_back(static_cast<float>(p.adam_v(i, j)));
      }
    }
    ckpt.entries.push_back(std::move(e));
  }
  return ckpt;
}

/// Copies checkpoint tensors into an already constructed parameter set.
/// Every parameter must be present with the same shape, and vice versa.
template <typename Scalar>
void restore_checkpoint(const Checkpoint& ckpt, ParameterSet<Scalar>& params) {
  if (ckpt.entries.size() != params.size()) {
    throw DataError("checkpoint holds " + std::to_string(ckpt.entries.size()) + " tensors, model has " +
                             std::to_string(params.size()));
  }
  for (const auto& e : ckpt.entries) {
    Parameter<Scalar>* p = params.find(e.name);
    if (!p) throw DataError("checkpoint tensor '" + e.name + "' has no matching parameter");
    if (p->value.rows() != e.rows || p->value.cols() != e.cols) {
      throw DataError("checkpoint tensor '" + e.name + "' is " + std::to_string(e.rows) + "x" +
                               std::to_string(e.cols) + ", model expects " + std::to_string(p->value.rows()) + "x" +
                               std::to_string(p->value.cols()));
    }
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
      for (Eigen::Index j = 0; j < p->value.cols(); ++j, ++k) {
        p->value(i, j) = static_cast<Scalar>(e.value[k]);
        p->adam_m(i, j) = static_cast<Scalar>(e.adam_m[k]);
        p->adam_v(i, j) = static_cast<Scalar>(e.adam_v[k]);
      }
    }
  }
  params.adam_step = static_cast<long>(ckpt.adam_step);
  params.zero_grad();
}

}  // namespace sawt::nn
