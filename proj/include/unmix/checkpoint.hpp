#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "unmix/tensor.hpp"

namespace unmix {

// Named-tensor container: "RMXC", u32 version, u64 meta length, JSON meta,
// then float32 little-endian payloads in meta["tensors"] order. Loading a
// container and saving the same state back is byte-identical.
struct NamedTensorList {
  std::vector<std::pair<std::string, TensorF>> items;

  TensorF& find(const std::string& name);
};

void save_container(const std::string& path, const nlohmann::json& meta,
                    const NamedTensorList& tensors);

std::pair<nlohmann::json, NamedTensorList> load_container(const std::string& path);

}  // namespace unmix
