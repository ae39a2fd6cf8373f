#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "varibad/tape.hpp"

namespace varibad {

// Checkpoint file layout: magic line, little-endian u64 manifest length,
// JSON manifest (store/param names, shapes, caller metadata), then the
// little-endian float64 payload (value, adam_m, adam_v per param, in
// manifest order).
namespace checkpoint {

inline constexpr const char* kMagic = "VBADCKPT1\n";

void save(const std::string& path, const std::vector<std::pair<std::string, const ParamStore*>>& stores,
          const nlohmann::json& meta);

// Stores must already contain identically named/shaped params; returns the
// saved metadata.
nlohmann::json load(const std::string& path,
                    const std::vector<std::pair<std::string, ParamStore*>>& stores);

nlohmann::json read_meta(const std::string& path);

}  // namespace checkpoint

}  // namespace varibad
