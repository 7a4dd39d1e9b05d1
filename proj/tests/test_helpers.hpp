// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "selfnerf/scene_io.hpp"

namespace selfnerf::testutil {

inline std::filesystem::path fresh_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("selfnerf_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Small shared scene: 3 frames, 40x40, 162 vertices. Synthesized once.
inline const std::string& tiny_scene_dir() {
  static std::string dir = [] {
    SyntheticSceneConfig cfg;
    cfg.width = 40;
    cfg.height = 40;
    cfg.frame_count = 3;
    cfg.icosphere_subdiv = 2;
    cfg.seed = 11;
    auto p = fresh_dir("shared_tiny_scene");
    synthesize_scene(cfg, p.string());
    return p.string();
  }();
  return dir;
}

inline const Dataset& tiny_dataset() {
  static Dataset ds = load_dataset(tiny_scene_dir());
  return ds;
}

}  // namespace selfnerf::testutil
