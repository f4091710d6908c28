#pragma once

#include <cstdint>
#include <string>

#include "synthbody/analyser.hpp"
#include "synthbody/fitter.hpp"
#include "synthbody/synth_engine.hpp"

namespace synthbody {

struct PipelineSettings {
  int sequences = 10;
  int generator_workers = 1;
  int annotator_workers = 1;
  int max_attempts = 3;
  double lease_seconds = 30.0;
  /// Keypoint noise (m) added to generated sequences before analysis and annotation.
  double noise_sigma = 0.0;
};

/// Run configuration. Empty paths select the built-in defaults.
struct Config {
  std::string tree_path;
  std::string scene_path;
  std::string catalogs_path;
  std::string camera_distribution_path;
  std::string output_dir = "out";
  Thresholds thresholds;
  FitConfig fit;
  PipelineSettings pipeline;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Reads a config file; relative paths inside it resolve against the file's directory.
/// Throws IoError if the file or any referenced file is missing.
Config load_config(const std::string& path);
void save_config(const std::string& path, const Config& config);

/// Loads the tree, scene, catalogs and camera distribution referenced by the config.
SynthContext make_context(const Config& config);

}  // namespace synthbody
