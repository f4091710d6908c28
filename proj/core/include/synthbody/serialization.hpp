#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "synthbody/analyser.hpp"
#include "synthbody/body_model.hpp"
#include "synthbody/camera.hpp"
#include "synthbody/config.hpp"
#include "synthbody/fitter.hpp"
#include "synthbody/synth_engine.hpp"

// Every file is JSON with a "format" tag and an integer "version". Arrays of
// points are lists of [x, y, z] (or [u, v]) rows; matrices are row-major.
// Points behind the camera have null 2D coordinates.

namespace synthbody {

inline constexpr int kFormatVersion = 1;

std::string read_text_file(const std::string& path);
/// Writes through a temporary file and renames it into place.
void write_text_file(const std::string& path, std::string_view contents);

std::string tree_to_json(const KinematicTree& tree);
KinematicTree tree_from_json(std::string_view text);

/// Angles are stored in degrees.
std::string camera_distribution_to_json(const CameraDistribution& dist);
CameraDistribution camera_distribution_from_json(std::string_view text);

std::string scene_to_json(const Scene& scene);
Scene scene_from_json(std::string_view text);

std::string catalogs_to_json(const Catalogs& catalogs);
Catalogs catalogs_from_json(std::string_view text);

/// Single line, no trailing newline.
std::string scenario_to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_from_json(std::string_view text);
/// One scenario per line.
std::vector<ScenarioSpec> read_scenario_file(const std::string& path);
void write_scenario_file(const std::string& path, const std::vector<ScenarioSpec>& specs);

std::string sequence_to_json(const SequenceData& seq);
SequenceData sequence_from_json(std::string_view text);
SequenceData load_sequence(const std::string& path);
void save_sequence(const std::string& path, const SequenceData& seq);

struct Annotation {
  std::string sequence_id;
  std::uint64_t seed = 0;
  FitResult result;
  std::vector<Keypoints> keypoints;  // fitted, with head-top and nose
  FitConfig config;
};

/// Wall time is not written so that annotation files are reproducible byte for byte.
std::string annotation_to_json(const Annotation& annotation);
Annotation annotation_from_json(std::string_view text);
Annotation load_annotation(const std::string& path);
void save_annotation(const std::string& path, const Annotation& annotation);

std::string fit_config_to_json(const FitConfig& config);
FitConfig fit_config_from_json(std::string_view text);
std::string thresholds_to_json(const Thresholds& thresholds);
Thresholds thresholds_from_json(std::string_view text);
std::string quality_report_to_json(const QualityReport& report);

std::string config_to_json(const Config& config);
/// base_dir resolves relative paths.
Config config_from_json(std::string_view text, const std::string& base_dir = {});

/// Per-frame keypoints of a sequence (stored 3D keypoints) or an annotation
/// (fitted keypoints), chosen by the file's format tag.
std::vector<Keypoints> load_keypoint_frames(const std::string& path);

}  // namespace synthbody
