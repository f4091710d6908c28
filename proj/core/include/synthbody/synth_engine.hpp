#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "synthbody/body_model.hpp"
#include "synthbody/camera.hpp"
#include "synthbody/scene_occlusion.hpp"

namespace synthbody {

inline constexpr double kClipFps = 30.0;
inline constexpr int kMinClipFrames = 30;
inline constexpr int kMaxClipFrames = 80;

struct SubjectEntry {
  std::string name;
  ShapeParams beta;
};

/// Per-frame poses plus a root trajectory (translation offsets, meters).
struct MotionClip {
  std::string name;
  std::vector<PoseParams> frames;
  std::vector<Eigen::Vector3d> root_trajectory;
  double fps = kClipFps;

  int length() const { return static_cast<int>(frames.size()); }
  /// Throws InvalidArgument if the clip breaks its length or smoothness limits.
  void validate(int joint_count) const;
};

struct LocationEntry {
  std::string name;
  Eigen::Vector3d position;
};

/// Smooth procedural clip: every joint follows a sum of low-frequency sinusoids
/// and the root drifts along a random heading.
MotionClip procedural_clip(std::string name, int joint_count, int length, std::uint64_t seed);

/// Hand-authored clips for the default skeleton; nullopt if the tree lacks the named joints.
std::optional<MotionClip> walk_clip(const KinematicTree& tree, int length = 60);
std::optional<MotionClip> squat_clip(const KinematicTree& tree, int length = 80);

struct Catalogs {
  std::vector<SubjectEntry> subjects;
  std::vector<MotionClip> actions;
  std::vector<LocationEntry> locations;

  /// 20 subjects with beta uniform in [-2, 2], walk and squat clips (when the
  /// tree supports them) plus 30 procedural clips, and six locations.
  static Catalogs defaults(const KinematicTree& tree, std::uint64_t seed = 2022);
  void validate(const KinematicTree& tree) const;
};

/// Environment geometry plus the radii used for the subject's body capsules.
struct Scene {
  std::vector<Primitive> primitives;
  CapsuleRadii radii;

  /// A few boxes and pillars scattered around the default locations.
  static Scene defaults();
};

enum class Weather { Clear, Clouds, Overcast, Rain, Thunder, Fog, Snow };
inline constexpr int kWeatherCount = 7;

std::string_view to_string(Weather w);
Weather weather_from_string(std::string_view s);

/// Randomized attributes of one sequence. Weather and time of day are metadata only.
struct ScenarioSpec {
  std::string sequence_id;
  int subject_id = 0;
  int action_id = 0;
  Eigen::Vector3d location = Eigen::Vector3d::Zero();
  std::uint64_t camera_seed = 0;
  std::string camera_distribution = "default";
  Weather weather = Weather::Clear;
  double time_of_day = 12.0;  // hours in [0, 24)
  std::uint64_t seed = 0;

  bool operator==(const ScenarioSpec&) const = default;
};

/// Deterministic in (seed, catalogs). An empty sequence_id becomes "seq_<seed hex>".
ScenarioSpec generate_scenario(std::uint64_t seed, const Catalogs& catalogs,
                               std::string camera_distribution = "default",
                               std::string sequence_id = {});

struct GroundTruth {
  ShapeParams beta;
  std::vector<PoseParams> theta;
  std::vector<Translation> translation;
};

struct FrameData {
  Keypoints keypoints_3d;      // native joints followed by head-top and nose
  Eigen::Matrix2Xd keypoints_2d;
  std::vector<bool> in_frame;
  std::vector<bool> in_front;
  /// Keypoints behind the camera are labeled Visible; read together with in_front.
  std::vector<OcclusionLabel> occlusion;
  Camera camera;
};

/// One video sequence: the unit of data flowing through the pipeline.
struct SequenceData {
  ScenarioSpec spec;
  int joint_count = 0;  // native joints; keypoints carry two more
  double fps = kClipFps;
  CameraPlacement camera_placement;
  std::vector<FrameData> frames;
  std::optional<GroundTruth> ground_truth;
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 0;

  int frame_count() const { return static_cast<int>(frames.size()); }
};

/// Everything the engine needs besides the scenario itself.
struct SynthContext {
  KinematicTree tree;
  Scene scene;
  Catalogs catalogs;
  CameraDistribution camera_distribution;
};

SequenceData synthesize_sequence(const ScenarioSpec& spec, const SynthContext& ctx);

/// Adds i.i.d. N(0, sigma^2) noise to every 3D keypoint coordinate and
/// re-projects the 2D keypoints. Ground truth and occlusion labels are kept.
SequenceData add_noise(const SequenceData& seq, double sigma, std::uint64_t seed);

}  // namespace synthbody
