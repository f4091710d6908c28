#include "synthbody/synth_engine.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <utility>

#include "synthbody/error.hpp"
#include "synthbody/random.hpp"
#include "synthbody/rotation.hpp"

namespace synthbody {
namespace {

constexpr double kPi = std::numbers::pi;

MotionClip make_clip(std::string name, int length, int joint_count,
                     const auto& pose_at, const auto& root_at) {
  MotionClip clip;
  clip.name = std::move(name);
  clip.frames.reserve(length);
  clip.root_trajectory.reserve(length);
  for (int f = 0; f < length; ++f) {
    const double t = f / kClipFps;
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(3 * joint_count);
    pose_at(t, theta);
    clip.frames.emplace_back(std::move(theta));
    clip.root_trajectory.push_back(root_at(t));
  }
  return clip;
}

}  // namespace

void MotionClip::validate(int joint_count) const {
  if (length() < kMinClipFrames || length() > kMaxClipFrames) {
    throw InvalidArgument("clip '" + name + "' must have 30 to 80 frames");
  }
  if (root_trajectory.size() != frames.size()) {
    throw InvalidArgument("clip '" + name + "' root trajectory length differs from frame count");
  }
  for (int f = 0; f < length(); ++f) {
    if (frames[f].joint_count() != joint_count) {
      throw InvalidArgument("clip '" + name + "' joint count does not match the tree");
    }
    if (!root_trajectory[f].allFinite()) throw InvalidArgument("clip '" + name + "' has non-finite root");
    if (f == 0) continue;
    for (int j = 0; j < joint_count; ++j) {
      if (geodesic_angle(rodrigues(frames[f - 1].joint(j)), rodrigues(frames[f].joint(j))) >= kPi / 2) {
        throw InvalidArgument("clip '" + name + "' rotates a joint by pi/2 or more between frames");
      }
    }
  }
}

MotionClip procedural_clip(std::string name, int joint_count, int length, std::uint64_t seed) {
  Rng rng(seed);
  struct Wave {
    Eigen::Vector3d base, amp1, amp2, phase1, phase2;
    double f1, f2;
  };
  std::vector<Wave> waves(joint_count);
  for (int j = 0; j < joint_count; ++j) {
    Wave& w = waves[j];
    const double scale = j == 0 ? 0.1 : 0.35;
    for (int a = 0; a < 3; ++a) {
      w.base[a] = uniform(rng, -0.2, 0.2);
      w.amp1[a] = uniform(rng, 0.15, 1.0) * scale;
      w.amp2[a] = uniform(rng, 0.0, 0.5) * scale;
      w.phase1[a] = uniform(rng, 0.0, 2.0 * kPi);
      w.phase2[a] = uniform(rng, 0.0, 2.0 * kPi);
    }
    w.f1 = uniform(rng, 0.15, 0.5);
    w.f2 = uniform(rng, 0.15, 0.5);
  }
  const double heading = uniform(rng, 0.0, 2.0 * kPi);
  const double speed = uniform(rng, 0.2, 1.2);
  const double bob = uniform(rng, 0.0, 0.03);
  const Eigen::Vector3d dir(std::sin(heading), 0.0, std::cos(heading));

  auto pose_at = [&](double t, Eigen::VectorXd& theta) {
    for (int j = 0; j < joint_count; ++j) {
      const Wave& w = waves[j];
      for (int a = 0; a < 3; ++a) {
        theta[3 * j + a] = w.base[a] + w.amp1[a] * std::sin(2.0 * kPi * w.f1 * t + w.phase1[a]) +
                           w.amp2[a] * std::sin(2.0 * kPi * w.f2 * t + w.phase2[a]);
      }
    }
    // Root heading follows the walking direction.
    theta[1] += heading;
  };
  auto root_at = [&](double t) -> Eigen::Vector3d {
    return speed * t * dir + Eigen::Vector3d(0.0, bob * std::sin(2.0 * kPi * 2.0 * t), 0.0);
  };
  return make_clip(std::move(name), length, joint_count, pose_at, root_at);
}

std::optional<MotionClip> walk_clip(const KinematicTree& tree, int length) {
  const int lh = tree.find("left_hip"), rh = tree.find("right_hip");
  const int lk = tree.find("left_knee"), rk = tree.find("right_knee");
  const int ls = tree.find("left_shoulder"), rs = tree.find("right_shoulder");
  const int le = tree.find("left_elbow"), re = tree.find("right_elbow");
  if (lh < 0 || rh < 0 || lk < 0 || rk < 0 || ls < 0 || rs < 0 || le < 0 || re < 0) return std::nullopt;
  const int n = tree.joint_count();
  constexpr double kStride = 1.8;  // Hz
  auto pose_at = [&](double t, Eigen::VectorXd& theta) {
    const double s = std::sin(2.0 * kPi * kStride / 2.0 * t);
    const double c = std::cos(2.0 * kPi * kStride / 2.0 * t);
    theta[3 * lh] = -0.45 * s;
    theta[3 * rh] = 0.45 * s;
    theta[3 * lk] = 0.35 + 0.35 * c;
    theta[3 * rk] = 0.35 - 0.35 * c;
    theta[3 * ls + 2] = -1.2;
    theta[3 * rs + 2] = 1.2;
    theta[3 * ls] = 0.4 * s;
    theta[3 * rs] = -0.4 * s;
    theta[3 * le + 1] = 0.3 + 0.15 * c;
    theta[3 * re + 1] = -0.3 + 0.15 * c;
    theta[1] = 0.05 * s;
  };
  auto root_at = [&](double t) -> Eigen::Vector3d {
    return {0.0, 0.02 * std::sin(2.0 * kPi * kStride * t), 1.2 * t};
  };
  return make_clip("walk", length, n, pose_at, root_at);
}

std::optional<MotionClip> squat_clip(const KinematicTree& tree, int length) {
  const int lh = tree.find("left_hip"), rh = tree.find("right_hip");
  const int lk = tree.find("left_knee"), rk = tree.find("right_knee");
  const int la = tree.find("left_ankle"), ra = tree.find("right_ankle");
  const int ls = tree.find("left_shoulder"), rs = tree.find("right_shoulder");
  if (lh < 0 || rh < 0 || lk < 0 || rk < 0 || la < 0 || ra < 0 || ls < 0 || rs < 0) return std::nullopt;
  const int n = tree.joint_count();
  const Keypoints rest = joint_regress(ShapeParams::zero(tree.shape_dim()), tree);
  const double thigh = (rest.col(lk) - rest.col(lh)).norm();
  const double shin = (rest.col(la) - rest.col(lk)).norm();
  // One full squat per clip, starting and ending upright.
  const double rate = kClipFps / length;
  auto depth = [rate](double t) { return 0.5 - 0.5 * std::cos(2.0 * kPi * rate * t); };
  auto pose_at = [&](double t, Eigen::VectorXd& theta) {
    const double q = 1.1 * depth(t);
    theta[3 * lh] = -q;
    theta[3 * rh] = -q;
    theta[3 * lk] = 2.0 * q;
    theta[3 * rk] = 2.0 * q;
    theta[3 * la] = -q;
    theta[3 * ra] = -q;
    theta[3 * ls + 2] = -1.2;
    theta[3 * rs + 2] = 1.2;
    theta[3 * ls + 1] = 0.8 * depth(t);
    theta[3 * rs + 1] = -0.8 * depth(t);
  };
  auto root_at = [&](double t) -> Eigen::Vector3d {
    const double q = 1.1 * depth(t);
    const double drop = (thigh + shin) - (thigh * std::cos(q) + shin * std::cos(q));
    return {0.0, -drop, 0.0};
  };
  return make_clip("squat", length, n, pose_at, root_at);
}

Catalogs Catalogs::defaults(const KinematicTree& tree, std::uint64_t seed) {
  Catalogs c;
  Rng rng(seed);
  for (int s = 0; s < 20; ++s) {
    Eigen::VectorXd beta(tree.shape_dim());
    for (int k = 0; k < beta.size(); ++k) beta[k] = uniform(rng, -2.0, 2.0);
    char name[32];
    std::snprintf(name, sizeof(name), "subject_%02d", s);
    c.subjects.push_back({name, ShapeParams(std::move(beta))});
  }
  if (auto walk = walk_clip(tree)) c.actions.push_back(std::move(*walk));
  if (auto squat = squat_clip(tree)) c.actions.push_back(std::move(*squat));
  for (int a = 0; a < 30; ++a) {
    const int length = kMinClipFrames + static_cast<int>(uniform_index(rng, kMaxClipFrames - kMinClipFrames + 1));
    char name[32];
    std::snprintf(name, sizeof(name), "procedural_%02d", a);
    c.actions.push_back(procedural_clip(name, tree.joint_count(), length, derive_seed(seed, 100 + a)));
  }
  c.locations = {{"downtown", {0.0, 0.0, 0.0}},   {"suburb", {60.0, 0.0, 0.0}},
                 {"beach", {120.0, 0.0, 0.0}},    {"forest", {0.0, 0.0, 60.0}},
                 {"desert", {60.0, 0.0, 60.0}},   {"harbor", {120.0, 0.0, 60.0}}};
  return c;
}

void Catalogs::validate(const KinematicTree& tree) const {
  if (subjects.empty() || actions.empty() || locations.empty()) {
    throw InvalidArgument("subject, action and location catalogs must be nonempty");
  }
  for (const SubjectEntry& s : subjects) {
    if (s.beta.dim() != tree.shape_dim()) throw InvalidArgument("subject '" + s.name + "' has wrong shape dimension");
  }
  for (const MotionClip& clip : actions) clip.validate(tree.joint_count());
}

Scene Scene::defaults() {
  Scene scene;
  const Eigen::Vector3d offsets[] = {{0.0, 0.0, 0.0},   {60.0, 0.0, 0.0}, {120.0, 0.0, 0.0},
                                     {0.0, 0.0, 60.0},  {60.0, 0.0, 60.0}, {120.0, 0.0, 60.0}};
  int k = 0;
  for (const Eigen::Vector3d& o : offsets) {
    // A low wall, a lamp post and a round obstacle near every location.
    const double side = (k % 2 == 0) ? 1.0 : -1.0;
    scene.primitives.emplace_back(Box{o + Eigen::Vector3d(3.5 * side, 0.0, -1.0),
                                      o + Eigen::Vector3d(3.5 * side + 0.4, 0.8, 1.5)});
    scene.primitives.emplace_back(Capsule{o + Eigen::Vector3d(-2.5 * side, 0.0, 3.0),
                                          o + Eigen::Vector3d(-2.5 * side, 4.0, 3.0), 0.08});
    scene.primitives.emplace_back(Sphere{o + Eigen::Vector3d(1.5 * side, 0.5, -4.0), 0.5});
    ++k;
  }
  return scene;
}

std::string_view to_string(Weather w) {
  switch (w) {
    case Weather::Clear: return "clear";
    case Weather::Clouds: return "clouds";
    case Weather::Overcast: return "overcast";
    case Weather::Rain: return "rain";
    case Weather::Thunder: return "thunder";
    case Weather::Fog: return "fog";
    case Weather::Snow: return "snow";
  }
  return "clear";
}

Weather weather_from_string(std::string_view s) {
  for (int i = 0; i < kWeatherCount; ++i) {
    if (to_string(static_cast<Weather>(i)) == s) return static_cast<Weather>(i);
  }
  throw InvalidArgument("unknown weather '" + std::string(s) + "'");
}

ScenarioSpec generate_scenario(std::uint64_t seed, const Catalogs& catalogs,
                               std::string camera_distribution, std::string sequence_id) {
  if (catalogs.subjects.empty() || catalogs.actions.empty() || catalogs.locations.empty()) {
    throw InvalidArgument("cannot generate a scenario from an empty catalog");
  }
  Rng rng(seed);
  ScenarioSpec spec;
  if (sequence_id.empty()) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "seq_%016llx", static_cast<unsigned long long>(seed));
    sequence_id = buf;
  }
  spec.sequence_id = std::move(sequence_id);
  spec.seed = seed;
  spec.subject_id = static_cast<int>(uniform_index(rng, catalogs.subjects.size()));
  spec.action_id = static_cast<int>(uniform_index(rng, catalogs.actions.size()));
  spec.location = catalogs.locations[uniform_index(rng, catalogs.locations.size())].position;
  spec.camera_seed = rng();
  spec.camera_distribution = std::move(camera_distribution);
  spec.weather = static_cast<Weather>(uniform_index(rng, kWeatherCount));
  spec.time_of_day = uniform(rng, 0.0, 24.0);
  return spec;
}

SequenceData synthesize_sequence(const ScenarioSpec& spec, const SynthContext& ctx) {
  const Catalogs& cat = ctx.catalogs;
  if (spec.subject_id < 0 || spec.subject_id >= static_cast<int>(cat.subjects.size())) {
    throw InvalidArgument("scenario subject id " + std::to_string(spec.subject_id) + " not in catalog");
  }
  if (spec.action_id < 0 || spec.action_id >= static_cast<int>(cat.actions.size())) {
    throw InvalidArgument("scenario action id " + std::to_string(spec.action_id) + " not in catalog");
  }
  if (!spec.location.allFinite()) throw InvalidArgument("scenario location must be finite");
  const KinematicTree& tree = ctx.tree;
  const ShapeParams& beta = cat.subjects[spec.subject_id].beta;
  const MotionClip& clip = cat.actions[spec.action_id];
  clip.validate(tree.joint_count());

  SequenceData seq;
  seq.spec = spec;
  seq.joint_count = tree.joint_count();
  seq.fps = clip.fps;

  GroundTruth gt{beta, {}, {}};
  std::vector<Keypoints> joints;
  joints.reserve(clip.length());
  Eigen::Vector3d mean_root = Eigen::Vector3d::Zero();
  for (int f = 0; f < clip.length(); ++f) {
    gt.theta.push_back(clip.frames[f]);
    gt.translation.emplace_back(spec.location + clip.root_trajectory[f]);
    joints.push_back(forward_kinematics(gt.theta.back(), beta, gt.translation.back(), tree));
    mean_root += joints.back().col(0);
  }
  mean_root /= clip.length();

  seq.camera_placement = sample_placement(ctx.camera_distribution, spec.camera_seed);
  const Camera camera = place_camera(seq.camera_placement, mean_root, ctx.camera_distribution.intrinsics);

  seq.frames.reserve(clip.length());
  for (int f = 0; f < clip.length(); ++f) {
    Keypoints kp = derive_extra_keypoints(joints[f], tree);
    Projection proj = project(kp, camera);
    const std::vector<Primitive> capsules = body_capsules(joints[f], tree, ctx.scene.radii);
    std::vector<OcclusionLabel> labels(kp.cols(), OcclusionLabel::Visible);
    for (Eigen::Index k = 0; k < kp.cols(); ++k) {
      if (!proj.in_front[k]) continue;
      labels[k] = classify_joint(static_cast<int>(k), kp, camera, ctx.scene.primitives, capsules, tree);
    }
    seq.frames.push_back(FrameData{std::move(kp), std::move(proj.pixels), std::move(proj.in_frame),
                                   std::move(proj.in_front), std::move(labels), camera});
  }
  seq.ground_truth = std::move(gt);
  return seq;
}

SequenceData add_noise(const SequenceData& seq, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidArgument("noise sigma must be >= 0");
  if (sigma == 0.0) return seq;
  SequenceData out = seq;
  out.noise_sigma = sigma;
  out.noise_seed = seed;
  Rng rng(seed);
  for (FrameData& frame : out.frames) {
    for (Eigen::Index k = 0; k < frame.keypoints_3d.cols(); ++k) {
      for (int a = 0; a < 3; ++a) frame.keypoints_3d(a, k) += sigma * standard_normal(rng);
    }
    Projection proj = project(frame.keypoints_3d, frame.camera);
    frame.keypoints_2d = std::move(proj.pixels);
    frame.in_frame = std::move(proj.in_frame);
    frame.in_front = std::move(proj.in_front);
  }
  return out;
}

}  // namespace synthbody
