#include "synthbody/serialization.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "synthbody/error.hpp"

namespace synthbody {

using nlohmann::json;

namespace {

constexpr double kDeg = 3.14159265358979323846 / 180.0;

json header(const char* format) { return json{{"format", format}, {"version", kFormatVersion}}; }

json parse(std::string_view text, const char* format) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed ") + format + " file: " + e.what());
  }
  if (!j.is_object() || !j.contains("format") || j["format"] != format) {
    throw IoError(std::string("expected a '") + format + "' file");
  }
  if (!j.contains("version") || j["version"] != kFormatVersion) {
    throw IoError(std::string("unsupported ") + format + " version");
  }
  return j;
}

// Field access that turns JSON type errors into IoError.
template <class T>
T get(const json& j, const char* key) {
  if (!j.contains(key)) throw IoError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw IoError(std::string("bad field '") + key + "': " + e.what());
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? get<T>(j, key) : fallback;
}

json number(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double to_number(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw IoError("expected a number, got '" + s + "'");
  }
  if (!j.is_number()) throw IoError("expected a number");
  return j.get<double>();
}

double number_field(const json& j, const char* key, double fallback) {
  return j.contains(key) ? to_number(j.at(key)) : fallback;
}

json vec(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v[i]));
  return a;
}

Eigen::VectorXd to_vec(const json& a, Eigen::Index expected = -1) {
  if (!a.is_array()) throw IoError("expected an array");
  if (expected >= 0 && static_cast<Eigen::Index>(a.size()) != expected) {
    throw IoError("array has " + std::to_string(a.size()) + " entries, expected " + std::to_string(expected));
  }
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[i] = to_number(a[i]);
  return v;
}

Eigen::Vector3d to_vec3(const json& a) { return to_vec(a, 3); }

template <int Rows>
json columns(const Eigen::Matrix<double, Rows, Eigen::Dynamic>& m) {
  json a = json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) a.push_back(vec(m.col(c)));
  return a;
}

template <int Rows>
Eigen::Matrix<double, Rows, Eigen::Dynamic> to_columns(const json& a) {
  if (!a.is_array()) throw IoError("expected an array of points");
  Eigen::Matrix<double, Rows, Eigen::Dynamic> m(Rows, a.size());
  for (std::size_t c = 0; c < a.size(); ++c) m.col(c) = to_vec(a[c], Rows);
  return m;
}

json bools(const std::vector<bool>& b) {
  json a = json::array();
  for (bool x : b) a.push_back(x ? 1 : 0);
  return a;
}

std::vector<bool> to_bools(const json& a) {
  if (!a.is_array()) throw IoError("expected an array of flags");
  std::vector<bool> out;
  for (const json& x : a) out.push_back(x.is_boolean() ? x.get<bool>() : x.get<int>() != 0);
  return out;
}

json histogram(const Histogram1D& h, double unit) {
  json edges = json::array();
  for (double e : h.edges) edges.push_back(e / unit);
  return json{{"edges", edges}, {"weights", h.weights}};
}

Histogram1D to_histogram(const json& j, double unit) {
  Histogram1D h;
  if (j.contains("range")) {
    const auto r = to_vec(j["range"], 2);
    h = Histogram1D::uniform(r[0] * unit, r[1] * unit);
  } else if (j.contains("value")) {
    h = Histogram1D::point(to_number(j["value"]) * unit);
  } else {
    for (double e : get<std::vector<double>>(j, "edges")) h.edges.push_back(e * unit);
    h.weights = get<std::vector<double>>(j, "weights");
  }
  return h;
}

json intrinsics_json(const Intrinsics& k) {
  return json{{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

Intrinsics to_intrinsics(const json& j) {
  Intrinsics k;
  k.fx = number_field(j, "fx", k.fx);
  k.fy = number_field(j, "fy", k.fy);
  k.cx = number_field(j, "cx", k.cx);
  k.cy = number_field(j, "cy", k.cy);
  k.width = get_or<int>(j, "width", k.width);
  k.height = get_or<int>(j, "height", k.height);
  return k;
}

json camera_json(const Camera& cam) {
  json r = json::array();
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) r.push_back(cam.rotation()(i, k));
  return json{{"rotation", r}, {"position", vec(cam.position())}, {"intrinsics", intrinsics_json(cam.intrinsics())}};
}

Camera to_camera(const json& j) {
  const Eigen::VectorXd r = to_vec(j.at("rotation"), 9);
  Eigen::Matrix3d rot;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) rot(i, k) = r[3 * i + k];
  return Camera(rot, to_vec3(j.at("position")), to_intrinsics(j.at("intrinsics")));
}

json spec_json(const ScenarioSpec& s) {
  return json{{"sequence_id", s.sequence_id},
              {"subject_id", s.subject_id},
              {"action_id", s.action_id},
              {"location", vec(s.location)},
              {"camera_seed", s.camera_seed},
              {"camera_distribution", s.camera_distribution},
              {"weather", std::string(to_string(s.weather))},
              {"time_of_day", s.time_of_day},
              {"seed", s.seed}};
}

ScenarioSpec to_spec(const json& j) {
  ScenarioSpec s;
  s.sequence_id = get<std::string>(j, "sequence_id");
  s.subject_id = get<int>(j, "subject_id");
  s.action_id = get<int>(j, "action_id");
  s.location = to_vec3(j.at("location"));
  s.camera_seed = get<std::uint64_t>(j, "camera_seed");
  s.camera_distribution = get_or<std::string>(j, "camera_distribution", "default");
  s.weather = weather_from_string(get<std::string>(j, "weather"));
  s.time_of_day = get<double>(j, "time_of_day");
  s.seed = get<std::uint64_t>(j, "seed");
  return s;
}

json fit_config_json(const FitConfig& c) {
  const char* schedule = c.schedule == FitSchedule::Staged         ? "staged"
                         : c.schedule == FitSchedule::PerFrameOnly ? "per_frame"
                                                                   : "joint";
  return json{{"lambda_data", c.lambda_data},
              {"lambda_smooth", c.lambda_smooth},
              {"lambda_shape", c.lambda_shape},
              {"max_frame_iterations", c.max_frame_iterations},
              {"max_joint_iterations", c.max_joint_iterations},
              {"tolerance", c.tolerance},
              {"schedule", schedule},
              {"initial_damping", c.initial_damping},
              {"damping_increase", c.damping_increase},
              {"damping_decrease", c.damping_decrease}};
}

FitConfig to_fit_config(const json& j) {
  FitConfig c;
  c.lambda_data = number_field(j, "lambda_data", c.lambda_data);
  c.lambda_smooth = number_field(j, "lambda_smooth", c.lambda_smooth);
  c.lambda_shape = number_field(j, "lambda_shape", c.lambda_shape);
  c.max_frame_iterations = get_or<int>(j, "max_frame_iterations", c.max_frame_iterations);
  c.max_joint_iterations = get_or<int>(j, "max_joint_iterations", c.max_joint_iterations);
  c.tolerance = number_field(j, "tolerance", c.tolerance);
  const std::string schedule = get_or<std::string>(j, "schedule", "staged");
  if (schedule == "staged") {
    c.schedule = FitSchedule::Staged;
  } else if (schedule == "per_frame") {
    c.schedule = FitSchedule::PerFrameOnly;
  } else if (schedule == "joint") {
    c.schedule = FitSchedule::JointOnly;
  } else {
    throw IoError("unknown fit schedule '" + schedule + "'");
  }
  c.initial_damping = number_field(j, "initial_damping", c.initial_damping);
  c.damping_increase = number_field(j, "damping_increase", c.damping_increase);
  c.damping_decrease = number_field(j, "damping_decrease", c.damping_decrease);
  c.validate();
  return c;
}

json thresholds_json(const Thresholds& t) {
  return json{{"min_mean_speed", number(t.min_mean_speed)},
              {"max_occluded_fraction", t.max_occluded_fraction},
              {"max_out_of_frame_fraction", t.max_out_of_frame_fraction}};
}

Thresholds to_thresholds(const json& j) {
  Thresholds t;
  t.min_mean_speed = number_field(j, "min_mean_speed", t.min_mean_speed);
  t.max_occluded_fraction = number_field(j, "max_occluded_fraction", t.max_occluded_fraction);
  t.max_out_of_frame_fraction = number_field(j, "max_out_of_frame_fraction", t.max_out_of_frame_fraction);
  t.validate();
  return t;
}

std::string dump(const json& j) { return j.dump(1) + "\n"; }

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "': file not found or unreadable");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view contents) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, target);
}

std::string tree_to_json(const KinematicTree& tree) {
  json j = header("synthbody.tree");
  j["joint_count"] = tree.joint_count();
  j["parents"] = std::vector<int>(tree.parents().begin() + 1, tree.parents().end());
  json offsets = json::array();
  for (const Eigen::Vector3d& o : tree.rest_offsets()) offsets.push_back(vec(o));
  j["rest_offsets"] = offsets;
  json blend = json::array();
  for (const ShapeBlend& b : tree.shape_blends()) {
    json rows = json::array();
    for (int r = 0; r < 3; ++r) rows.push_back(vec(b.row(r).transpose()));
    blend.push_back(rows);
  }
  j["shape_blend"] = blend;
  j["names"] = tree.names();
  return dump(j);
}

KinematicTree tree_from_json(std::string_view text) {
  const json j = parse(text, "synthbody.tree");
  const int n = get<int>(j, "joint_count");
  if (n < 1) throw IoError("joint_count must be positive");
  std::vector<int> parents{-1};
  const auto rest = get<std::vector<int>>(j, "parents");
  if (static_cast<int>(rest.size()) != n - 1) throw IoError("parents must list joint_count - 1 entries");
  parents.insert(parents.end(), rest.begin(), rest.end());
  std::vector<Eigen::Vector3d> offsets;
  for (const json& o : j.at("rest_offsets")) offsets.push_back(to_vec3(o));
  std::vector<ShapeBlend> blend;
  for (const json& b : j.at("shape_blend")) {
    if (!b.is_array() || b.size() != 3) throw IoError("shape_blend entries must have 3 rows");
    const Eigen::VectorXd r0 = to_vec(b[0]);
    ShapeBlend m(3, r0.size());
    m.row(0) = r0.transpose();
    m.row(1) = to_vec(b[1], r0.size()).transpose();
    m.row(2) = to_vec(b[2], r0.size()).transpose();
    blend.push_back(std::move(m));
  }
  auto names = get<std::vector<std::string>>(j, "names");
  try {
    return KinematicTree(std::move(parents), std::move(offsets), std::move(blend), std::move(names));
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("invalid tree: ") + e.what());
  }
}

std::string camera_distribution_to_json(const CameraDistribution& d) {
  json j = header("synthbody.camera_distribution");
  j["yaw_deg"] = histogram(d.yaw, kDeg);
  j["elevation_deg"] = histogram(d.elevation, kDeg);
  j["distance_m"] = histogram(d.distance, 1.0);
  j["height_m"] = histogram(d.height, 1.0);
  j["intrinsics"] = intrinsics_json(d.intrinsics);
  return dump(j);
}

CameraDistribution camera_distribution_from_json(std::string_view text) {
  const json j = parse(text, "synthbody.camera_distribution");
  CameraDistribution d;
  if (j.contains("yaw_deg")) d.yaw = to_histogram(j["yaw_deg"], kDeg);
  if (j.contains("elevation_deg")) d.elevation = to_histogram(j["elevation_deg"], kDeg);
  if (j.contains("distance_m")) d.distance = to_histogram(j["distance_m"], 1.0);
  if (j.contains("height_m")) d.height = to_histogram(j["height_m"], 1.0);
  if (j.contains("intrinsics")) d.intrinsics = to_intrinsics(j["intrinsics"]);
  try {
    d.validate();
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("invalid camera distribution: ") + e.what());
  }
  return d;
}

std::string scene_to_json(const Scene& scene) {
  json j = header("synthbody.scene");
  json prims = json::array();
  for (const Primitive& p : scene.primitives) {
    json e;
    if (const auto* s = std::get_if<Sphere>(&p.shape())) {
      e = {{"type", "sphere"}, {"center", vec(s->center)}, {"radius", s->radius}};
    } else if (const auto* b = std::get_if<Box>(&p.shape())) {
      e = {{"type", "box"}, {"min", vec(b->min)}, {"max", vec(b->max)}};
    } else {
      const auto& c = std::get<Capsule>(p.shape());
      e = {{"type", "capsule"}, {"p0", vec(c.p0)}, {"p1", vec(c.p1)}, {"radius", c.radius}};
    }
    if (p.owner().kind == Owner::Kind::SubjectBone) e["bone"] = p.owner().bone;
    prims.push_back(e);
  }
  j["primitives"] = prims;
  j["capsule_radii"] = {{"default", scene.radii.default_radius}, {"per_bone", scene.radii.per_bone}};
  return dump(j);
}

Scene scene_from_json(std::string_view text) {
  const json j = parse(text, "synthbody.scene");
  Scene scene;
  try {
    for (const json& e : j.at("primitives")) {
      const std::string type = get<std::string>(e, "type");
      const Owner owner = e.contains("bone") ? Owner::subject_bone(get<int>(e, "bone")) : Owner::environment();
      if (type == "sphere") {
        scene.primitives.emplace_back(Sphere{to_vec3(e.at("center")), get<double>(e, "radius")}, owner);
      } else if (type == "box") {
        scene.primitives.emplace_back(Box{to_vec3(e.at("min")), to_vec3(e.at("max"))}, owner);
      } else if (type == "capsule") {
        scene.primitives.emplace_back(
            Capsule{to_vec3(e.at("p0")), to_vec3(e.at("p1")), get<double>(e, "radius")}, owner);
      } else {
        throw IoError("unknown primitive type '" + type + "'");
      }
    }
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("invalid scene: ") + e.what());
  }
  if (j.contains("capsule_radii")) {
    const json& r = j["capsule_radii"];
    scene.radii.default_radius = get_or<double>(r, "default", scene.radii.default_radius);
    scene.radii.per_bone = get_or<std::vector<double>>(r, "per_bone", {});
    if (!(scene.radii.default_radius > 0.0)) throw IoError("capsule radius must be positive");
  }
  return scene;
}

std::string catalogs_to_json(const Catalogs& c) {
  json j = header("synthbody.catalogs");
  json subjects = json::array();
  for (const SubjectEntry& s : c.subjects) subjects.push_back({{"name", s.name}, {"beta", vec(s.beta.vector())}});
  json actions = json::array();
  for (const MotionClip& clip : c.actions) {
    json frames = json::array();
    for (const PoseParams& p : clip.frames) frames.push_back(vec(p.vector()));
    json root = json::array();
    for (const Eigen::Vector3d& r : clip.root_trajectory) root.push_back(vec(r));
    actions.push_back({{"name", clip.name}, {"fps", clip.fps}, {"frames", frames}, {"root_trajectory", root}});
  }
  json locations = json::array();
  for (const LocationEntry& l : c.locations) locations.push_back({{"name", l.name}, {"position", vec(l.position)}});
  j["subjects"] = subjects;
  j["actions"] = actions;
  j["locations"] = locations;
  return dump(j);
}

Catalogs catalogs_from_json(std::string_view text) {
  const json j = parse(text, "synthbody.catalogs");
  Catalogs c;
  try {
    for (const json& s : j.at("subjects")) c.subjects.push_back({get<std::string>(s, "name"), ShapeParams(to_vec(s.at("beta")))});
    for (const json& a : j.at("actions")) {
      MotionClip clip;
      clip.name = get<std::string>(a, "name");
      clip.fps = get_or<double>(a, "fps", kClipFps);
      for (const json& f : a.at("frames")) clip.frames.emplace_back(to_vec(f));
      for (const json& r : a.at("root_trajectory")) clip.root_trajectory.push_back(to_vec3(r));
      c.actions.push_back(std::move(clip));
    }
    for (const json& l : j.at("locations")) c.locations.push_back({get<std::string>(l, "name"), to_vec3(l.at("position"))});
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("invalid catalogs: ") + e.what());
  }
  return c;
}

std::string scenario_to_json(const ScenarioSpec& spec) {
  json j = header("synthbody.scenario");
  j["spec"] = spec_json(spec);
  return j.dump();
}

ScenarioSpec scenario_from_json(std::string_view text) {
  return to_spec(parse(text, "synthbody.scenario").at("spec"));
}

std::vector<ScenarioSpec> read_scenario_file(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::vector<ScenarioSpec> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(scenario_from_json(line));
  }
  return out;
}

void write_scenario_file(const std::string& path, const std::vector<ScenarioSpec>& specs) {
  std::string text;
  for (const ScenarioSpec& s : specs) text += scenario_to_json(s) + "\n";
  write_text_file(path, text);
}

std::string sequence_to_json(const SequenceData& seq) {
  json j = header("synthbody.sequence");
  j["spec"] = spec_json(seq.spec);
  j["joint_count"] = seq.joint_count;
  j["fps"] = seq.fps;
  j["noise_sigma"] = seq.noise_sigma;
  j["noise_seed"] = seq.noise_seed;
  const CameraPlacement& p = seq.camera_placement;
  j["camera_placement"] = {{"yaw", p.yaw}, {"elevation", p.elevation}, {"distance", p.distance}, {"height", p.height}};
  json frames = json::array();
  for (const FrameData& f : seq.frames) {
    json labels = json::array();
    for (OcclusionLabel l : f.occlusion) labels.push_back(std::string(to_string(l)));
    frames.push_back({{"keypoints_3d", columns<3>(f.keypoints_3d)},
                      {"keypoints_2d", columns<2>(f.keypoints_2d)},
                      {"in_frame", bools(f.in_frame)},
                      {"in_front", bools(f.in_front)},
                      {"occlusion", labels},
                      {"camera", camera_json(f.camera)}});
  }
  j["frames"] = frames;
  if (seq.ground_truth) {
    const GroundTruth& gt = *seq.ground_truth;
    json theta = json::array();
    for (const PoseParams& t : gt.theta) theta.push_back(vec(t.vector()));
    json trans = json::array();
    for (const Translation& t : gt.translation) trans.push_back(vec(t.vector()));
    j["ground_truth"] = {{"beta", vec(gt.beta.vector())}, {"theta", theta}, {"translation", trans}};
  }
  return dump(j);
}

SequenceData sequence_from_json(std::string_view text) {
  const json j = parse(text, "synthbody.sequence");
  SequenceData seq;
  try {
    seq.spec = to_spec(j.at("spec"));
    seq.joint_count = get<int>(j, "joint_count");
    seq.fps = get_or<double>(j, "fps", kClipFps);
    seq.noise_sigma = get_or<double>(j, "noise_sigma", 0.0);
    seq.noise_seed = get_or<std::uint64_t>(j, "noise_seed", 0);
    if (j.contains("camera_placement")) {
      const json& p = j["camera_placement"];
      seq.camera_placement = {get<double>(p, "yaw"), get<double>(p, "elevation"), get<double>(p, "distance"),
                              get<double>(p, "height")};
    }
    for (const json& f : j.at("frames")) {
      std::vector<OcclusionLabel> labels;
      for (const json& l : f.at("occlusion")) labels.push_back(occlusion_label_from_string(l.get<std::string>()));
      FrameData frame{to_columns<3>(f.at("keypoints_3d")), to_columns<2>(f.at("keypoints_2d")),
                      to_bools(f.at("in_frame")),           to_bools(f.at("in_front")),
                      std::move(labels),                    to_camera(f.at("camera"))};
      const auto n = frame.keypoints_3d.cols();
      if (frame.keypoints_2d.cols() != n || static_cast<Eigen::Index>(frame.in_frame.size()) != n ||
          static_cast<Eigen::Index>(frame.in_front.size()) != n ||
          static_cast<Eigen::Index>(frame.occlusion.size()) != n) {
        throw IoError("per-keypoint arrays of a frame differ in length");
      }
      seq.frames.push_back(std::move(frame));
    }
    if (j.contains("ground_truth")) {
      const json& g = j["ground_truth"];
      GroundTruth gt{ShapeParams(to_vec(g.at("beta"))), {}, {}};
      for (const json& t : g.at("theta")) gt.theta.emplace_back(to_vec(t));
      for (const json& t : g.at("translation")) gt.translation.emplace_back(to_vec3(t));
      if (gt.theta.size() != seq.frames.size() || gt.translation.size() != seq.frames.size()) {
        throw IoError("ground truth length differs from frame count");
      }
      seq.ground_truth = std::move(gt);
    }
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("invalid sequence: ") + e.what());
  } catch (const json::exception& e) {
    throw IoError(std::string("invalid sequence: ") + e.what());
  }
  return seq;
}

SequenceData load_sequence(const std::string& path) { return sequence_from_json(read_text_file(path)); }

void save_sequence(const std::string& path, const SequenceData& seq) { write_text_file(path, sequence_to_json(seq)); }

std::string annotation_to_json(const Annotation& a) {
  json j = header("synthbody.annotation");
  j["sequence_id"] = a.sequence_id;
  j["seed"] = a.seed;
  j["beta"] = vec(a.result.beta.vector());
  json frames = json::array();
  for (int f = 0; f < a.result.frame_count(); ++f) {
    json frame = {{"theta", vec(a.result.theta[f].vector())},
                  {"translation", vec(a.result.translation[f].vector())},
                  {"residual_rms", a.result.residual_rms[f]}};
    if (f < static_cast<int>(a.keypoints.size())) frame["keypoints"] = columns<3>(a.keypoints[f]);
    frames.push_back(frame);
  }
  j["frames"] = frames;
  j["iterations"] = a.result.iterations;
  j["converged"] = a.result.converged;
  j["objective"] = a.result.objective;
  j["config"] = fit_config_json(a.config);
  return dump(j);
}

Annotation annotation_from_json(std::string_view text) {
  const json j = parse(text, "synthbody.annotation");
  Annotation a;
  try {
    a.sequence_id = get<std::string>(j, "sequence_id");
    a.seed = get_or<std::uint64_t>(j, "seed", 0);
    a.result.beta = ShapeParams(to_vec(j.at("beta")));
    for (const json& f : j.at("frames")) {
      a.result.theta.emplace_back(to_vec(f.at("theta")));
      a.result.translation.emplace_back(to_vec3(f.at("translation")));
      a.result.residual_rms.push_back(to_number(f.at("residual_rms")));
      if (f.contains("keypoints")) a.keypoints.push_back(to_columns<3>(f.at("keypoints")));
    }
    a.result.iterations = get<int>(j, "iterations");
    a.result.converged = get<bool>(j, "converged");
    a.result.objective = to_number(j.at("objective"));
    if (j.contains("config")) a.config = to_fit_config(j["config"]);
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("invalid annotation: ") + e.what());
  }
  return a;
}

Annotation load_annotation(const std::string& path) { return annotation_from_json(read_text_file(path)); }

void save_annotation(const std::string& path, const Annotation& a) { write_text_file(path, annotation_to_json(a)); }

std::string fit_config_to_json(const FitConfig& config) { return fit_config_json(config).dump(); }

FitConfig fit_config_from_json(std::string_view text) {
  try {
    return to_fit_config(json::parse(text));
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed fit config: ") + e.what());
  }
}

std::string thresholds_to_json(const Thresholds& t) { return thresholds_json(t).dump(); }

Thresholds thresholds_from_json(std::string_view text) {
  try {
    return to_thresholds(json::parse(text));
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed thresholds: ") + e.what());
  }
}

std::string quality_report_to_json(const QualityReport& r) {
  json reasons = json::array();
  for (QualityIssue q : r.reasons) reasons.push_back(std::string(to_string(q)));
  return json{{"pass", r.pass},
              {"reasons", reasons},
              {"mean_speed", r.mean_speed},
              {"occluded_fraction", r.occluded_fraction},
              {"out_of_frame_fraction", r.out_of_frame_fraction}}
      .dump();
}

std::string config_to_json(const Config& c) {
  json j = header("synthbody.config");
  j["paths"] = {{"tree", c.tree_path},
                {"scene", c.scene_path},
                {"catalogs", c.catalogs_path},
                {"camera_distribution", c.camera_distribution_path},
                {"output_dir", c.output_dir}};
  j["seed"] = c.seed;
  j["thresholds"] = thresholds_json(c.thresholds);
  j["fit"] = fit_config_json(c.fit);
  const PipelineSettings& p = c.pipeline;
  j["pipeline"] = {{"sequences", p.sequences},
                   {"generator_workers", p.generator_workers},
                   {"annotator_workers", p.annotator_workers},
                   {"max_attempts", p.max_attempts},
                   {"lease_seconds", p.lease_seconds},
                   {"noise_sigma", p.noise_sigma}};
  return dump(j);
}

Config config_from_json(std::string_view text, const std::string& base_dir) {
  const json j = parse(text, "synthbody.config");
  Config c;
  auto resolve = [&](const std::string& p) -> std::string {
    if (p.empty() || base_dir.empty() || std::filesystem::path(p).is_absolute()) return p;
    return (std::filesystem::path(base_dir) / p).lexically_normal().string();
  };
  try {
    if (j.contains("paths")) {
      const json& p = j["paths"];
      c.tree_path = resolve(get_or<std::string>(p, "tree", ""));
      c.scene_path = resolve(get_or<std::string>(p, "scene", ""));
      c.catalogs_path = resolve(get_or<std::string>(p, "catalogs", ""));
      c.camera_distribution_path = resolve(get_or<std::string>(p, "camera_distribution", ""));
      c.output_dir = resolve(get_or<std::string>(p, "output_dir", c.output_dir));
    }
    c.seed = get_or<std::uint64_t>(j, "seed", 0);
    if (j.contains("thresholds")) c.thresholds = to_thresholds(j["thresholds"]);
    if (j.contains("fit")) c.fit = to_fit_config(j["fit"]);
    if (j.contains("pipeline")) {
      const json& p = j["pipeline"];
      PipelineSettings& s = c.pipeline;
      s.sequences = get_or<int>(p, "sequences", s.sequences);
      s.generator_workers = get_or<int>(p, "generator_workers", s.generator_workers);
      s.annotator_workers = get_or<int>(p, "annotator_workers", s.annotator_workers);
      s.max_attempts = get_or<int>(p, "max_attempts", s.max_attempts);
      s.lease_seconds = number_field(p, "lease_seconds", s.lease_seconds);
      s.noise_sigma = number_field(p, "noise_sigma", s.noise_sigma);
    }
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("invalid config: ") + e.what());
  }
  return c;
}

std::vector<Keypoints> load_keypoint_frames(const std::string& path) {
  const std::string text = read_text_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError("malformed keypoint file '" + path + "': " + e.what());
  }
  const std::string format = j.is_object() ? j.value("format", "") : "";
  std::vector<Keypoints> out;
  if (format == "synthbody.sequence") {
    for (const FrameData& f : sequence_from_json(text).frames) out.push_back(f.keypoints_3d);
  } else if (format == "synthbody.annotation") {
    out = annotation_from_json(text).keypoints;
    if (out.empty()) throw IoError("annotation '" + path + "' carries no fitted keypoints");
  } else {
    throw IoError("'" + path + "' is neither a sequence nor an annotation file");
  }
  return out;
}

}  // namespace synthbody
