#include "synthbody/config.hpp"

#include <filesystem>

#include "synthbody/error.hpp"
#include "synthbody/serialization.hpp"

namespace synthbody {

void Config::validate() const {
  for (const std::string* p : {&tree_path, &scene_path, &catalogs_path, &camera_distribution_path}) {
    if (!p->empty() && !std::filesystem::exists(*p)) throw IoError("referenced file '" + *p + "' does not exist");
  }
  thresholds.validate();
  fit.validate();
  const PipelineSettings& p = pipeline;
  if (p.sequences < 0) throw InvalidArgument("sequence count must be >= 0");
  if (p.generator_workers < 1 || p.annotator_workers < 1) throw InvalidArgument("worker counts must be >= 1");
  if (p.max_attempts < 1) throw InvalidArgument("max_attempts must be >= 1");
  if (!(p.lease_seconds > 0.0)) throw InvalidArgument("lease must be positive");
  if (!(p.noise_sigma >= 0.0)) throw InvalidArgument("noise sigma must be >= 0");
}

Config load_config(const std::string& path) {
  const std::string base = std::filesystem::path(path).parent_path().string();
  Config c = config_from_json(read_text_file(path), base);
  c.validate();
  return c;
}

void save_config(const std::string& path, const Config& config) { write_text_file(path, config_to_json(config)); }

SynthContext make_context(const Config& config) {
  KinematicTree tree = config.tree_path.empty() ? KinematicTree::smpl_like()
                                                : tree_from_json(read_text_file(config.tree_path));
  Scene scene = config.scene_path.empty() ? Scene::defaults() : scene_from_json(read_text_file(config.scene_path));
  Catalogs catalogs = config.catalogs_path.empty() ? Catalogs::defaults(tree)
                                                   : catalogs_from_json(read_text_file(config.catalogs_path));
  catalogs.validate(tree);
  CameraDistribution dist = config.camera_distribution_path.empty()
                                ? CameraDistribution{}
                                : camera_distribution_from_json(read_text_file(config.camera_distribution_path));
  return SynthContext{std::move(tree), std::move(scene), std::move(catalogs), std::move(dist)};
}

}  // namespace synthbody
