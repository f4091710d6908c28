#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "synthbody/analyser.hpp"
#include "synthbody/config.hpp"
#include "synthbody/dataset_stats.hpp"
#include "synthbody/error.hpp"
#include "synthbody/fitter.hpp"
#include "synthbody/metrics.hpp"
#include "synthbody/pipeline.hpp"
#include "synthbody/serialization.hpp"

namespace synthbody::cli {
namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

FitSchedule schedule_from_string(const std::string& s) {
  if (s == "staged") return FitSchedule::Staged;
  if (s == "per_frame") return FitSchedule::PerFrameOnly;
  if (s == "joint") return FitSchedule::JointOnly;
  throw InvalidArgument("unknown schedule '" + s + "'");
}

Config base_config(const std::string& path) { return path.empty() ? Config{} : load_config(path); }

struct ThresholdFlags {
  std::optional<double> min_speed, max_occluded, max_out_of_frame;

  void add(CLI::App* cmd) {
    cmd->add_option("--min-speed", min_speed, "Minimum mean keypoint speed (m/frame)");
    cmd->add_option("--max-occluded", max_occluded, "Maximum occluded keypoint fraction");
    cmd->add_option("--max-out-of-frame", max_out_of_frame, "Maximum out-of-view keypoint fraction");
  }
  void apply(Thresholds& t) const {
    if (min_speed) t.min_mean_speed = *min_speed;
    if (max_occluded) t.max_occluded_fraction = *max_occluded;
    if (max_out_of_frame) t.max_out_of_frame_fraction = *max_out_of_frame;
  }
};

struct FitFlags {
  std::optional<double> lambda_data, lambda_smooth, lambda_shape, tolerance;
  std::optional<int> frame_iterations, joint_iterations;
  std::optional<std::string> schedule;

  void add(CLI::App* cmd) {
    cmd->add_option("--lambda-data", lambda_data, "Weight of the 3D keypoint term");
    cmd->add_option("--lambda-smooth", lambda_smooth, "Weight of the rotation smoothing term");
    cmd->add_option("--lambda-shape", lambda_shape, "Weight of the shape regularizer");
    cmd->add_option("--tolerance", tolerance, "Stop when the objective decrease falls below this");
    cmd->add_option("--max-frame-iterations", frame_iterations, "Iteration cap of the per-frame stage");
    cmd->add_option("--max-joint-iterations", joint_iterations, "Iteration cap of the joint stage");
    cmd->add_option("--schedule", schedule, "staged | per_frame | joint")
        ->check(CLI::IsMember({"staged", "per_frame", "joint"}));
  }
  void apply(FitConfig& c) const {
    if (lambda_data) c.lambda_data = *lambda_data;
    if (lambda_smooth) c.lambda_smooth = *lambda_smooth;
    if (lambda_shape) c.lambda_shape = *lambda_shape;
    if (tolerance) c.tolerance = *tolerance;
    if (frame_iterations) c.max_frame_iterations = *frame_iterations;
    if (joint_iterations) c.max_joint_iterations = *joint_iterations;
    if (schedule) c.schedule = schedule_from_string(*schedule);
  }
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synthetic human sequence toolchain: scenario generation, synthesis, quality analysis, "
               "body-model annotation, evaluation and pipeline orchestration.",
               "synthbody"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "Config file (JSON); flags override its values");

  std::function<int()> action;

  // scenario gen
  auto* scenario = app.add_subcommand("scenario", "Scenario files");
  scenario->require_subcommand(1);
  auto* gen = scenario->add_subcommand("gen", "Sample scenarios, one JSON object per line");
  std::optional<int> gen_count;
  std::optional<std::uint64_t> gen_seed;
  std::string gen_out;
  gen->add_option("--count", gen_count, "Number of scenarios (default: pipeline.sequences)");
  gen->add_option("--seed", gen_seed, "Master seed (default: config seed)");
  gen->add_option("--out", gen_out, "Output scenario file")->required();
  gen->callback([&] {
    action = [&]() -> int {
      const Config c = base_config(config_path);
      const SynthContext ctx = make_context(c);
      const int count = gen_count.value_or(c.pipeline.sequences);
      if (count < 0) throw InvalidArgument("--count must be >= 0");
      std::vector<ScenarioSpec> specs;
      for (int i = 0; i < count; ++i) specs.push_back(scenario_for_job(gen_seed.value_or(c.seed), i, ctx.catalogs));
      write_scenario_file(gen_out, specs);
      out << "wrote " << specs.size() << " scenarios to " << gen_out << "\n";
      return kExitOk;
    };
  });

  // synth
  auto* synth = app.add_subcommand("synth", "Synthesize sequences from a scenario file");
  std::string synth_in, synth_out;
  std::optional<double> synth_noise;
  synth->add_option("--scenarios", synth_in, "Scenario file")->required();
  synth->add_option("--out", synth_out, "Output directory (default: <output_dir>/sequences)");
  synth->add_option("--noise", synth_noise, "Keypoint noise sigma in meters (default: pipeline.noise_sigma)");
  synth->callback([&] {
    action = [&]() -> int {
      const Config c = base_config(config_path);
      const SynthContext ctx = make_context(c);
      const std::string dir = synth_out.empty() ? (fs::path(c.output_dir) / "sequences").string() : synth_out;
      const double sigma = synth_noise.value_or(c.pipeline.noise_sigma);
      fs::create_directories(dir);
      int n = 0;
      for (const ScenarioSpec& spec : read_scenario_file(synth_in)) {
        SequenceData seq = synthesize_sequence(spec, ctx);
        if (sigma > 0.0) seq = add_noise(seq, sigma, noise_seed_for(spec));
        save_sequence((fs::path(dir) / (spec.sequence_id + ".json")).string(), seq);
        ++n;
      }
      out << "wrote " << n << " sequences to " << dir << "\n";
      return kExitOk;
    };
  });

  // analyse
  auto* analyse = app.add_subcommand("analyse", "Run the quality gate on a sequence file");
  std::string analyse_in, analyse_out;
  ThresholdFlags analyse_flags;
  analyse->add_option("--input", analyse_in, "Sequence file")->required();
  analyse->add_option("--out", analyse_out, "Also write the report to this file");
  analyse_flags.add(analyse);
  analyse->callback([&] {
    action = [&]() -> int {
      Config c = base_config(config_path);
      analyse_flags.apply(c.thresholds);
      c.thresholds.validate();
      const QualityReport report = quality_gate(load_sequence(analyse_in), c.thresholds);
      const std::string text = quality_report_to_json(report);
      if (!analyse_out.empty()) write_text_file(analyse_out, text + "\n");
      out << text << "\n";
      return kExitOk;
    };
  });

  // fit
  auto* fit = app.add_subcommand("fit", "Fit body-model parameters to a sequence's 3D keypoints");
  std::string fit_in, fit_out;
  FitFlags fit_flags;
  fit->add_option("--input", fit_in, "Sequence file")->required();
  fit->add_option("--out", fit_out, "Annotation file to write");
  fit_flags.add(fit);
  fit->callback([&] {
    action = [&]() -> int {
      Config c = base_config(config_path);
      fit_flags.apply(c.fit);
      c.fit.validate();
      const SequenceData seq = load_sequence(fit_in);
      const SynthContext ctx = make_context(c);
      Annotation ann;
      ann.sequence_id = seq.spec.sequence_id;
      ann.seed = seq.spec.seed;
      ann.config = c.fit;
      ann.result = fit_sequence(seq, ctx.tree, c.fit);
      ann.keypoints = fitted_keypoints(ann.result, ctx.tree);
      if (!fit_out.empty()) save_annotation(fit_out, ann);
      const auto& rms = ann.result.residual_rms;
      double mean = 0.0;
      for (double r : rms) mean += r;
      mean /= std::max<std::size_t>(rms.size(), 1);
      const double worst = rms.empty() ? 0.0 : *std::max_element(rms.begin(), rms.end());
      out << "key,value\n";
      out << "sequence_id," << ann.sequence_id << "\n";
      out << "frames," << ann.result.frame_count() << "\n";
      out << "iterations," << ann.result.iterations << "\n";
      out << "converged," << (ann.result.converged ? 1 : 0) << "\n";
      out << "objective," << fmt(ann.result.objective) << "\n";
      out << "residual_rms_mean_mm," << fmt(1000.0 * mean) << "\n";
      out << "residual_rms_max_mm," << fmt(1000.0 * worst) << "\n";
      out << "seconds_per_frame," << fmt(ann.result.wall_time_per_frame) << "\n";
      return kExitOk;
    };
  });

  // pipeline run
  auto* pipeline = app.add_subcommand("pipeline", "Concurrent generation, analysis and annotation");
  pipeline->require_subcommand(1);
  auto* prun = pipeline->add_subcommand("run", "Run every job to a terminal state");
  std::optional<int> p_sequences, p_gen, p_fit, p_attempts;
  std::optional<std::uint64_t> p_seed;
  std::optional<std::string> p_out;
  std::optional<double> p_noise, p_lease;
  double p_nack = 0.0;
  prun->add_option("--sequences", p_sequences, "Number of sequences");
  prun->add_option("--gen-workers", p_gen, "Generator/analyser workers");
  prun->add_option("--fit-workers", p_fit, "Annotator workers");
  prun->add_option("--seed", p_seed, "Master seed");
  prun->add_option("--out", p_out, "Output directory");
  prun->add_option("--max-attempts", p_attempts, "Attempts per job before it stays failed");
  prun->add_option("--lease", p_lease, "Queue lease in seconds");
  prun->add_option("--noise", p_noise, "Keypoint noise sigma in meters");
  prun->add_option("--inject-nack", p_nack, "Probability that a worker nacks a message (testing)");
  ThresholdFlags p_thresholds;
  FitFlags p_fit_flags;
  p_thresholds.add(prun);
  p_fit_flags.add(prun);
  prun->callback([&] {
    action = [&]() -> int {
      Config c = base_config(config_path);
      if (p_sequences) c.pipeline.sequences = *p_sequences;
      if (p_gen) c.pipeline.generator_workers = *p_gen;
      if (p_fit) c.pipeline.annotator_workers = *p_fit;
      if (p_attempts) c.pipeline.max_attempts = *p_attempts;
      if (p_lease) c.pipeline.lease_seconds = *p_lease;
      if (p_noise) c.pipeline.noise_sigma = *p_noise;
      if (p_seed) c.seed = *p_seed;
      if (p_out) c.output_dir = *p_out;
      p_thresholds.apply(c.thresholds);
      p_fit_flags.apply(c.fit);
      PipelineOptions opts;
      opts.faults.nack_probability = p_nack;
      opts.faults.seed = c.seed;
      const PipelineSummary summary = run_pipeline(c, opts);
      const std::string text = summary_to_json(summary);
      write_text_file((fs::path(c.output_dir) / "summary.json").string(), text + "\n");
      out << text << "\n";
      if (!summary.all_terminal) {
        err << "error: pipeline stopped with non-terminal jobs\n";
        return kExitRuntime;
      }
      return kExitOk;
    };
  });

  // stats
  auto* stats = app.add_subcommand("stats", "Dataset distributions and annotation error bins");
  std::string stats_in, stats_out;
  stats->add_option("--input", stats_in, "Dataset directory (scanned recursively)")->required();
  stats->add_option("--out", stats_out, "Directory for CSV tables and SVG histograms");
  stats->callback([&] {
    action = [&]() -> int {
      const DatasetStats s = dataset_stats(stats_in);
      if (!stats_out.empty()) write_dataset_stats(s, stats_out);
      out << summary_csv(s);
      out << histogram_csv({s.yaw_deg, s.elevation_deg, s.distance_m});
      if (!s.error_bins.empty()) out << error_bins_csv(s.error_bins);
      return kExitOk;
    };
  });

  // eval
  auto* eval = app.add_subcommand("eval", "MPJPE and PA-MPJPE between two keypoint files");
  std::string eval_pred, eval_gt;
  bool eval_rigid = false, eval_all = false;
  eval->add_option("--pred", eval_pred, "Predicted keypoints (sequence or annotation file)")->required();
  eval->add_option("--gt", eval_gt, "Ground-truth keypoints (sequence or annotation file)")->required();
  eval->add_flag("--rigid", eval_rigid, "Align without scale");
  eval->add_flag("--all-keypoints", eval_all, "Include the derived head-top and nose keypoints");
  eval->callback([&] {
    action = [&]() -> int {
      const auto pred = load_keypoint_frames(eval_pred);
      const auto gt = load_keypoint_frames(eval_gt);
      if (pred.size() != gt.size()) throw InvalidArgument("frame counts differ");
      double m = 0.0, pa = 0.0;
      for (std::size_t f = 0; f < pred.size(); ++f) {
        if (pred[f].cols() != gt[f].cols()) throw InvalidArgument("keypoint counts differ");
        // Both file kinds carry the native joints followed by head-top and nose.
        const Eigen::Index cols = eval_all ? gt[f].cols() : std::max<Eigen::Index>(gt[f].cols() - 2, 0);
        m += mpjpe(pred[f].leftCols(cols), gt[f].leftCols(cols));
        pa += pa_mpjpe(pred[f].leftCols(cols), gt[f].leftCols(cols), !eval_rigid);
      }
      const double n = static_cast<double>(std::max<std::size_t>(pred.size(), 1));
      out << "metric,value\n";
      out << "frames," << pred.size() << "\n";
      out << "mpjpe_mm," << fmt(m / n) << "\n";
      out << "pa_mpjpe_mm," << fmt(pa / n) << "\n";
      return kExitOk;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }
  if (!action) {
    err << app.help();
    return kExitUsage;
  }
  try {
    return action();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"synthbody"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace synthbody::cli
