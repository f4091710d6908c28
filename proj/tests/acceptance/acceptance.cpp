// Acceptance driver: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "analyser_cases.hpp"
#include "gradient_check.hpp"
#include "synthbody/analyser.hpp"
#include "synthbody/config.hpp"
#include "synthbody/fitter.hpp"
#include "synthbody/job_database.hpp"
#include "synthbody/message_queue.hpp"
#include "synthbody/metrics.hpp"
#include "synthbody/pipeline.hpp"
#include "synthbody/rotation.hpp"
#include "synthbody/scene_occlusion.hpp"
#include "synthbody/serialization.hpp"
#include "test_support.hpp"

using namespace synthbody;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;
  std::vector<std::string> failures;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      failures.push_back(what);
    }
  }
};

constexpr int kSequences = 50;
constexpr std::uint64_t kSeed = 7100;

SynthContext default_context() {
  SynthContext ctx{KinematicTree::smpl_like(), Scene::defaults(), {}, {}};
  ctx.catalogs = Catalogs::defaults(ctx.tree);
  return ctx;
}

std::vector<SequenceData> clean_sequences(const SynthContext& ctx) {
  std::vector<SequenceData> out;
  for (int i = 0; i < kSequences; ++i) {
    const ScenarioSpec spec = generate_scenario(derive_seed(kSeed, i), ctx.catalogs, "default", job_id(i));
    out.push_back(synthesize_sequence(spec, ctx));
  }
  return out;
}

// fit targets are the native joints; the two derived head points are not scored
double frame_rms(const Keypoints& a, const Keypoints& b) {
  return std::sqrt((a - b).colwise().squaredNorm().mean());
}

// mean geodesic change of every joint rotation between consecutive frames
double pose_jitter(const FitResult& r) {
  double sum = 0.0;
  int n = 0;
  for (int f = 0; f + 1 < r.frame_count(); ++f) {
    for (int j = 0; j < r.theta[f].joint_count(); ++j) {
      sum += geodesic_angle(rodrigues(r.theta[f].joint(j)), rodrigues(r.theta[f + 1].joint(j)));
      ++n;
    }
  }
  return n ? sum / n : 0.0;
}

void round_trip(Verdict& v, const SynthContext& ctx, const std::vector<SequenceData>& seqs) {
  int good = 0;
  int frames = 0;
  double seconds = 0.0;
  double worst = 0.0;
  double worst_mean = 0.0;
  for (const SequenceData& seq : seqs) {
    v.require(seq.joint_count == 24, seq.spec.sequence_id + " joint count");
    v.require(seq.frame_count() >= kMinClipFrames && seq.frame_count() <= kMaxClipFrames,
              seq.spec.sequence_id + " frame count");
    const FitResult r = fit_sequence(seq, ctx.tree);
    const auto fitted = fitted_keypoints(r, ctx.tree);
    double max_rms = 0.0;
    double mean_rms = 0.0;
    for (int f = 0; f < seq.frame_count(); ++f) {
      const int n = seq.joint_count;
      const double rms = frame_rms(fitted[f].leftCols(n), seq.frames[f].keypoints_3d.leftCols(n));
      max_rms = std::max(max_rms, rms);
      mean_rms += rms / seq.frame_count();
    }
    worst = std::max(worst, max_rms);
    worst_mean = std::max(worst_mean, mean_rms);
    if (max_rms < 0.005) ++good;
    frames += seq.frame_count();
    seconds += r.wall_time_per_frame * seq.frame_count();
  }
  const double per_frame = seconds / frames;
  v.require(good >= 49, "fewer than 49 sequences under 5 mm");
  v.require(per_frame <= 1.0, "slower than 1 s per frame");
  v.detail << good << "/" << seqs.size() << " with every frame under 5 mm, worst frame " << 1000.0 * worst
           << " mm, worst sequence mean " << 1000.0 * worst_mean << " mm, "
           << per_frame << " s/frame";
}

void noise_robustness(Verdict& v, const SynthContext& ctx, const std::vector<SequenceData>& seqs) {
  constexpr double kSigma = 0.010;
  int good = 0;
  int smoother = 0;
  double worst = 0.0;
  FitConfig smooth;
  smooth.lambda_smooth = 0.1;
  FitConfig rough = smooth;
  rough.lambda_smooth = 0.0;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const SequenceData noisy = add_noise(seqs[i], kSigma, derive_seed(kSeed + 1, i));
    const FitResult a = fit_sequence(noisy, ctx.tree, smooth);
    const auto fitted = fitted_keypoints(a, ctx.tree);
    double pa = 0.0;
    const int n = noisy.joint_count;
    for (int f = 0; f < noisy.frame_count(); ++f) {
      pa += pa_mpjpe(fitted[f].leftCols(n), seqs[i].frames[f].keypoints_3d.leftCols(n));
    }
    pa /= noisy.frame_count();
    worst = std::max(worst, pa);
    if (pa <= 2000.0 * kSigma) ++good;

    const FitResult b = fit_sequence(noisy, ctx.tree, rough);
    if (pose_jitter(a) <= pose_jitter(b)) {
      ++smoother;
    } else {
      v.require(false, noisy.spec.sequence_id + " smoothing increased jitter");
    }
  }
  v.require(good >= 45, "fewer than 45 sequences within 2 sigma");
  v.detail << good << "/" << seqs.size() << " PA-MPJPE <= 20 mm (worst " << worst << " mm), smoothing reduced jitter on "
           << smoother << "/" << seqs.size();
}

void gradients(Verdict& v) {
  const KinematicTree tree = KinematicTree::smpl_like();
  Rng rng(kSeed + 2);
  double worst = 0.0;
  long checked = 0;
  for (int i = 0; i < 100; ++i) {
    FitState state;
    FitTargets targets;
    testsupport::random_problem(rng, tree, state, targets, 1 + i % 3);
    FitConfig config;
    config.lambda_smooth = uniform(rng, 0.0, 1.0);
    config.lambda_shape = uniform(rng, 0.0, 0.1);
    const auto g = testsupport::check_gradient(state, targets, tree, config);
    worst = std::max(worst, g.max_relative_error);
    checked += g.checked;
  }
  v.require(worst < 1e-4, "relative error above 1e-4");
  v.detail << "100 states, " << checked << " components, worst relative error " << worst;
}

Keypoints random_cloud(Rng& rng, int n = 26) {
  Keypoints k(3, n);
  for (int i = 0; i < n; ++i) k.col(i) = Eigen::Vector3d(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
  return k;
}

void metric_suite(Verdict& v) {
  Rng rng(kSeed + 3);
  double drift = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Keypoints gt = random_cloud(rng);
    Keypoints pred = gt;
    for (int k = 0; k < pred.cols(); ++k) {
      pred.col(k) += Eigen::Vector3d(uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05));
    }
    const double base = pa_mpjpe(pred, gt);
    const Eigen::Matrix3d r = testsupport::random_rotation(rng);
    const double s = uniform(rng, 0.5, 2.0);
    const Eigen::Vector3d t(uniform(rng, -5, 5), uniform(rng, -5, 5), uniform(rng, -5, 5));
    const Keypoints moved = ((s * r * pred).colwise() + t).eval();
    drift = std::max(drift, std::abs(pa_mpjpe(moved, gt) - base));
  }
  v.require(drift < 1e-9, "similarity drift above 1e-9 mm");

  int ordered = 0;
  for (int i = 0; i < 1000; ++i) {
    const Keypoints a = random_cloud(rng), b = random_cloud(rng);
    if (pa_mpjpe(a, b) <= mpjpe(a, b) + 1e-12) ++ordered;
  }
  v.require(ordered == 1000, "PA-MPJPE exceeded MPJPE");

  Keypoints gt = Keypoints::Zero(3, 1);
  Keypoints pred(3, 1);
  pred << 0.003, 0.004, 0.0;
  const bool single = std::abs(mpjpe(pred, gt) - 5.0) < 1e-12;
  v.require(single, "(3,4,0) mm example");
  const Keypoints cloud = random_cloud(rng);
  const Keypoints offset = cloud.colwise() + Eigen::Vector3d(0.003, 0.0, 0.0);
  const double off_mpjpe = mpjpe(offset, cloud);
  const double off_pa = pa_mpjpe(offset, cloud);
  v.require(std::abs(off_mpjpe - 3.0) < 1e-12, "offset MPJPE");
  v.require(off_pa < 1e-9, "offset PA-MPJPE");
  v.detail << "max drift " << drift << " mm, ordering " << ordered << "/1000, offset " << off_mpjpe << " / " << off_pa
           << " mm";
}

Config pipeline_config(const testsupport::TempDir& dir, int sequences, int gen, int ann) {
  Config c = load_config(testsupport::data_path("config.json"));
  c.output_dir = dir.str();
  c.pipeline.sequences = sequences;
  c.pipeline.generator_workers = gen;
  c.pipeline.annotator_workers = ann;
  return c;
}

void pipeline_soundness(Verdict& v) {
  testsupport::TempDir dir("accept_pipeline");
  const Config c = pipeline_config(dir, 100, 4, 4);
  PipelineOptions faulty;
  faulty.faults.nack_probability = 0.1;
  faulty.faults.seed = kSeed + 4;
  faulty.faults.crash_after_write = 5;
  faulty.faults.halt_after_annotated = 30;
  const PipelineSummary first = run_pipeline(c, faulty);
  v.require(first.halted, "first run did not halt");
  v.require(first.abandoned > 0, "crash was not injected");

  PipelineOptions restart;
  restart.faults.nack_probability = 0.1;
  restart.faults.seed = kSeed + 5;
  const PipelineSummary second = run_pipeline(c, restart);
  v.require(second.all_terminal, "jobs left non-terminal");
  v.require(second.total == 100, "job count");

  const LogValidation log = validate_transition_log(dir.file("db/transitions.log"));
  v.require(log.ok, "transition log invalid");
  v.require(log.final_status.size() == 100, "jobs lost from the log");
  int annotated = 0;
  for (const auto& [id, st] : log.final_status) {
    if (st == JobStatus::Annotated) {
      ++annotated;
      v.require(fs::exists(dir.file("annotations/" + id + ".json")), id + " annotation missing");
    } else {
      v.require(st == JobStatus::AnalysisFailed, id + " unexpected terminal status");
    }
  }
  for (const auto& [id, n] : log.annotated_transitions) v.require(n == 1, id + " annotated twice");
  int files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.file("annotations"))) ++files;
  v.require(files == annotated, "stray annotation files");

  MessageQueue q;
  for (int i = 0; i < 1000; ++i) q.enqueue(std::to_string(i));
  int in_order = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto m = q.dequeue(10.0);
    if (m && m->payload == std::to_string(i)) ++in_order;
    if (m) q.ack(*m);
  }
  v.require(in_order == 1000, "FIFO order broken");
  v.detail << annotated << " annotated, " << 100 - annotated << " rejected, nacks " << first.nacks + second.nacks
           << ", abandoned " << first.abandoned << ", FIFO " << in_order << "/1000";
}

void occlusion_labels(Verdict& v) {
  auto camera_at = [](const Eigen::Vector3d& eye, const Eigen::Vector3d& target) {
    return look_at(eye, target, Intrinsics{});
  };
  std::vector<ShapeBlend> arm_blends(3, ShapeBlend::Zero(3, 1));
  const KinematicTree arm({-1, 0, 1}, {Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitX()},
                          arm_blends, {"shoulder", "elbow", "wrist"});
  const Keypoints k = joint_regress(ShapeParams::zero(1), arm);
  const Eigen::Vector3d eye(1, 0, -6);
  const Camera cam = camera_at(eye, {1, 0, 0});
  for (int j = 0; j < 3; ++j) v.require(classify_joint(j, k, cam, {}, {}, arm) == OcclusionLabel::Visible, "empty scene");
  const Eigen::Vector3d target = k.col(1);
  const Eigen::Vector3d dir = (target - eye).normalized();
  int slides = 0;
  for (double s = 1.0; s < 10.0; s += 0.25) {
    const std::vector<Primitive> env{Primitive(Sphere{eye + s * dir, 0.3})};
    const bool before = s - 0.3 < (target - eye).norm() - kHitTolerance;
    const OcclusionLabel want = before ? OcclusionLabel::Occluded : OcclusionLabel::Visible;
    v.require(classify_joint(1, k, cam, env, {}, arm) == want, "sphere occluder");
    ++slides;
  }

  std::vector<ShapeBlend> blends(4, ShapeBlend::Zero(3, 1));
  const KinematicTree limb({-1, 0, 1, 2},
                           {Eigen::Vector3d::Zero(), Eigen::Vector3d(0, 1, 0), Eigen::Vector3d(0.5, -1, -1),
                            Eigen::Vector3d(-1, 0, 0)},
                           blends, {"hip", "chest", "elbow", "hand"});
  const Keypoints lk = joint_regress(ShapeParams::zero(1), limb);
  const Camera front = camera_at({0, 0, -4}, {0, 0, 0});
  const auto caps = body_capsules(lk, limb);
  v.require(classify_joint(0, lk, front, {}, caps, limb) == OcclusionLabel::SelfOccluded, "limb capsule");
  const std::vector<Primitive> wall{Primitive(Sphere{{0, 0, -2}, 0.2})};
  v.require(classify_joint(0, lk, front, wall, caps, limb) == OcclusionLabel::Occluded, "environment before limb");

  Rng rng(kSeed + 6);
  int agree = 0;
  int hits = 0;
  double worst = 0.0;
  for (int s = 0; s < 10; ++s) {
    const auto scene = testsupport::random_scene(rng, 24);
    for (int i = 0; i < 100; ++i) {
      const auto ray = testsupport::random_ray(rng, scene);
      const auto got = ray_cast(ray.origin, ray.dir, scene);
      const auto want = testsupport::ray_march(ray.origin, ray.dir, scene);
      bool same = got.has_value() == want.has_value();
      if (same && got) {
        ++hits;
        const double err = std::abs(got->distance - want->distance);
        worst = std::max(worst, err);
        same = got->index == want->index && err < 1e-3;
      }
      if (same) ++agree;
    }
  }
  v.require(agree == 1000, "ray cast disagrees with the oracle");
  v.detail << slides << " occluder placements, limb case, rays " << agree << "/1000 agree (" << hits
           << " hits, worst " << worst << " m)";
}

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const char* sub : {"sequences", "annotations"}) {
    if (!fs::exists(root / sub)) continue;
    for (const auto& e : fs::directory_iterator(root / sub)) {
      out[std::string(sub) + "/" + e.path().filename().string()] = read_text_file(e.path().string());
    }
  }
  return out;
}

void determinism(Verdict& v) {
  testsupport::TempDir a("accept_det_a");
  testsupport::TempDir b("accept_det_b");
  run_pipeline(pipeline_config(a, 10, 2, 2));
  run_pipeline(pipeline_config(b, 10, 2, 2));
  const auto fa = tree_bytes(a.path());
  const auto fb = tree_bytes(b.path());
  v.require(!fa.empty(), "no output files");
  v.require(fa == fb, "outputs differ");
  std::size_t bytes = 0;
  for (const auto& [name, text] : fa) bytes += text.size();
  v.detail << fa.size() << " files, " << bytes << " bytes identical";
}

void analyser(Verdict& v) {
  using testsupport::CaseOptions;
  using testsupport::constructed_sequence;
  using Reasons = std::set<QualityIssue>;
  CaseOptions still;
  still.step = 0.0;
  v.require(quality_gate(constructed_sequence(still)).reasons == Reasons{QualityIssue::Stationary}, "stationary");
  CaseOptions hidden;
  hidden.label = OcclusionLabel::Occluded;
  v.require(quality_gate(constructed_sequence(hidden)).reasons == Reasons{QualityIssue::SevereOcclusion}, "occluded");
  CaseOptions away;
  away.in_frame = false;
  v.require(quality_gate(constructed_sequence(away)).reasons == Reasons{QualityIssue::OutOfView}, "out of view");
  CaseOptions all = still;
  all.label = OcclusionLabel::Occluded;
  all.in_frame = false;
  v.require(quality_gate(constructed_sequence(all)).reasons ==
                Reasons{QualityIssue::Stationary, QualityIssue::SevereOcclusion, QualityIssue::OutOfView},
            "combined");
  v.require(quality_gate(constructed_sequence({})).pass, "clean sequence");

  // declared defaults, and the verdicts they give on a fixed synthesized set
  const Thresholds t;
  v.require(t.min_mean_speed == 0.005 && t.max_occluded_fraction == 0.6 && t.max_out_of_frame_fraction == 0.3,
            "defaults moved");
  const Config config = load_config(testsupport::data_path("config.json"));
  v.require(config.thresholds.min_mean_speed == t.min_mean_speed &&
                config.thresholds.max_occluded_fraction == t.max_occluded_fraction &&
                config.thresholds.max_out_of_frame_fraction == t.max_out_of_frame_fraction,
            "shipped config thresholds differ from defaults");
  const SynthContext ctx = make_context(config);
  std::string verdicts;
  for (int i = 0; i < 20; ++i) {
    const SequenceData seq = synthesize_sequence(scenario_for_job(config.seed, i, ctx.catalogs), ctx);
    verdicts += quality_gate(seq, config.thresholds).pass ? 'P' : 'F';
  }
  static const std::string kPinned = "PPPPPPPPPPPPPPPPPPPP";
  v.require(verdicts == kPinned, "pinned verdicts changed: " + verdicts);
  v.detail << "reason sets exact, pinned verdicts " << verdicts;
}

}  // namespace

int main() {
  const SynthContext ctx = default_context();
  std::vector<SequenceData> seqs;

  const std::vector<std::pair<std::string, std::function<void(Verdict&)>>> criteria{
      {"round-trip annotation",
       [&](Verdict& v) {
         seqs = clean_sequences(ctx);
         round_trip(v, ctx, seqs);
       }},
      {"noise robustness",
       [&](Verdict& v) {
         if (seqs.empty()) seqs = clean_sequences(ctx);
         noise_robustness(v, ctx, seqs);
       }},
      {"gradient correctness", gradients},
      {"metric suite", metric_suite},
      {"pipeline soundness", pipeline_soundness},
      {"occlusion labeling", occlusion_labels},
      {"determinism", determinism},
      {"analyser", analyser},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[i].second(v);
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!v.pass) ++failed;
    std::cout << (v.pass ? "PASS" : "FAIL") << " " << i + 1 << " " << criteria[i].first << ": " << v.detail.str();
    std::printf(" [%.1f s]", secs);
    std::cout.flush();
    std::cout << "\n";
    for (std::size_t f = 0; f < std::min<std::size_t>(v.failures.size(), 5); ++f) {
      std::cout << "    " << v.failures[f] << "\n";
    }
  }
  std::cout << (failed ? "FAILED " : "ALL PASSED ") << criteria.size() - failed << "/" << criteria.size() << "\n";
  return failed ? 1 : 0;
}
