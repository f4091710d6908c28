#include "synthbody/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <set>
#include <thread>

#include "json.hpp"
#include "synthbody/analyser.hpp"
#include "synthbody/message_queue.hpp"
#include "synthbody/random.hpp"
#include "synthbody/serialization.hpp"

namespace synthbody {

namespace fs = std::filesystem;
using nlohmann::json;

std::string job_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "seq_%06d", index);
  return buf;
}

std::uint64_t noise_seed_for(const ScenarioSpec& spec) { return derive_seed(spec.seed, 0x6e6f697365ULL); }

ScenarioSpec scenario_for_job(std::uint64_t master_seed, int index, const Catalogs& catalogs) {
  return generate_scenario(derive_seed(master_seed, static_cast<std::uint64_t>(index)), catalogs, "default",
                           job_id(index));
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Shared {
  const Config& config;
  const PipelineOptions& options;
  SynthContext ctx;
  JobDatabase db;
  MessageQueue scenarios;
  MessageQueue annotate;
  fs::path seq_dir;
  fs::path ann_dir;

  std::atomic<bool> done{false};
  std::atomic<bool> halt{false};
  std::atomic<int> crash_budget{0};
  std::atomic<int> annotation_attempts{0};
  std::atomic<int> nacks{0};
  std::atomic<int> abandoned{0};
  std::mutex timing_mutex;
  double fit_seconds = 0.0;
  long fit_frames = 0;

  Shared(const Config& c, const PipelineOptions& o, const fs::path& out)
      : config(c),
        options(o),
        ctx(make_context(c)),
        db((out / "db" / "transitions.log").string(), c.pipeline.max_attempts),
        scenarios((out / "queue" / "scenarios.log").string()),
        annotate((out / "queue" / "annotate.log").string()),
        seq_dir(out / "sequences"),
        ann_dir(out / "annotations") {
    crash_budget = o.faults.crash_after_write;
  }

  std::string sequence_path(const std::string& id) const { return (seq_dir / (id + ".json")).string(); }
  std::string annotation_path(const std::string& id) const { return (ann_dir / (id + ".json")).string(); }

  ScenarioSpec scenario_for(const JobRecord& r) const {
    return generate_scenario(r.seed, ctx.catalogs, "default", r.sequence_id);
  }

  /// True if the worker should drop this message on the floor.
  bool take_crash() {
    int left = crash_budget.load();
    while (left > 0) {
      if (crash_budget.compare_exchange_weak(left, left - 1)) return true;
    }
    return false;
  }

  void finish(MessageQueue& q, const Message& m) {
    if (halt) {
      ++abandoned;
      return;
    }
    if (take_crash()) {
      ++abandoned;
      return;
    }
    try {
      q.ack(m);
    } catch (const LeaseError&) {
      // Lease ran out while working; the redelivery finds the job already advanced.
    }
  }
};

bool should_nack(Rng& rng, double p) { return p > 0.0 && uniform01(rng) < p; }

void fail_job(Shared& s, const std::string& id, JobStatus failed, const std::string& error, bool retryable) {
  const auto r = s.db.get(id);
  if (!r) return;
  if (!is_legal_transition(r->status, failed)) return;
  TransitionMeta meta{error, retryable, {}};
  s.db.try_transition(id, r->status, failed, meta);
}

void generate_and_analyse(Shared& s, const ScenarioSpec& spec) {
  const std::string& id = spec.sequence_id;
  auto rec = s.db.get(id);
  if (!rec) throw InvalidArgument("scenario for unknown job '" + id + "'");
  const std::string path = s.sequence_path(id);

  std::optional<SequenceData> seq;
  if (rec->status == JobStatus::Queued) {
    seq = synthesize_sequence(spec, s.ctx);
    if (s.config.pipeline.noise_sigma > 0.0) {
      seq = add_noise(*seq, s.config.pipeline.noise_sigma, noise_seed_for(spec));
    }
    save_sequence(path, *seq);
    s.db.try_transition(id, JobStatus::Queued, JobStatus::Generated, {{}, true, {{"sequence", path}}});
    rec = s.db.get(id);
  }
  if (rec->status == JobStatus::Generated) {
    if (!seq) seq = load_sequence(path);
    const QualityReport report = quality_gate(*seq, s.config.thresholds);
    if (report.pass) {
      s.db.try_transition(id, JobStatus::Generated, JobStatus::Analysed);
    } else {
      std::string reasons;
      for (QualityIssue q : report.reasons) {
        if (!reasons.empty()) reasons += ",";
        reasons += to_string(q);
      }
      std::error_code ec;
      fs::remove(path, ec);
      s.db.try_transition(id, JobStatus::Generated, JobStatus::AnalysisFailed,
                          {"quality: " + reasons, false, {{"sequence", ""}}});
    }
    rec = s.db.get(id);
  }
  // Duplicates are harmless: annotators skip jobs that already moved on.
  if (rec->status == JobStatus::Analysed) s.annotate.enqueue(id);
}

void generator_worker(Shared& s, int index) {
  Rng rng(derive_seed(s.options.faults.seed, 0x67656e00ULL + index));
  const auto wait = std::chrono::milliseconds(s.options.poll_ms);
  while (!s.halt) {
    auto m = s.scenarios.dequeue_wait(s.config.pipeline.lease_seconds, wait);
    if (!m) {
      if (s.done) break;
      continue;
    }
    if (should_nack(rng, s.options.faults.nack_probability)) {
      ++s.nacks;
      try {
        s.scenarios.nack(*m);
      } catch (const LeaseError&) {
      }
      continue;
    }
    ScenarioSpec spec;
    try {
      spec = scenario_from_json(m->payload);
    } catch (const std::exception&) {
      s.finish(s.scenarios, *m);  // poison message
      continue;
    }
    try {
      generate_and_analyse(s, spec);
    } catch (const std::exception& e) {
      fail_job(s, spec.sequence_id, JobStatus::AnalysisFailed, std::string("generator: ") + e.what(), true);
    } catch (...) {
      fail_job(s, spec.sequence_id, JobStatus::AnalysisFailed, "generator: unknown failure", true);
    }
    s.finish(s.scenarios, *m);
  }
}

void annotate_one(Shared& s, const std::string& id) {
  const auto rec = s.db.get(id);
  if (!rec || rec->status != JobStatus::Analysed) return;
  const std::string seq_path = s.sequence_path(id);
  const SequenceData seq = load_sequence(seq_path);
  ++s.annotation_attempts;
  Annotation ann;
  ann.sequence_id = id;
  ann.seed = seq.spec.seed;
  ann.config = s.config.fit;
  ann.result = fit_sequence(seq, s.ctx.tree, s.config.fit);
  ann.keypoints = fitted_keypoints(ann.result, s.ctx.tree);
  {
    std::lock_guard lock(s.timing_mutex);
    s.fit_seconds += ann.result.wall_time_per_frame * seq.frame_count();
    s.fit_frames += seq.frame_count();
  }
  const std::string path = s.annotation_path(id);
  save_annotation(path, ann);
  s.db.try_transition(id, JobStatus::Analysed, JobStatus::Annotated, {{}, true, {{"annotation", path}}});
}

void annotator_worker(Shared& s, int index) {
  Rng rng(derive_seed(s.options.faults.seed, 0x616e6e00ULL + index));
  const auto wait = std::chrono::milliseconds(s.options.poll_ms);
  while (!s.halt) {
    auto m = s.annotate.dequeue_wait(s.config.pipeline.lease_seconds, wait);
    if (!m) {
      if (s.done) break;
      continue;
    }
    if (should_nack(rng, s.options.faults.nack_probability)) {
      ++s.nacks;
      try {
        s.annotate.nack(*m);
      } catch (const LeaseError&) {
      }
      continue;
    }
    const std::string& id = m->payload;
    try {
      annotate_one(s, id);
    } catch (const InvalidArgument& e) {
      // Unusable targets: a retry would reproduce the same sequence.
      fail_job(s, id, JobStatus::AnnotationFailed, std::string("annotator: ") + e.what(), false);
    } catch (const std::exception& e) {
      fail_job(s, id, JobStatus::AnnotationFailed, std::string("annotator: ") + e.what(), true);
    } catch (...) {
      fail_job(s, id, JobStatus::AnnotationFailed, "annotator: unknown failure", true);
    }
    s.finish(s.annotate, *m);
  }
}

/// Re-queues work whose message was lost between a status write and an enqueue.
void reconcile(Shared& s) {
  std::set<std::string> scenario_ids;
  for (const std::string& p : s.scenarios.payloads()) {
    try {
      scenario_ids.insert(scenario_from_json(p).sequence_id);
    } catch (const std::exception&) {
    }
  }
  const auto ann = s.annotate.payloads();
  const std::set<std::string> annotate_ids(ann.begin(), ann.end());
  for (const JobRecord& r : s.db.records()) {
    const bool needs_generator = r.status == JobStatus::Queued || r.status == JobStatus::Generated;
    if (needs_generator && !scenario_ids.count(r.sequence_id)) {
      s.scenarios.enqueue(scenario_to_json(s.scenario_for(r)));
    }
    if (r.status == JobStatus::Analysed && !annotate_ids.count(r.sequence_id)) {
      s.annotate.enqueue(r.sequence_id);
    }
  }
}

}  // namespace

PipelineSummary run_pipeline(const Config& config, const PipelineOptions& options) {
  config.validate();
  const PipelineSettings& ps = config.pipeline;
  if (ps.sequences < 0) throw InvalidArgument("sequences must be >= 0");
  if (ps.generator_workers < 1 || ps.annotator_workers < 1) throw InvalidArgument("worker counts must be >= 1");
  if (!(ps.lease_seconds > 0.0)) throw InvalidArgument("lease_seconds must be positive");
  if (!(options.faults.nack_probability >= 0.0 && options.faults.nack_probability < 1.0)) {
    throw InvalidArgument("nack_probability must be in [0, 1)");
  }
  if (options.poll_ms < 1) throw InvalidArgument("poll_ms must be >= 1");

  const auto t0 = std::chrono::steady_clock::now();
  const fs::path out(config.output_dir);
  fs::create_directories(out / "sequences");
  fs::create_directories(out / "annotations");

  Shared s(config, options, out);

  std::vector<std::pair<std::string, std::uint64_t>> jobs;
  for (int i = 0; i < ps.sequences; ++i) jobs.emplace_back(job_id(i), derive_seed(config.seed, static_cast<std::uint64_t>(i)));
  s.db.create_jobs(jobs);
  reconcile(s);

  std::vector<std::thread> threads;
  for (int i = 0; i < ps.generator_workers; ++i) threads.emplace_back(generator_worker, std::ref(s), i);
  for (int i = 0; i < ps.annotator_workers; ++i) threads.emplace_back(annotator_worker, std::ref(s), i);

  const auto poll = std::chrono::milliseconds(options.poll_ms);
  const int claim_batch = 2 * ps.generator_workers;
  while (true) {
    // Keep the scenario queue short so retries interleave with fresh work.
    if (s.scenarios.size() < static_cast<std::size_t>(claim_batch)) {
      for (const std::string& id : s.db.claim_pending(claim_batch)) {
        s.scenarios.enqueue(scenario_to_json(s.scenario_for(*s.db.get(id))));
      }
    }
    if (s.db.all_terminal()) break;
    if (options.faults.halt_after_annotated >= 0) {
      const auto c = s.db.counts();
      const auto it = c.find(JobStatus::Annotated);
      if (it != c.end() && it->second >= options.faults.halt_after_annotated) {
        s.halt = true;
        break;
      }
    }
    std::this_thread::sleep_for(poll);
  }
  s.done = true;
  s.scenarios.notify_all();
  s.annotate.notify_all();
  for (std::thread& t : threads) t.join();

  PipelineSummary summary;
  summary.total = static_cast<int>(s.db.size());
  summary.counts = s.db.counts();
  summary.all_terminal = s.db.all_terminal();
  summary.halted = s.halt;
  summary.annotation_attempts = s.annotation_attempts;
  summary.nacks = s.nacks;
  summary.abandoned = s.abandoned;
  summary.fit_seconds_per_frame = s.fit_frames > 0 ? s.fit_seconds / static_cast<double>(s.fit_frames) : 0.0;

  s.db.write_snapshot((out / "db" / "snapshot.json").string());
  std::vector<ScenarioSpec> specs;
  for (const JobRecord& r : s.db.records()) specs.push_back(s.scenario_for(r));
  write_scenario_file((out / "scenarios.jsonl").string(), specs);

  summary.elapsed_seconds = seconds_since(t0);
  return summary;
}

std::string summary_to_json(const PipelineSummary& summary) {
  json counts = json::object();
  for (const auto& [status, n] : summary.counts) counts[std::string(to_string(status))] = n;
  return json{{"format", "synthbody.pipeline_summary"},
              {"version", kFormatVersion},
              {"total", summary.total},
              {"counts", counts},
              {"all_terminal", summary.all_terminal},
              {"halted", summary.halted},
              {"annotation_attempts", summary.annotation_attempts},
              {"nacks", summary.nacks},
              {"abandoned", summary.abandoned},
              {"elapsed_seconds", summary.elapsed_seconds},
              {"fit_seconds_per_frame", summary.fit_seconds_per_frame}}
      .dump(2);
}

}  // namespace synthbody
