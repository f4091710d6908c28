#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "synthbody/config.hpp"
#include "synthbody/job_database.hpp"

namespace synthbody {

/// Test hooks for exercising the at-least-once paths.
struct FaultInjection {
  /// Probability that a worker nacks a message instead of processing it.
  double nack_probability = 0.0;
  std::uint64_t seed = 0;
  /// Number of messages that workers process fully and then abandon without ack,
  /// as if the worker died between the write and the ack.
  int crash_after_write = 0;
  /// Stop the whole run abruptly once this many jobs are annotated (-1: never).
  /// In-flight messages are abandoned; a later run on the same output
  /// directory resumes from the persisted logs.
  int halt_after_annotated = -1;
};

struct PipelineOptions {
  FaultInjection faults;
  /// Poll period of the coordinator and the workers' blocking dequeue.
  int poll_ms = 5;
};

struct PipelineSummary {
  int total = 0;
  std::map<JobStatus, int> counts;
  bool all_terminal = false;
  bool halted = false;
  int annotation_attempts = 0;  // fit_sequence invocations in this run
  int nacks = 0;
  int abandoned = 0;  // messages dropped by injected crashes
  double elapsed_seconds = 0.0;
  double fit_seconds_per_frame = 0.0;  // mean over this run's annotations
};

/// Output layout under config.output_dir:
///   db/transitions.log   job state transitions (see JobDatabase)
///   db/snapshot.json     final job records
///   queue/scenarios.log  queue/annotate.log
///   scenarios.jsonl      one scenario per job, in job order
///   sequences/<id>.json  annotations/<id>.json
///
/// Re-running on an existing output directory resumes: jobs and unacknowledged
/// messages are reloaded, and work lost between a status write and an ack is
/// re-queued.
PipelineSummary run_pipeline(const Config& config, const PipelineOptions& options = {});

std::string job_id(int index);
/// Seed of the keypoint noise added to a generated sequence.
std::uint64_t noise_seed_for(const ScenarioSpec& spec);
/// The scenario of job `index` under a master seed, as the pipeline generates it.
ScenarioSpec scenario_for_job(std::uint64_t master_seed, int index, const Catalogs& catalogs);
std::string summary_to_json(const PipelineSummary& summary);

}  // namespace synthbody
