#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "synthbody/error.hpp"

namespace synthbody {

enum class JobStatus { Pending, Queued, Generated, Analysed, AnalysisFailed, Annotated, AnnotationFailed };

std::string_view to_string(JobStatus s);
JobStatus job_status_from_string(std::string_view s);

/// Legal edges:
///   PENDING -> QUEUED -> GENERATED -> ANALYSED -> ANNOTATED
///   QUEUED | GENERATED -> ANALYSIS_FAILED,  ANALYSED -> ANNOTATION_FAILED
///   ANALYSIS_FAILED | ANNOTATION_FAILED -> QUEUED   (re-claim)
bool is_legal_transition(JobStatus from, JobStatus to);

class IllegalTransition : public Error {
 public:
  using Error::Error;
};

struct TransitionStamp {
  JobStatus status;
  std::int64_t time_ns;
};

struct JobRecord {
  std::string sequence_id;
  std::uint64_t seed = 0;
  JobStatus status = JobStatus::Pending;
  int attempts = 0;
  /// False for deterministic rejections that a retry would reproduce.
  bool retryable = true;
  std::string last_error;
  std::vector<TransitionStamp> history;
  std::map<std::string, std::string> artifacts;
};

/// Optional payload of a status update.
struct TransitionMeta {
  std::string error;
  bool retryable = true;
  std::map<std::string, std::string> artifacts;
};

/// Status store for every sequence. Thread-safe. With a path, every change is
/// appended to a transition log (one JSON object per line) and the state is
/// rebuilt from that log when the database is reopened.
///
/// Log records:
///   {"seq":n,"event":"create","id":...,"seed":...,"time_ns":...}
///   {"seq":n,"event":"transition","id":...,"from":...,"to":...,"attempt":k,
///    "retryable":b,"error":...,"artifacts":{...},"time_ns":...}
class JobDatabase {
 public:
  explicit JobDatabase(std::string log_path = {}, int max_attempts = 3);

  JobDatabase(const JobDatabase&) = delete;
  JobDatabase& operator=(const JobDatabase&) = delete;

  /// Adds jobs in PENDING; existing ids are left untouched.
  void create_jobs(const std::vector<std::pair<std::string, std::uint64_t>>& jobs);

  /// Atomically moves up to n claimable jobs (PENDING, or failed, retryable and
  /// under the attempt limit) to QUEUED, in creation order.
  std::vector<std::string> claim_pending(int n);

  /// Applies a legal transition from the current state. Throws IllegalTransition
  /// (state unchanged) otherwise, or InvalidArgument for unknown ids.
  void update_status(const std::string& id, JobStatus to, const TransitionMeta& meta = {});

  /// Compare-and-set: applies the transition only if the job is currently in `from`.
  bool try_transition(const std::string& id, JobStatus from, JobStatus to, const TransitionMeta& meta = {});

  std::optional<JobRecord> get(const std::string& id) const;
  std::vector<JobRecord> records() const;
  std::map<JobStatus, int> counts() const;
  std::size_t size() const;

  /// Annotated, or failed with no retry left.
  bool is_terminal(const JobRecord& r) const;
  bool all_terminal() const;

  int max_attempts() const { return max_attempts_; }

  /// Writes the current records as a JSON document.
  void write_snapshot(const std::string& path) const;

 private:
  void apply_transition(JobRecord& r, JobStatus to, const TransitionMeta& meta, std::int64_t time_ns);
  void append(const std::string& line);
  void replay();
  std::int64_t stamp(const JobRecord& r) const;

  std::string log_path_;
  int max_attempts_;
  mutable std::mutex mutex_;
  std::vector<std::string> order_;
  std::map<std::string, JobRecord> jobs_;
  std::ofstream log_;
  std::uint64_t next_seq_ = 0;
};

/// Result of replaying a transition log from scratch.
struct LogValidation {
  bool ok = true;
  std::vector<std::string> errors;
  std::map<std::string, JobStatus> final_status;
  std::map<std::string, int> annotated_transitions;
};

/// Checks that every job starts in PENDING, moves only along legal edges with
/// nondecreasing timestamps, and is annotated at most once.
LogValidation validate_transition_log(const std::string& path);

}  // namespace synthbody
