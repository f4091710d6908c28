#include "synthbody/job_database.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <sstream>

#include "json.hpp"
#include "synthbody/serialization.hpp"

namespace synthbody {

using nlohmann::json;

namespace {

std::int64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

bool is_failed(JobStatus s) { return s == JobStatus::AnalysisFailed || s == JobStatus::AnnotationFailed; }

std::vector<std::string> read_log_lines(const std::string& path) {
  std::vector<std::string> lines;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

std::string_view to_string(JobStatus s) {
  switch (s) {
    case JobStatus::Pending: return "PENDING";
    case JobStatus::Queued: return "QUEUED";
    case JobStatus::Generated: return "GENERATED";
    case JobStatus::Analysed: return "ANALYSED";
    case JobStatus::AnalysisFailed: return "ANALYSIS_FAILED";
    case JobStatus::Annotated: return "ANNOTATED";
    case JobStatus::AnnotationFailed: return "ANNOTATION_FAILED";
  }
  return "PENDING";
}

JobStatus job_status_from_string(std::string_view s) {
  for (JobStatus st : {JobStatus::Pending, JobStatus::Queued, JobStatus::Generated, JobStatus::Analysed,
                       JobStatus::AnalysisFailed, JobStatus::Annotated, JobStatus::AnnotationFailed}) {
    if (to_string(st) == s) return st;
  }
  throw InvalidArgument("unknown job status '" + std::string(s) + "'");
}

bool is_legal_transition(JobStatus from, JobStatus to) {
  using S = JobStatus;
  switch (from) {
    case S::Pending: return to == S::Queued;
    case S::Queued: return to == S::Generated || to == S::AnalysisFailed;
    case S::Generated: return to == S::Analysed || to == S::AnalysisFailed;
    case S::Analysed: return to == S::Annotated || to == S::AnnotationFailed;
    case S::AnalysisFailed:
    case S::AnnotationFailed: return to == S::Queued;
    case S::Annotated: return false;
  }
  return false;
}

JobDatabase::JobDatabase(std::string log_path, int max_attempts)
    : log_path_(std::move(log_path)), max_attempts_(max_attempts) {
  if (max_attempts_ < 1) throw InvalidArgument("max_attempts must be >= 1");
  if (log_path_.empty()) return;
  const std::filesystem::path p(log_path_);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  if (std::filesystem::exists(p)) replay();
  log_.open(log_path_, std::ios::app);
  if (!log_) throw IoError("cannot open transition log '" + log_path_ + "'");
}

void JobDatabase::replay() {
  for (const std::string& line : read_log_lines(log_path_)) {
    json e;
    try {
      e = json::parse(line);
    } catch (const json::exception&) {
      continue;  // torn final write
    }
    next_seq_ = std::max<std::uint64_t>(next_seq_, e.value("seq", std::uint64_t{0}) + 1);
    const std::string id = e.at("id").get<std::string>();
    if (e.at("event") == "create") {
      if (jobs_.count(id)) continue;
      JobRecord r;
      r.sequence_id = id;
      r.seed = e.at("seed").get<std::uint64_t>();
      r.history.push_back({JobStatus::Pending, e.at("time_ns").get<std::int64_t>()});
      order_.push_back(id);
      jobs_.emplace(id, std::move(r));
    } else {
      auto it = jobs_.find(id);
      if (it == jobs_.end()) continue;
      TransitionMeta meta;
      meta.error = e.value("error", "");
      meta.retryable = e.value("retryable", true);
      meta.artifacts = e.value("artifacts", std::map<std::string, std::string>{});
      JobRecord& r = it->second;
      const JobStatus to = job_status_from_string(e.at("to").get<std::string>());
      if (!is_legal_transition(r.status, to)) continue;
      apply_transition(r, to, meta, e.at("time_ns").get<std::int64_t>());
    }
  }
}

void JobDatabase::append(const std::string& line) {
  if (!log_.is_open()) return;
  log_ << line << '\n';
  log_.flush();
}

std::int64_t JobDatabase::stamp(const JobRecord& r) const {
  const std::int64_t last = r.history.empty() ? 0 : r.history.back().time_ns;
  return std::max(now_ns(), last);
}

void JobDatabase::create_jobs(const std::vector<std::pair<std::string, std::uint64_t>>& jobs) {
  std::lock_guard lock(mutex_);
  for (const auto& [id, seed] : jobs) {
    if (jobs_.count(id)) continue;
    JobRecord r;
    r.sequence_id = id;
    r.seed = seed;
    const std::int64_t t = now_ns();
    r.history.push_back({JobStatus::Pending, t});
    append(json{{"seq", next_seq_++}, {"event", "create"}, {"id", id}, {"seed", seed}, {"time_ns", t}}.dump());
    order_.push_back(id);
    jobs_.emplace(id, std::move(r));
  }
}

void JobDatabase::apply_transition(JobRecord& r, JobStatus to, const TransitionMeta& meta, std::int64_t time_ns) {
  if (to == JobStatus::Queued) {
    ++r.attempts;
    r.retryable = true;
    r.last_error.clear();
  }
  if (is_failed(to)) {
    r.retryable = meta.retryable;
    r.last_error = meta.error;
  }
  for (const auto& [k, v] : meta.artifacts) {
    if (v.empty()) {
      r.artifacts.erase(k);
    } else {
      r.artifacts[k] = v;
    }
  }
  r.status = to;
  r.history.push_back({to, time_ns});
}

std::vector<std::string> JobDatabase::claim_pending(int n) {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const std::string& id : order_) {
    if (static_cast<int>(out.size()) >= n) break;
    JobRecord& r = jobs_.at(id);
    const bool claimable =
        r.status == JobStatus::Pending || (is_failed(r.status) && r.retryable && r.attempts < max_attempts_);
    if (!claimable) continue;
    const JobStatus from = r.status;
    const std::int64_t t = stamp(r);
    apply_transition(r, JobStatus::Queued, {}, t);
    append(json{{"seq", next_seq_++}, {"event", "transition"}, {"id", id}, {"from", to_string(from)},
                {"to", "QUEUED"}, {"attempt", r.attempts}, {"retryable", true}, {"error", ""},
                {"artifacts", json::object()}, {"time_ns", t}}
               .dump());
    out.push_back(id);
  }
  return out;
}

bool JobDatabase::try_transition(const std::string& id, JobStatus from, JobStatus to, const TransitionMeta& meta) {
  std::lock_guard lock(mutex_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) throw InvalidArgument("unknown job '" + id + "'");
  JobRecord& r = it->second;
  if (r.status != from) return false;
  if (!is_legal_transition(from, to)) {
    throw IllegalTransition("illegal transition " + std::string(to_string(from)) + " -> " +
                            std::string(to_string(to)) + " for " + id);
  }
  const std::int64_t t = stamp(r);
  apply_transition(r, to, meta, t);
  append(json{{"seq", next_seq_++}, {"event", "transition"}, {"id", id}, {"from", to_string(from)},
              {"to", to_string(to)}, {"attempt", r.attempts}, {"retryable", meta.retryable},
              {"error", meta.error}, {"artifacts", meta.artifacts}, {"time_ns", t}}
             .dump());
  return true;
}

void JobDatabase::update_status(const std::string& id, JobStatus to, const TransitionMeta& meta) {
  JobStatus from;
  {
    std::lock_guard lock(mutex_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) throw InvalidArgument("unknown job '" + id + "'");
    from = it->second.status;
  }
  if (!is_legal_transition(from, to)) {
    throw IllegalTransition("illegal transition " + std::string(to_string(from)) + " -> " +
                            std::string(to_string(to)) + " for " + id);
  }
  if (!try_transition(id, from, to, meta)) {
    throw IllegalTransition("job " + id + " changed state concurrently");
  }
}

std::optional<JobRecord> JobDatabase::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

std::vector<JobRecord> JobDatabase::records() const {
  std::lock_guard lock(mutex_);
  std::vector<JobRecord> out;
  out.reserve(order_.size());
  for (const std::string& id : order_) out.push_back(jobs_.at(id));
  return out;
}

std::map<JobStatus, int> JobDatabase::counts() const {
  std::lock_guard lock(mutex_);
  std::map<JobStatus, int> out;
  for (const auto& [id, r] : jobs_) ++out[r.status];
  return out;
}

std::size_t JobDatabase::size() const {
  std::lock_guard lock(mutex_);
  return jobs_.size();
}

bool JobDatabase::is_terminal(const JobRecord& r) const {
  if (r.status == JobStatus::Annotated) return true;
  return is_failed(r.status) && (!r.retryable || r.attempts >= max_attempts_);
}

bool JobDatabase::all_terminal() const {
  std::lock_guard lock(mutex_);
  return std::all_of(jobs_.begin(), jobs_.end(), [this](const auto& kv) { return is_terminal(kv.second); });
}

void JobDatabase::write_snapshot(const std::string& path) const {
  json jobs = json::array();
  for (const JobRecord& r : records()) {
    json history = json::array();
    for (const TransitionStamp& s : r.history) history.push_back({{"status", to_string(s.status)}, {"time_ns", s.time_ns}});
    jobs.push_back({{"id", r.sequence_id},
                    {"seed", r.seed},
                    {"status", to_string(r.status)},
                    {"attempts", r.attempts},
                    {"retryable", r.retryable},
                    {"last_error", r.last_error},
                    {"artifacts", r.artifacts},
                    {"history", history}});
  }
  write_text_file(path, json{{"format", "synthbody.job_snapshot"}, {"version", kFormatVersion}, {"jobs", jobs}}.dump(1) + "\n");
}

LogValidation validate_transition_log(const std::string& path) {
  LogValidation v;
  if (!std::filesystem::exists(path)) {
    v.ok = false;
    v.errors.push_back("log '" + path + "' does not exist");
    return v;
  }
  std::map<std::string, std::int64_t> last_time;
  std::int64_t line_no = 0;
  for (const std::string& line : read_log_lines(path)) {
    ++line_no;
    json e;
    try {
      e = json::parse(line);
    } catch (const json::exception&) {
      v.ok = false;
      v.errors.push_back("line " + std::to_string(line_no) + ": unparsable");
      continue;
    }
    const std::string id = e.value("id", "");
    const std::int64_t t = e.value("time_ns", std::int64_t{0});
    if (e.value("event", "") == "create") {
      if (v.final_status.count(id)) {
        v.ok = false;
        v.errors.push_back("line " + std::to_string(line_no) + ": duplicate create for " + id);
        continue;
      }
      v.final_status[id] = JobStatus::Pending;
      last_time[id] = t;
      continue;
    }
    auto it = v.final_status.find(id);
    if (it == v.final_status.end()) {
      v.ok = false;
      v.errors.push_back("line " + std::to_string(line_no) + ": transition for unknown job " + id);
      continue;
    }
    JobStatus from, to;
    try {
      from = job_status_from_string(e.at("from").get<std::string>());
      to = job_status_from_string(e.at("to").get<std::string>());
    } catch (const std::exception& ex) {
      v.ok = false;
      v.errors.push_back("line " + std::to_string(line_no) + ": " + ex.what());
      continue;
    }
    if (from != it->second) {
      v.ok = false;
      v.errors.push_back("line " + std::to_string(line_no) + ": " + id + " recorded from " +
                         std::string(to_string(from)) + " but was " + std::string(to_string(it->second)));
    }
    if (!is_legal_transition(it->second, to)) {
      v.ok = false;
      v.errors.push_back("line " + std::to_string(line_no) + ": illegal edge " +
                         std::string(to_string(it->second)) + " -> " + std::string(to_string(to)) + " for " + id);
    }
    if (t < last_time[id]) {
      v.ok = false;
      v.errors.push_back("line " + std::to_string(line_no) + ": timestamp went backwards for " + id);
    }
    last_time[id] = t;
    if (to == JobStatus::Annotated && ++v.annotated_transitions[id] > 1) {
      v.ok = false;
      v.errors.push_back("line " + std::to_string(line_no) + ": " + id + " annotated twice");
    }
    it->second = to;
  }
  return v;
}

}  // namespace synthbody
