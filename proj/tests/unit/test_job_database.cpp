#include <doctest.h>

#include <fstream>
#include <set>
#include <thread>

#include "synthbody/job_database.hpp"
#include "test_support.hpp"

using namespace synthbody;

namespace {

std::vector<std::pair<std::string, std::uint64_t>> make_jobs(int n) {
  std::vector<std::pair<std::string, std::uint64_t>> jobs;
  for (int i = 0; i < n; ++i) jobs.emplace_back("job_" + std::to_string(1000 + i), 7 * i + 1);
  return jobs;
}

}  // namespace

TEST_CASE("status names round trip") {
  for (auto s : {JobStatus::Pending, JobStatus::Queued, JobStatus::Generated, JobStatus::Analysed,
                 JobStatus::AnalysisFailed, JobStatus::Annotated, JobStatus::AnnotationFailed}) {
    CHECK(job_status_from_string(to_string(s)) == s);
  }
  CHECK(to_string(JobStatus::AnalysisFailed) == "ANALYSIS_FAILED");
  CHECK_THROWS_AS(job_status_from_string("DONE"), InvalidArgument);
}

TEST_CASE("legal edges") {
  CHECK(is_legal_transition(JobStatus::Pending, JobStatus::Queued));
  CHECK(is_legal_transition(JobStatus::Queued, JobStatus::Generated));
  CHECK(is_legal_transition(JobStatus::Generated, JobStatus::Analysed));
  CHECK(is_legal_transition(JobStatus::Generated, JobStatus::AnalysisFailed));
  CHECK(is_legal_transition(JobStatus::Analysed, JobStatus::Annotated));
  CHECK(is_legal_transition(JobStatus::Analysed, JobStatus::AnnotationFailed));
  CHECK(is_legal_transition(JobStatus::AnalysisFailed, JobStatus::Queued));
  CHECK(is_legal_transition(JobStatus::AnnotationFailed, JobStatus::Queued));
  CHECK_FALSE(is_legal_transition(JobStatus::Pending, JobStatus::Annotated));
  CHECK_FALSE(is_legal_transition(JobStatus::Annotated, JobStatus::Queued));
  CHECK_FALSE(is_legal_transition(JobStatus::Generated, JobStatus::Annotated));
}

TEST_CASE("empty database claims nothing") {
  JobDatabase db;
  CHECK(db.claim_pending(10).empty());
  CHECK(db.all_terminal());
}

TEST_CASE("claim returns pending and retryable failures") {
  JobDatabase db("", 3);
  db.create_jobs(make_jobs(4));
  const auto first = db.claim_pending(1);
  REQUIRE(first.size() == 1);
  db.update_status(first[0], JobStatus::AnalysisFailed, {"boom", true, {}});
  const auto rec = db.get(first[0]);
  CHECK(rec->attempts == 1);
  const auto all = db.claim_pending(10);
  CHECK(all.size() == 4);
  for (const auto& id : all) CHECK(db.get(id)->status == JobStatus::Queued);
  CHECK(db.get(first[0])->attempts == 2);
}

TEST_CASE("non-retryable and exhausted failures are terminal") {
  JobDatabase db("", 2);
  db.create_jobs(make_jobs(2));
  auto ids = db.claim_pending(2);
  db.update_status(ids[0], JobStatus::AnalysisFailed, {"quality", false, {}});
  db.update_status(ids[1], JobStatus::AnalysisFailed, {"crash", true, {}});
  CHECK(db.is_terminal(*db.get(ids[0])));
  CHECK_FALSE(db.is_terminal(*db.get(ids[1])));
  CHECK(db.claim_pending(5) == std::vector<std::string>{ids[1]});
  db.update_status(ids[1], JobStatus::AnalysisFailed, {"crash", true, {}});
  CHECK(db.get(ids[1])->attempts == 2);
  CHECK(db.is_terminal(*db.get(ids[1])));
  CHECK(db.claim_pending(5).empty());
  CHECK(db.all_terminal());
}

TEST_CASE("illegal transition leaves the state unchanged") {
  JobDatabase db;
  db.create_jobs(make_jobs(1));
  const std::string id = "job_1000";
  CHECK_THROWS_AS(db.update_status(id, JobStatus::Annotated), IllegalTransition);
  CHECK(db.get(id)->status == JobStatus::Pending);
  CHECK(db.get(id)->history.size() == 1);
  CHECK_THROWS_AS(db.update_status("nope", JobStatus::Queued), InvalidArgument);
}

TEST_CASE("generated to analysed is accepted") {
  JobDatabase db;
  db.create_jobs(make_jobs(1));
  const std::string id = "job_1000";
  db.claim_pending(1);
  db.update_status(id, JobStatus::Generated, {{}, true, {{"sequence", "a.json"}}});
  CHECK_NOTHROW(db.update_status(id, JobStatus::Analysed));
  CHECK(db.get(id)->artifacts.at("sequence") == "a.json");
  db.update_status(id, JobStatus::Annotated);
  CHECK(db.is_terminal(*db.get(id)));
}

TEST_CASE("compare-and-set transitions") {
  JobDatabase db;
  db.create_jobs(make_jobs(1));
  const std::string id = "job_1000";
  db.claim_pending(1);
  CHECK_FALSE(db.try_transition(id, JobStatus::Generated, JobStatus::Analysed));
  CHECK(db.try_transition(id, JobStatus::Queued, JobStatus::Generated));
  CHECK_FALSE(db.try_transition(id, JobStatus::Queued, JobStatus::Generated));
  CHECK_THROWS_AS(db.try_transition(id, JobStatus::Generated, JobStatus::Annotated), IllegalTransition);
}

TEST_CASE("timestamps never go backwards") {
  JobDatabase db;
  db.create_jobs(make_jobs(1));
  const std::string id = "job_1000";
  db.claim_pending(1);
  db.update_status(id, JobStatus::Generated);
  db.update_status(id, JobStatus::Analysed);
  const auto h = db.get(id)->history;
  REQUIRE(h.size() == 4);
  for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i].time_ns >= h[i - 1].time_ns);
}

TEST_CASE("concurrent claimants get disjoint sets") {
  for (int round = 0; round < 20; ++round) {
    JobDatabase db;
    db.create_jobs(make_jobs(100));
    std::vector<std::string> a, b;
    auto claimant = [&db](std::vector<std::string>& out) {
      for (;;) {
        auto got = db.claim_pending(3);
        if (got.empty()) break;
        out.insert(out.end(), got.begin(), got.end());
      }
    };
    std::thread ta(claimant, std::ref(a));
    std::thread tb(claimant, std::ref(b));
    ta.join();
    tb.join();
    std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    CHECK(sa.size() == a.size());
    CHECK(sb.size() == b.size());
    for (const auto& id : sa) CHECK(sb.count(id) == 0);
    CHECK(sa.size() + sb.size() == 100);
  }
}

TEST_CASE("log replay restores the state") {
  testsupport::TempDir dir("jobdb");
  const std::string log = dir.file("transitions.log");
  {
    JobDatabase db(log);
    db.create_jobs(make_jobs(3));
    db.claim_pending(2);
    db.update_status("job_1000", JobStatus::Generated, {{}, true, {{"sequence", "s.json"}}});
    db.update_status("job_1001", JobStatus::AnalysisFailed, {"bad", false, {}});
  }
  JobDatabase db(log);
  REQUIRE(db.size() == 3);
  CHECK(db.get("job_1000")->status == JobStatus::Generated);
  CHECK(db.get("job_1000")->artifacts.at("sequence") == "s.json");
  CHECK(db.get("job_1001")->status == JobStatus::AnalysisFailed);
  CHECK_FALSE(db.get("job_1001")->retryable);
  CHECK(db.get("job_1001")->last_error == "bad");
  CHECK(db.get("job_1002")->status == JobStatus::Pending);
  // creating again is a no-op
  db.create_jobs(make_jobs(3));
  CHECK(db.size() == 3);

  const LogValidation v = validate_transition_log(log);
  CHECK(v.ok);
  CHECK(v.final_status.at("job_1000") == JobStatus::Generated);
}

TEST_CASE("torn final line is skipped on replay") {
  testsupport::TempDir dir("jobdb_torn");
  const std::string log = dir.file("transitions.log");
  {
    JobDatabase db(log);
    db.create_jobs(make_jobs(2));
    db.claim_pending(1);
  }
  {
    std::ofstream out(log, std::ios::app);
    out << "{\"seq\": 99, \"event\": \"transi";
  }
  JobDatabase db(log);
  CHECK(db.get("job_1000")->status == JobStatus::Queued);
  CHECK(db.get("job_1001")->status == JobStatus::Pending);
}

TEST_CASE("validator catches bad logs") {
  testsupport::TempDir dir("jobdb_bad");
  const std::string log = dir.file("bad.log");
  {
    std::ofstream out(log);
    out << R"({"seq":0,"event":"create","id":"a","seed":1,"time_ns":10})" << "\n";
    out << R"({"seq":1,"event":"transition","id":"a","from":"PENDING","to":"ANNOTATED","time_ns":11})" << "\n";
    out << R"({"seq":2,"event":"transition","id":"b","from":"PENDING","to":"QUEUED","time_ns":12})" << "\n";
    out << R"({"seq":3,"event":"create","id":"a","seed":1,"time_ns":13})" << "\n";
  }
  const LogValidation v = validate_transition_log(log);
  CHECK_FALSE(v.ok);
  CHECK(v.errors.size() == 3);
  CHECK_FALSE(validate_transition_log(dir.file("missing.log")).ok);
}

TEST_CASE("snapshot is written") {
  testsupport::TempDir dir("jobdb_snap");
  JobDatabase db;
  db.create_jobs(make_jobs(2));
  db.write_snapshot(dir.file("snap.json"));
  CHECK(std::filesystem::file_size(dir.file("snap.json")) > 0);
}
