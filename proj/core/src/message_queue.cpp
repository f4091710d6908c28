#include "synthbody/message_queue.hpp"

#include <filesystem>

#include "json.hpp"

namespace synthbody {

using nlohmann::json;

MessageQueue::MessageQueue(std::string log_path, Clock clock)
    : log_path_(std::move(log_path)), clock_(std::move(clock)) {
  if (log_path_.empty()) return;
  const std::filesystem::path p(log_path_);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  if (std::filesystem::exists(p)) {
    std::ifstream in(log_path_);
    std::string line;
    while (std::getline(in, line)) {
      json e;
      try {
        e = json::parse(line);
      } catch (const json::exception&) {
        continue;  // torn final write
      }
      const auto seq = e.at("seq").get<std::uint64_t>();
      if (e.at("op") == "enqueue") {
        entries_[seq].payload = e.at("payload").get<std::string>();
        next_seq_ = std::max(next_seq_, seq + 1);
      } else {
        entries_.erase(seq);
      }
    }
  }
  log_.open(log_path_, std::ios::app);
  if (!log_) throw IoError("cannot open queue log '" + log_path_ + "'");
}

double MessageQueue::now() const {
  if (clock_) return clock_();
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

void MessageQueue::append(const std::string& line) {
  if (!log_.is_open()) return;
  log_ << line << '\n';
  log_.flush();
}

std::uint64_t MessageQueue::enqueue(const std::string& payload) {
  std::uint64_t seq;
  {
    std::lock_guard lock(mutex_);
    seq = next_seq_++;
    entries_[seq].payload = payload;
    append(json{{"op", "enqueue"}, {"seq", seq}, {"payload", payload}}.dump());
  }
  cv_.notify_one();
  return seq;
}

std::optional<Message> MessageQueue::take_locked(double lease_seconds) {
  const double t = now();
  for (auto& [seq, e] : entries_) {
    if (e.lease_token != 0 && t < e.lease_deadline) continue;
    e.lease_token = next_token_++;
    e.lease_deadline = t + lease_seconds;
    ++e.delivery_count;
    return Message{seq, e.payload, e.delivery_count, e.lease_token};
  }
  return std::nullopt;
}

std::optional<Message> MessageQueue::dequeue(double lease_seconds) {
  if (!(lease_seconds > 0.0)) throw InvalidArgument("lease must be positive");
  std::lock_guard lock(mutex_);
  return take_locked(lease_seconds);
}

std::optional<Message> MessageQueue::dequeue_wait(double lease_seconds, std::chrono::milliseconds max_wait) {
  if (!(lease_seconds > 0.0)) throw InvalidArgument("lease must be positive");
  std::unique_lock lock(mutex_);
  if (auto m = take_locked(lease_seconds)) return m;
  cv_.wait_for(lock, max_wait);
  return take_locked(lease_seconds);
}

MessageQueue::Entry& MessageQueue::check_lease_locked(const Message& m) {
  auto it = entries_.find(m.seq);
  if (it == entries_.end() || it->second.lease_token != m.lease_token || m.lease_token == 0) {
    throw LeaseError("unknown lease for message " + std::to_string(m.seq));
  }
  if (now() >= it->second.lease_deadline) {
    throw LeaseError("lease expired for message " + std::to_string(m.seq));
  }
  return it->second;
}

void MessageQueue::ack(const Message& m) {
  std::lock_guard lock(mutex_);
  check_lease_locked(m);
  entries_.erase(m.seq);
  append(json{{"op", "ack"}, {"seq", m.seq}}.dump());
}

void MessageQueue::nack(const Message& m) {
  {
    std::lock_guard lock(mutex_);
    Entry& e = check_lease_locked(m);
    e.lease_token = 0;
    e.lease_deadline = 0.0;
  }
  cv_.notify_one();
}

std::size_t MessageQueue::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::vector<std::string> MessageQueue::payloads() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [seq, e] : entries_) out.push_back(e.payload);
  return out;
}

void MessageQueue::notify_all() { cv_.notify_all(); }

}  // namespace synthbody
