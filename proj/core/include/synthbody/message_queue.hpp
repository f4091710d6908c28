#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "synthbody/error.hpp"

namespace synthbody {

/// A leased delivery. The token identifies this particular lease.
struct Message {
  std::uint64_t seq = 0;
  std::string payload;
  int delivery_count = 0;
  std::uint64_t lease_token = 0;
};

class LeaseError : public Error {
 public:
  using Error::Error;
};

/// FIFO queue with at-least-once delivery. A dequeued message stays invisible
/// for the lease duration; ack removes it, nack or lease expiry makes it
/// visible again. Visible messages are handed out in enqueue order.
///
/// With a path, enqueues and acks are appended to a log and unacknowledged
/// messages survive a restart:
///   {"op":"enqueue","seq":n,"payload":"..."}   {"op":"ack","seq":n}
class MessageQueue {
 public:
  using Clock = std::function<double()>;  // seconds, monotone

  explicit MessageQueue(std::string log_path = {}, Clock clock = {});

  MessageQueue(const MessageQueue&) = delete;
  MessageQueue& operator=(const MessageQueue&) = delete;

  std::uint64_t enqueue(const std::string& payload);

  std::optional<Message> dequeue(double lease_seconds);
  /// Blocks up to max_wait for a visible message.
  std::optional<Message> dequeue_wait(double lease_seconds, std::chrono::milliseconds max_wait);

  /// Throws LeaseError if the lease is unknown, superseded or expired.
  void ack(const Message& m);
  /// Returns the message to the queue immediately. Throws LeaseError like ack.
  void nack(const Message& m);

  /// Messages not yet acknowledged, leased or not.
  std::size_t size() const;
  std::vector<std::string> payloads() const;
  /// Wakes blocked consumers.
  void notify_all();

 private:
  struct Entry {
    std::string payload;
    int delivery_count = 0;
    std::uint64_t lease_token = 0;  // 0: not leased
    double lease_deadline = 0.0;
  };

  std::optional<Message> take_locked(double lease_seconds);
  Entry& check_lease_locked(const Message& m);
  void append(const std::string& line);
  double now() const;

  std::string log_path_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::map<std::uint64_t, Entry> entries_;
  std::uint64_t next_seq_ = 1;
  std::uint64_t next_token_ = 1;
  std::ofstream log_;
};

}  // namespace synthbody
