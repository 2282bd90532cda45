#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <sys/types.h>
#include <utility>
#include <vector>

#include "ripple/propagator.hpp"

namespace ripple {

/// A child process speaking the line-delimited propagator protocol on its
/// stdin/stdout. Requests are serialized; the child is killed and reaped on
/// destruction.
class PropagatorClient {
 public:
  /// Runs `command` through /bin/sh -c.
  explicit PropagatorClient(const std::string& command);
  ~PropagatorClient();

  PropagatorClient(const PropagatorClient&) = delete;
  PropagatorClient& operator=(const PropagatorClient&) = delete;

  pid_t pid() const noexcept { return pid_; }

  /// Writes `request_line` and waits for the response whose id is
  /// `request_id`; responses carrying another id are stale and dropped.
  /// Timeout and EOF come back as refusals; a broken pipe throws ClientDead.
  PredictionOutcome exchange(const std::string& request_id, const std::string& request_line,
                             std::chrono::milliseconds timeout);

 private:
  void send_line(const std::string& line);

  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  bool eof_ = false;
  std::string buffer_;
};

inline constexpr std::chrono::milliseconds kDefaultRequestTimeout{30000};

PredictionOutcome run_external(PropagatorClient& client, const Event& e, const ContextView& context,
                               std::chrono::milliseconds timeout = kDefaultRequestTimeout);

/// Serves `events` with a pool of clients, one worker thread per client.
/// Results are returned in ascending event-id order. ClientDead from any
/// worker aborts the batch and is rethrown.
std::vector<std::pair<std::string, PredictionOutcome>> run_external_batch(
    std::vector<std::unique_ptr<PropagatorClient>>& clients, const std::vector<Event>& events,
    const std::function<ContextView(const Event&)>& context_for,
    std::chrono::milliseconds timeout = kDefaultRequestTimeout);

}  // namespace ripple
