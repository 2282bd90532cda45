#include "ripple/external_client.hpp"

#include <algorithm>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <exception>
#include <fcntl.h>
#include <mutex>
#include <poll.h>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

#include "ripple/error.hpp"

namespace ripple {

namespace {

void ignore_sigpipe_once() {
  static std::once_flag flag;
  std::call_once(flag, [] { std::signal(SIGPIPE, SIG_IGN); });
}

std::string errno_text() { return std::strerror(errno); }

}  // namespace

PropagatorClient::PropagatorClient(const std::string& command) {
  ignore_sigpipe_once();
  int in_pipe[2];
  int out_pipe[2];
  if (pipe2(in_pipe, O_CLOEXEC) != 0) throw Error(ErrorCode::IoError, "pipe: " + errno_text());
  if (pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw Error(ErrorCode::IoError, "pipe: " + errno_text());
  }
  pid_ = fork();
  if (pid_ < 0) throw Error(ErrorCode::IoError, "fork: " + errno_text());
  if (pid_ == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

PropagatorClient::~PropagatorClient() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    if (waitpid(pid_, &status, WNOHANG) == 0) {
      ::kill(pid_, SIGTERM);
      waitpid(pid_, &status, 0);
    }
  }
}

void PropagatorClient::send_line(const std::string& line) {
  std::string payload = line;
  payload += '\n';
  std::size_t written = 0;
  while (written < payload.size()) {
    const ssize_t n = ::write(to_child_, payload.data() + written, payload.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::ClientDead, "write to propagator failed: " + errno_text());
    }
    written += static_cast<std::size_t>(n);
  }
}

PredictionOutcome PropagatorClient::exchange(const std::string& request_id,
                                             const std::string& request_line,
                                             std::chrono::milliseconds timeout) {
  if (eof_) throw Error(ErrorCode::ClientDead, "propagator process has exited");
  send_line(request_line);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      auto outcome = parse_prediction(line);
      if (auto* p = std::get_if<PredictionSet>(&outcome)) {
        if (p->event_id != request_id) continue;  // stale reply to a timed-out request
      }
      return outcome;
    }
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) return Refusal{RefusalReason::Timeout, "no response within timeout"};
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::IoError, "poll: " + errno_text());
    }
    if (ready == 0) continue;
    char chunk[4096];
    const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::IoError, "read: " + errno_text());
    }
    if (n == 0) {
      eof_ = true;
      return Refusal{RefusalReason::Died, "propagator closed its output"};
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

PredictionOutcome run_external(PropagatorClient& client, const Event& e, const ContextView& context,
                               std::chrono::milliseconds timeout) {
  auto outcome = client.exchange(e.id, build_request(e, context), timeout);
  if (auto* p = std::get_if<PredictionSet>(&outcome)) p->event_id = e.id;
  return outcome;
}

std::vector<std::pair<std::string, PredictionOutcome>> run_external_batch(
    std::vector<std::unique_ptr<PropagatorClient>>& clients, const std::vector<Event>& events,
    const std::function<ContextView(const Event&)>& context_for, std::chrono::milliseconds timeout) {
  if (clients.empty()) throw Error(ErrorCode::BadConfig, "no propagator clients");
  std::vector<std::pair<std::string, PredictionOutcome>> results(events.size());
  std::vector<std::exception_ptr> failures(clients.size());
  auto worker = [&](std::size_t w) {
    try {
      for (std::size_t i = w; i < events.size(); i += clients.size()) {
        results[i] = {events[i].id, run_external(*clients[w], events[i], context_for(events[i]), timeout)};
      }
    } catch (...) {
      failures[w] = std::current_exception();
    }
  };
  if (clients.size() == 1) {
    worker(0);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < clients.size(); ++w) threads.emplace_back(worker, w);
    for (auto& t : threads) t.join();
  }
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  std::sort(results.begin(), results.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return results;
}

}  // namespace ripple
