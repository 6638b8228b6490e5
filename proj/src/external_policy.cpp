#include "watchsim/external_policy.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstring>

#include <nlohmann/json.hpp>

#include "watchsim/errors.hpp"

namespace watchsim {

using nlohmann::json;

std::string build_request_line(const ExternalRequest& request) {
  json history = json::array();
  const std::size_t n = request.viewing_history.size();
  const std::size_t start = n > 5 ? n - 5 : 0;
  for (std::size_t i = start; i < n; ++i) {
    const auto& rec = request.viewing_history[i];
    json item;
    item["video_id"] = rec.item_id;
    item["completion_rate"] = rec.completion_rate();
    item["categories"] = rec.categories;
    item["duration"] = rec.video_length;
    item["watch_time"] = rec.watch_time;
    if (i < request.history_consumption.size()) {
      item["consumption_reward"] = request.history_consumption[i];
    }
    history.push_back(std::move(item));
  }
  json current;
  current["video_id"] = request.current_video.item_id;
  current["categories"] = request.current_video.categories;
  current["duration"] = request.current_video.video_length;

  json obj;
  obj["viewing_history"] = std::move(history);
  obj["current_video"] = std::move(current);
  obj["addiction_stock"] = request.addiction_stock;
  return obj.dump();
}

ProcessLineTransport::ProcessLineTransport(const std::string& command) {
  int to_child[2];
  int from_child[2];
  if (pipe(to_child) != 0 || pipe(from_child) != 0) {
    throw ProtocolError(ProtocolError::Kind::transport, "pipe() failed");
  }
  child_pid_ = fork();
  if (child_pid_ < 0) {
    throw ProtocolError(ProtocolError::Kind::transport, "fork() failed");
  }
  if (child_pid_ == 0) {
    dup2(to_child[0], STDIN_FILENO);
    dup2(from_child[1], STDOUT_FILENO);
    close(to_child[0]);
    close(to_child[1]);
    close(from_child[0]);
    close(from_child[1]);
    execlp("/bin/sh", "sh", "-c", command.c_str(), nullptr);
    _exit(127);
  }
  close(to_child[0]);
  close(from_child[1]);
  write_fd_ = to_child[1];
  read_fd_ = from_child[0];
}

ProcessLineTransport::~ProcessLineTransport() {
  if (write_fd_ >= 0) close(write_fd_);
  if (read_fd_ >= 0) close(read_fd_);
  if (child_pid_ > 0) {
    kill(child_pid_, SIGKILL);
    waitpid(child_pid_, nullptr, 0);
  }
}

std::optional<std::string> ProcessLineTransport::exchange(
    const std::string& request_line, std::chrono::milliseconds deadline) {
  std::string payload = request_line;
  payload += '\n';
  std::size_t written = 0;
  while (written < payload.size()) {
    ssize_t n = write(write_fd_, payload.data() + written,
                      payload.size() - written);
    if (n < 0) {
      throw ProtocolError(ProtocolError::Kind::transport,
                          "peer closed the request pipe");
    }
    written += static_cast<std::size_t>(n);
  }

  const auto give_up = std::chrono::steady_clock::now() + deadline;
  while (true) {
    auto pos = buffer_.find('\n');
    if (pos != std::string::npos) {
      std::string line = buffer_.substr(0, pos);
      buffer_.erase(0, pos + 1);
      return line;
    }
    auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        give_up - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) return std::nullopt;

    pollfd pfd{read_fd_, POLLIN, 0};
    int ready = poll(&pfd, 1, static_cast<int>(remaining.count()));
    if (ready < 0) {
      throw ProtocolError(ProtocolError::Kind::transport, "poll() failed");
    }
    if (ready == 0) return std::nullopt;
    char chunk[4096];
    ssize_t n = read(read_fd_, chunk, sizeof(chunk));
    if (n <= 0) {
      throw ProtocolError(ProtocolError::Kind::transport,
                          "peer closed the reply pipe");
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

double external_policy_call(LineTransport& transport,
                            const ExternalRequest& request, double c_max,
                            std::chrono::milliseconds deadline) {
  const std::string line = build_request_line(request);
  auto reply = transport.exchange(line, deadline);
  if (!reply) {
    throw ProtocolError(ProtocolError::Kind::timeout,
                        "external policy timed out after " +
                            std::to_string(deadline.count()) + " ms");
  }
  json obj = json::parse(*reply, nullptr, false);
  if (obj.is_discarded() || !obj.is_object()) {
    throw ProtocolError(ProtocolError::Kind::malformed,
                        "reply is not a JSON object: " + *reply);
  }
  if (!obj.contains("consumption_reward")) {
    throw ProtocolError(ProtocolError::Kind::malformed,
                        "reply is missing consumption_reward");
  }
  const auto& value = obj["consumption_reward"];
  if (!value.is_number()) {
    throw ProtocolError(ProtocolError::Kind::malformed,
                        "consumption_reward is not a number: " + value.dump());
  }
  const double c = value.get<double>();
  if (!std::isfinite(c)) {
    throw ProtocolError(ProtocolError::Kind::malformed,
                        "consumption_reward is not finite");
  }
  if (c < 0.0 || c > c_max) {
    throw ProtocolError(ProtocolError::Kind::out_of_range,
                        "consumption_reward " + std::to_string(c) +
                            " outside [0, " + std::to_string(c_max) + "]");
  }
  return c;
}

}  // namespace watchsim
