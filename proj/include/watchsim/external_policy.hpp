#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "watchsim/types.hpp"

namespace watchsim {

// One request over the line protocol: the raw recent history plus the
// summarized session state an external predictor needs.
struct ExternalRequest {
  std::vector<InteractionRecord> viewing_history;  // most recent last, <= 5 kept
  std::vector<double> history_consumption;         // C per history record
  InteractionRecord current_video;
  double addiction_stock = 0.0;
};

// {"viewing_history":[...],"current_video":{...},"addiction_stock":<real>}
std::string build_request_line(const ExternalRequest& request);

// One JSON object per line, newline-terminated, over an arbitrary byte stream.
class LineTransport {
 public:
  virtual ~LineTransport() = default;
  // Sends the request line and returns the next reply line, or nullopt on
  // deadline expiry.
  virtual std::optional<std::string> exchange(
      const std::string& request_line, std::chrono::milliseconds deadline) = 0;
};

// Talks to a child process over stdin/stdout pipes.
class ProcessLineTransport : public LineTransport {
 public:
  explicit ProcessLineTransport(const std::string& command);
  ~ProcessLineTransport() override;

  ProcessLineTransport(const ProcessLineTransport&) = delete;
  ProcessLineTransport& operator=(const ProcessLineTransport&) = delete;

  std::optional<std::string> exchange(const std::string& request_line,
                                      std::chrono::milliseconds deadline) override;

 private:
  int child_pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  std::string buffer_;
};

// Sends the request and validates the {"consumption_reward": <real>} reply.
// Throws ProtocolError on timeout, malformed replies, and values outside
// [0, c_max]; never substitutes a silent default.
double external_policy_call(LineTransport& transport,
                            const ExternalRequest& request, double c_max,
                            std::chrono::milliseconds deadline);

}  // namespace watchsim
