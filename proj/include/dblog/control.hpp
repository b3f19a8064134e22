#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace dblog {

// Local control channel over a directory: requests and responses are JSON
// files moved into place atomically, so a live run and the control CLI can
// talk without a network port.
struct ControlRequest {
  std::string id;
  nlohmann::ordered_json payload;
};

class ControlServer {
 public:
  explicit ControlServer(const std::filesystem::path& dir);

  std::vector<ControlRequest> poll();
  void respond(const std::string& id, const nlohmann::ordered_json& response);

 private:
  std::filesystem::path dir_;
};

class ControlClient {
 public:
  explicit ControlClient(std::filesystem::path dir);

  // Throws ConfigError when the directory is missing or nothing answers
  // within the timeout (no live run).
  nlohmann::ordered_json call(const nlohmann::ordered_json& request,
                              std::chrono::milliseconds timeout);

 private:
  std::filesystem::path dir_;
  int counter_ = 0;
};

}  // namespace dblog
