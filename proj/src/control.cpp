#include "dblog/control.hpp"

#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <thread>

#include "dblog/types.hpp"

namespace dblog {

namespace {

void write_atomic(const std::filesystem::path& path, const std::string& body) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << body;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

ControlServer::ControlServer(const std::filesystem::path& dir) : dir_(dir) {
  std::filesystem::create_directories(dir_);
}

std::vector<ControlRequest> ControlServer::poll() {
  std::vector<ControlRequest> requests;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (!entry.is_regular_file()) continue;
    std::string name = entry.path().filename().string();
    if (name.starts_with("req-") && name.ends_with(".json")) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    std::ifstream in(path);
    nlohmann::ordered_json j =
        nlohmann::ordered_json::parse(in, nullptr, false);
    std::string name = path.filename().string();
    std::string id = name.substr(4, name.size() - 4 - 5);  // strip req- .json
    std::filesystem::remove(path);
    if (j.is_discarded()) continue;
    requests.push_back(ControlRequest{id, std::move(j)});
  }
  return requests;
}

void ControlServer::respond(const std::string& id,
                            const nlohmann::ordered_json& response) {
  write_atomic(dir_ / ("rsp-" + id + ".json"), response.dump());
}

ControlClient::ControlClient(std::filesystem::path dir) : dir_(std::move(dir)) {}

nlohmann::ordered_json ControlClient::call(
    const nlohmann::ordered_json& request, std::chrono::milliseconds timeout) {
  if (!std::filesystem::is_directory(dir_)) {
    throw ConfigError("no live run: control directory '" + dir_.string() +
                      "' does not exist");
  }
  std::string id = std::to_string(::getpid()) + "-" + std::to_string(counter_++);
  write_atomic(dir_ / ("req-" + id + ".json"), request.dump());

  auto rsp_path = dir_ / ("rsp-" + id + ".json");
  auto deadline = std::chrono::steady_clock::now() + timeout;
  while (std::chrono::steady_clock::now() < deadline) {
    if (std::filesystem::exists(rsp_path)) {
      std::ifstream in(rsp_path);
      nlohmann::ordered_json j =
          nlohmann::ordered_json::parse(in, nullptr, false);
      std::filesystem::remove(rsp_path);
      if (!j.is_discarded()) return j;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  std::filesystem::remove(dir_ / ("req-" + id + ".json"));
  throw ConfigError("no live run: control request timed out");
}

}  // namespace dblog
