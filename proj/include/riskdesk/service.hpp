// Session store behind the HTTP API. Each session owns a scenario, a ground
// truth, and one belief per structure; every mutation is appended to
// <data dir>/sessions/<id>/events.jsonl and replayed on restart.
//
// Routing is transport-free (`handle`) so it can be driven directly; `serve`
// puts it behind cpp-httplib.
#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include "json.hpp"

namespace riskdesk::service {

struct Response {
  int status = 200;
  nlohmann::ordered_json body;
};

using Query = std::map<std::string, std::string>;

class Session;

class SessionStore {
 public:
  /// `default_scenario` serves POST /sessions bodies that name none.
  SessionStore(std::filesystem::path data_dir,
               std::optional<std::filesystem::path> default_scenario = std::nullopt);
  ~SessionStore();

  /// Rebuilds every session found under the data directory.
  std::size_t restore();

  Response handle(const std::string& method, const std::string& path, const Query& query,
                  const std::string& body);

  std::size_t size() const;

 private:
  std::shared_ptr<Session> find(const std::string& id) const;

  std::filesystem::path data_dir_;
  std::optional<std::filesystem::path> default_scenario_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t counter_ = 0;
};

/// Data root from RISKDESK_DATA_DIR, else ./riskdesk-data.
std::filesystem::path default_data_dir();

/// Blocks serving HTTP; returns nonzero when the port cannot be bound.
int serve(int port, const std::optional<std::filesystem::path>& scenario,
          const std::filesystem::path& data_dir, const std::string& host = "127.0.0.1");

}  // namespace riskdesk::service
