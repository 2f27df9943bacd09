#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hnir/engine.hpp"
#include "hnir/error.hpp"

namespace hnir {

nlohmann::json to_json(const MatchScore& score);
nlohmann::json to_json(const IdentifyResult& result);
nlohmann::json to_json(const EnrollmentRecord& record);

/// HTTP status for an engine error: 404, 410, 500 or 400.
int http_status(Errc code) noexcept;

/// Standard or URL-safe alphabet, optional padding and "data:...;base64," prefix.
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// JSON/HTTP front end over an Engine. Uploaded enrollment images are kept
/// under `image_dir` and referenced by path from their records.
class Service {
 public:
  Service(Engine& engine, std::filesystem::path image_dir);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the listening socket; port 0 picks a free port. Returns the bound
  /// port, or -1 on failure.
  int bind(const std::string& host, int port);
  /// Serves on the bound socket until stop().
  bool listen_after_bind();
  bool listen(const std::string& host, int port);
  void stop();
  bool is_running() const;
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hnir
