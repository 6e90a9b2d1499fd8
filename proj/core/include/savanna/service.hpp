// Copyright 2026 The Savanna Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SAVANNA_SERVICE_HPP_
#define SAVANNA_SERVICE_HPP_

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

#include "savanna/active_learning.hpp"
#include "savanna/dataset.hpp"
#include "savanna/error.hpp"

namespace savanna {

struct ServiceConfig {
  /// Each subdirectory holding images/ is a dataset named after it.
  std::filesystem::path data_root;
  PipelineConfig pipeline;
  SessionConfig session;
  /// Side of the square chips served to the screener, in working pixels.
  int chip_size = 100;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// HTTP status used for an error code.
int http_status(ErrorCode code);

/// {"code", "message", "detail"}.
std::string error_body(ErrorCode code, std::string_view message, std::string_view detail = {});

/// The JSON-over-HTTP API. Routing lives in handle(), which is usable
/// without a socket; serve() only adapts it to httplib. Sessions are
/// persisted under <dataset>/sessions/<id>/ and restored on construction.
///
///   GET  /datasets
///   POST /datasets/{id}/pipeline     {"stages": [...]}
///   POST /sessions                   {"dataset_id", "idempotency_key"?}
///   GET  /sessions/{id}
///   GET  /sessions/{id}/query
///   POST /sessions/{id}/feedback     {"verdicts": [...], "idempotency_key"}
///   POST /sessions/{id}/finalize
///   GET  /sessions/{id}/metrics
///   GET  /sessions/{id}/audit
///   GET  /chips/{proposal_id}
class Service {
 public:
  explicit Service(ServiceConfig cfg);
  ~Service();
  Service(Service const&) = delete;
  Service& operator=(Service const&) = delete;

  HttpResponse handle(std::string_view method, std::string_view path, std::string_view body = {});

  /// Binds host:port (0 picks a free port) and returns the bound port.
  /// Throws kIoError when the address is unavailable.
  int bind(std::string const& host, int port);
  /// Blocks serving requests until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace savanna

#endif  // SAVANNA_SERVICE_HPP_
