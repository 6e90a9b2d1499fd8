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

#ifndef SAVANNA_LOG_HPP_
#define SAVANNA_LOG_HPP_

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace savanna {

enum class LogLevel { kDebug, kInfo, kWarning, kError };

using LogSink = std::function<void(LogLevel, std::string_view)>;

/// Replaces the process-wide sink and returns the previous one. The default
/// sink writes warnings and errors to stderr.
LogSink set_log_sink(LogSink sink);

void log(LogLevel level, std::string_view message);
inline void log_warning(std::string_view message) {
  log(LogLevel::kWarning, message);
}
inline void log_info(std::string_view message) {
  log(LogLevel::kInfo, message);
}

/// Collects warnings for the lifetime of the object; restores the previous
/// sink on destruction. Used by tests and by reports that echo warnings.
class ScopedLogCapture {
 public:
  ScopedLogCapture();
  ~ScopedLogCapture();
  ScopedLogCapture(ScopedLogCapture const&) = delete;
  ScopedLogCapture& operator=(ScopedLogCapture const&) = delete;

  std::vector<std::string> const& warnings() const { return warnings_; }

 private:
  LogSink previous_;
  std::vector<std::string> warnings_;
};

}  // namespace savanna

#endif  // SAVANNA_LOG_HPP_
