#pragma once

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace sentinel {

class Deadline {
 public:
  using Clock = std::chrono::steady_clock;

  Deadline() = default;
  static Deadline after(double seconds) {
    Deadline d;
    if (seconds > 0) {
      d.limited_ = true;
      d.at_ = Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(seconds));
    }
    return d;
  }
  static Deadline none() { return {}; }

  bool expired() const { return limited_ && Clock::now() >= at_; }
  bool limited() const { return limited_; }

  // the earlier of two deadlines
  Deadline min(const Deadline& o) const {
    if (!limited_) return o;
    if (!o.limited_) return *this;
    return at_ <= o.at_ ? *this : o;
  }

 private:
  bool limited_ = false;
  Clock::time_point at_{};
};

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Verbosity from CHASE_SENTINEL_LOG: 0/error (default), 1/info, 2/debug, 3/trace.
enum class LogLevel { Error = 0, Info = 1, Debug = 2, Trace = 3 };

inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* v = std::getenv("CHASE_SENTINEL_LOG");
    if (!v) return LogLevel::Error;
    std::string s(v);
    if (s == "1" || s == "info") return LogLevel::Info;
    if (s == "2" || s == "debug") return LogLevel::Debug;
    if (s == "3" || s == "trace") return LogLevel::Trace;
    return LogLevel::Error;
  }();
  return level;
}

inline bool log_enabled(LogLevel l) { return static_cast<int>(l) <= static_cast<int>(log_level()); }

inline void log(LogLevel l, const std::string& msg) {
  if (!log_enabled(l)) return;
  static std::mutex m;
  std::lock_guard lock(m);
  static const char* names[] = {"error", "info", "debug", "trace"};
  std::cerr << "[" << names[static_cast<int>(l)] << "] " << msg << "\n";
}

}  // namespace sentinel
