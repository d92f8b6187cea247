#pragma once

// Append-only JSON-lines event log. Line 1 is a schema-versioned header that
// embeds the scenario; the last line of a complete log is a trailer holding
// the record count. Output is byte-deterministic for a given input sequence.

#include <cstdint>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "cloudburst/simkernel.hpp"

namespace cloudburst {

inline constexpr const char* kEventLogSchema = "cloudburst.eventlog";
inline constexpr int kEventLogVersion = 1;

class EventLog {
 public:
  // `sink` may be null, in which case only counts and the digest are kept.
  explicit EventLog(std::ostream* sink = nullptr) : sink_(sink) {}

  void write_header(const nlohmann::ordered_json& scenario);
  // Returns the record's sequence number.
  std::uint64_t append(SimTime at, EventKind kind, nlohmann::ordered_json fields = nlohmann::ordered_json::object());
  void write_trailer(SimTime clock);

  std::uint64_t count() const { return count_; }
  // FNV-1a over every byte written, header and trailer included.
  std::uint64_t digest() const { return digest_; }

 private:
  void emit(const std::string& line);

  std::ostream* sink_;
  std::uint64_t count_{0};
  std::uint64_t digest_{0xcbf29ce484222325ULL};
};

}  // namespace cloudburst
