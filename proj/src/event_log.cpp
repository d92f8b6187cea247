#include "cloudburst/event_log.hpp"

#include <ostream>

namespace cloudburst {

void EventLog::write_header(const nlohmann::ordered_json& scenario) {
  nlohmann::ordered_json header;
  header["schema"] = kEventLogSchema;
  header["version"] = kEventLogVersion;
  header["scenario"] = scenario;
  emit(header.dump());
}

std::uint64_t EventLog::append(SimTime at, EventKind kind, nlohmann::ordered_json fields) {
  const std::uint64_t seq = count_++;
  nlohmann::ordered_json line;
  line["at"] = at;
  line["seq"] = seq;
  line["kind"] = to_string(kind);
  for (auto& [key, value] : fields.items()) line[key] = std::move(value);
  emit(line.dump());
  return seq;
}

void EventLog::write_trailer(SimTime clock) {
  nlohmann::ordered_json trailer;
  trailer["end"] = true;
  trailer["events"] = count_;
  trailer["clock"] = clock;
  emit(trailer.dump());
}

void EventLog::emit(const std::string& line) {
  for (unsigned char c : line) {
    digest_ ^= c;
    digest_ *= 0x100000001b3ULL;
  }
  digest_ ^= '\n';
  digest_ *= 0x100000001b3ULL;
  if (sink_) *sink_ << line << '\n';
}

}  // namespace cloudburst
