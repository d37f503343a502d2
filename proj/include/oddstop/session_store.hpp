#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oddstop/session.hpp"

namespace oddstop {

/// Append-only JSON-lines file, one {seq, ts, kind, payload} object per line.
/// Every append is flushed and fsync'ed before it returns.
class EventLog {
 public:
  explicit EventLog(std::filesystem::path file);

  void append(const Event& event);
  const std::filesystem::path& path() const noexcept { return path_; }

  /// All complete events. A torn final line (no trailing newline) is dropped;
  /// any other malformed line is an error.
  static std::vector<Event> read(const std::filesystem::path& file);

  /// read(), then truncate a torn final line so later appends start clean.
  static std::vector<Event> recover(const std::filesystem::path& file);

 private:
  struct Closer {
    void operator()(std::FILE* f) const noexcept { std::fclose(f); }
  };
  std::filesystem::path path_;
  std::unique_ptr<std::FILE, Closer> file_;
};

/// Sessions by id. Writes to one session are serialized; reads return an
/// immutable snapshot and never wait on a writer of the same session.
class SessionStore {
 public:
  using Clock = std::function<std::int64_t()>;

  explicit SessionStore(std::optional<std::filesystem::path> data_dir = std::nullopt,
                        Clock clock = {});

  nlohmann::json create(const nlohmann::json& config);
  /// Returns {"recommendation", "seq", "replayed"}; a repeated idempotency key
  /// returns the original recommendation without appending.
  nlohmann::json record_outcome(const std::string& id, const nlohmann::json& body,
                                const std::optional<std::string>& idempotency_key);
  nlohmann::json consent(const std::string& id, const nlohmann::json& body);
  nlohmann::json get(const std::string& id) const;
  nlohmann::json list() const;
  std::size_t size() const;

 private:
  struct Entry {
    std::mutex write;
    std::optional<Session> session;
    std::unique_ptr<EventLog> log;
    mutable std::mutex snapshot_mutex;
    std::shared_ptr<const nlohmann::json> snapshot;

    std::shared_ptr<const nlohmann::json> current() const;
    void publish();
  };

  std::shared_ptr<Entry> find(const std::string& id) const;
  std::unique_ptr<EventLog> open_log(const std::string& id) const;
  void commit(Entry& entry, Session next, const Event& event);
  std::string fresh_id();

  std::optional<std::filesystem::path> data_dir_;
  Clock clock_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::mutex id_mutex_;
  std::uint64_t id_state_;
};

}  // namespace oddstop
