#include "oddstop/session_store.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace oddstop {

using nlohmann::json;
namespace fs = std::filesystem;

EventLog::EventLog(fs::path file) : path_(std::move(file)) {
  file_.reset(std::fopen(path_.c_str(), "a"));
  if (!file_) throw std::runtime_error("cannot open event log " + path_.string());
}

void EventLog::append(const Event& event) {
  const std::string line = to_json(event).dump() + "\n";
  if (std::fwrite(line.data(), 1, line.size(), file_.get()) != line.size() ||
      std::fflush(file_.get()) != 0 || ::fsync(::fileno(file_.get())) != 0) {
    throw std::runtime_error("failed to append to event log " + path_.string());
  }
}

namespace {

std::vector<Event> parse_lines(const fs::path& file, std::size_t* complete_bytes) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read event log " + file.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  std::vector<Event> events;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t end = text.find('\n', start);
    if (end == std::string::npos) break;  // torn tail
    const std::string line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    try {
      events.push_back(event_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw std::runtime_error("corrupt event log " + file.string() + ": " + e.what());
    }
  }
  if (complete_bytes) *complete_bytes = start;
  return events;
}

}  // namespace

std::vector<Event> EventLog::read(const fs::path& file) { return parse_lines(file, nullptr); }

std::vector<Event> EventLog::recover(const fs::path& file) {
  std::size_t complete = 0;
  auto events = parse_lines(file, &complete);
  if (complete < fs::file_size(file)) fs::resize_file(file, complete);
  return events;
}

std::shared_ptr<const json> SessionStore::Entry::current() const {
  std::lock_guard lock(snapshot_mutex);
  return snapshot;
}

void SessionStore::Entry::publish() {
  auto next = std::make_shared<const json>(session->snapshot());
  std::lock_guard lock(snapshot_mutex);
  snapshot = std::move(next);
}

SessionStore::SessionStore(std::optional<fs::path> data_dir, Clock clock)
    : data_dir_(std::move(data_dir)), clock_(std::move(clock)), id_state_(std::random_device{}()) {
  id_state_ = id_state_ << 32 ^ std::random_device{}();
  if (!clock_) {
    clock_ = [] {
      using namespace std::chrono;
      return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
    };
  }
  if (!data_dir_) return;
  fs::create_directories(*data_dir_);
  std::vector<fs::path> files;
  for (const auto& item : fs::directory_iterator(*data_dir_)) {
    if (item.is_regular_file() && item.path().extension() == ".jsonl") files.push_back(item.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    auto events = EventLog::recover(file);
    if (events.empty()) continue;
    auto entry = std::make_shared<Entry>();
    entry->session.emplace(Session::replay(events));
    entry->log = std::make_unique<EventLog>(file);
    entry->publish();
    sessions_.emplace(entry->session->id(), std::move(entry));
  }
}

std::string SessionStore::fresh_id() {
  std::lock_guard lock(id_mutex_);
  std::mt19937_64 engine(id_state_++);
  std::ostringstream out;
  out << std::hex << engine();
  std::string id = out.str();
  id.insert(0, 16 - std::min<std::size_t>(16, id.size()), '0');
  return id;
}

std::unique_ptr<EventLog> SessionStore::open_log(const std::string& id) const {
  if (!data_dir_) return nullptr;
  return std::make_unique<EventLog>(*data_dir_ / (id + ".jsonl"));
}

std::shared_ptr<SessionStore::Entry> SessionStore::find(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("no session with id " + id);
  return it->second;
}

// Durable append first, then the in-memory swap: a crash between the two
// leaves a log that replays to the post-event state.
void SessionStore::commit(Entry& entry, Session next, const Event& event) {
  if (entry.log) entry.log->append(event);
  entry.session.emplace(std::move(next));
  entry.publish();
}

json SessionStore::create(const json& config) {
  std::string id;
  {
    std::shared_lock lock(mutex_);
    do {
      id = fresh_id();
    } while (sessions_.count(id) != 0);
  }
  const Event created = Session::creation_event(id, config, clock_());
  auto entry = std::make_shared<Entry>();
  entry->log = open_log(id);
  commit(*entry, Session::from_created(created), created);
  auto snapshot = entry->current();
  std::unique_lock lock(mutex_);
  sessions_.emplace(id, std::move(entry));
  return *snapshot;
}

json SessionStore::record_outcome(const std::string& id, const json& body,
                                  const std::optional<std::string>& idempotency_key) {
  auto entry = find(id);
  std::lock_guard lock(entry->write);
  if (idempotency_key) {
    if (auto previous = entry->session->recommendation_for_key(*idempotency_key)) {
      return {{"recommendation", to_json(*previous)}, {"replayed", true}};
    }
  }
  const Event event = entry->session->outcome_event(body, idempotency_key, clock_());
  Session next = *entry->session;
  next.apply(event);
  commit(*entry, std::move(next), event);
  return {{"recommendation", to_json(entry->session->recommendation())},
          {"seq", event.seq},
          {"replayed", false}};
}

json SessionStore::consent(const std::string& id, const json& body) {
  auto entry = find(id);
  std::lock_guard lock(entry->write);
  const Event event = entry->session->consent_event(body, clock_());
  Session next = *entry->session;
  next.apply(event);
  commit(*entry, std::move(next), event);
  return {{"recommendation", to_json(entry->session->recommendation())}, {"seq", event.seq}};
}

json SessionStore::get(const std::string& id) const { return *find(id)->current(); }

json SessionStore::list() const {
  std::vector<std::shared_ptr<Entry>> entries;
  {
    std::shared_lock lock(mutex_);
    for (const auto& [_, entry] : sessions_) entries.push_back(entry);
  }
  json out = json::array();
  for (const auto& entry : entries) {
    const auto snap = entry->current();
    out.push_back({{"id", snap->at("id")},
                   {"protocol", snap->at("protocol")},
                   {"status", snap->at("status")},
                   {"treated", snap->at("treated")}});
  }
  return out;
}

std::size_t SessionStore::size() const {
  std::shared_lock lock(mutex_);
  return sessions_.size();
}

}  // namespace oddstop
