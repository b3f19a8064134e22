#include "dblog/coordination.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace dblog {

namespace {

using ojson = nlohmann::ordered_json;

std::string lease_to_string(const LeaseRecord& l) {
  ojson j;
  j["instance_id"] = l.instance_id;
  j["expiry"] = l.expiry;
  j["epoch"] = l.epoch;
  return j.dump();
}

std::optional<LeaseRecord> lease_from_string(const std::string& s) {
  ojson j = ojson::parse(s, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  LeaseRecord l;
  l.instance_id = j.value("instance_id", std::string{});
  l.expiry = j.value("expiry", std::uint64_t{0});
  l.epoch = j.value("epoch", std::uint64_t{0});
  return l;
}

const char* kind_name(LeaseJournalEntry::Kind k) {
  switch (k) {
    case LeaseJournalEntry::Kind::granted:
      return "granted";
    case LeaseJournalEntry::Kind::renewed:
      return "renewed";
    case LeaseJournalEntry::Kind::released:
      return "released";
    case LeaseJournalEntry::Kind::rejected:
      return "rejected";
  }
  return "?";
}

LeaseJournalEntry::Kind kind_from_name(const std::string& s) {
  if (s == "granted") return LeaseJournalEntry::Kind::granted;
  if (s == "renewed") return LeaseJournalEntry::Kind::renewed;
  if (s == "released") return LeaseJournalEntry::Kind::released;
  return LeaseJournalEntry::Kind::rejected;
}

}  // namespace

// ---------------------------------------------------------------------------
// InProcessCoordination

void InProcessCoordination::put_state(const std::string& path,
                                      const std::string& value,
                                      std::uint64_t epoch) {
  std::lock_guard lock(mu_);
  if (unavailable_) throw StateStoreError("state store unavailable");
  if (epoch < last_epoch_) {
    throw FencingError("stale epoch " + std::to_string(epoch) +
                       " rejected (current " + std::to_string(last_epoch_) + ")");
  }
  entries_[path] = value;
}

std::optional<std::string> InProcessCoordination::get_state(
    const std::string& path, ReadMode) {
  std::lock_guard lock(mu_);
  auto it = entries_.find(path);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> InProcessCoordination::list_state(
    const std::string& prefix) {
  std::lock_guard lock(mu_);
  std::vector<std::string> keys;
  for (const auto& [k, v] : entries_) {
    if (k.starts_with(prefix)) keys.push_back(k);
  }
  return keys;
}

Role InProcessCoordination::acquire_leadership(const std::string& instance_id,
                                               std::uint64_t lease_duration,
                                               std::uint64_t now) {
  std::lock_guard lock(mu_);
  if (unavailable_) return Role{false, 0};
  if (lease_ && lease_->expiry > now) {
    journal_.push_back({LeaseJournalEntry::Kind::rejected, instance_id,
                        lease_->epoch, now, lease_->expiry});
    return Role{false, 0};
  }
  LeaseRecord l{instance_id, now + lease_duration, last_epoch_ + 1};
  lease_ = l;
  last_epoch_ = l.epoch;
  journal_.push_back(
      {LeaseJournalEntry::Kind::granted, instance_id, l.epoch, now, l.expiry});
  return Role{true, l.epoch};
}

void InProcessCoordination::renew_leadership(const std::string& instance_id,
                                             std::uint64_t epoch,
                                             std::uint64_t lease_duration,
                                             std::uint64_t now) {
  std::lock_guard lock(mu_);
  if (unavailable_) throw StateStoreError("state store unavailable");
  if (!lease_ || lease_->instance_id != instance_id || lease_->epoch != epoch) {
    throw LeaseError("lease superseded; instance must demote");
  }
  if (lease_->expiry <= now) {
    throw LeaseError("lease expired; instance must demote");
  }
  lease_->expiry = now + lease_duration;
  journal_.push_back({LeaseJournalEntry::Kind::renewed, instance_id, epoch, now,
                      lease_->expiry});
}

void InProcessCoordination::release_leadership(const std::string& instance_id,
                                               std::uint64_t epoch,
                                               std::uint64_t now) {
  std::lock_guard lock(mu_);
  if (lease_ && lease_->instance_id == instance_id && lease_->epoch == epoch) {
    journal_.push_back(
        {LeaseJournalEntry::Kind::released, instance_id, epoch, now, now});
    lease_.reset();
  }
}

std::optional<LeaseRecord> InProcessCoordination::current_lease() {
  std::lock_guard lock(mu_);
  return lease_;
}

std::vector<LeaseJournalEntry> InProcessCoordination::lease_journal() {
  std::lock_guard lock(mu_);
  return journal_;
}

void InProcessCoordination::set_unavailable(bool value) {
  std::lock_guard lock(mu_);
  unavailable_ = value;
}

// ---------------------------------------------------------------------------
// FileCoordination

class FileCoordination::ScopedLock {
 public:
  explicit ScopedLock(int fd) : fd_(fd) {
    if (flock(fd_, LOCK_EX) != 0) {
      throw StateStoreError("cannot lock coordination directory");
    }
  }
  ~ScopedLock() { flock(fd_, LOCK_UN); }
  ScopedLock(const ScopedLock&) = delete;
  ScopedLock& operator=(const ScopedLock&) = delete;

 private:
  int fd_;
};

namespace {

void atomic_write(const std::filesystem::path& path, const std::string& value) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << value;
    if (!out) throw StateStoreError("write failed for " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

std::optional<std::string> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void validate_key(const std::string& path) {
  if (path.empty()) throw StateStoreError("empty state path");
  std::istringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '/')) {
    if (part.empty() || part == "." || part == "..") {
      throw StateStoreError("invalid state path '" + path + "'");
    }
  }
}

}  // namespace

FileCoordination::FileCoordination(std::filesystem::path root)
    : root_(std::move(root)) {
  std::filesystem::create_directories(root_ / "kv");
  lock_fd_ = ::open((root_ / ".lock").c_str(), O_CREAT | O_RDWR, 0644);
  if (lock_fd_ < 0) {
    throw StateStoreError("cannot open lock file under " + root_.string());
  }
}

std::filesystem::path FileCoordination::key_path(const std::string& path) const {
  return root_ / "kv" / path;
}

std::optional<LeaseRecord> FileCoordination::read_lease_locked() const {
  auto raw = read_file(root_ / "lease");
  if (!raw || raw->empty()) return std::nullopt;
  return lease_from_string(*raw);
}

void FileCoordination::write_lease_locked(const std::optional<LeaseRecord>& lease) {
  atomic_write(root_ / "lease", lease ? lease_to_string(*lease) : std::string{});
}

std::uint64_t FileCoordination::read_last_epoch_locked() const {
  auto raw = read_file(root_ / "last_epoch");
  if (!raw || raw->empty()) return 0;
  return std::stoull(*raw);
}

void FileCoordination::write_last_epoch_locked(std::uint64_t epoch) {
  atomic_write(root_ / "last_epoch", std::to_string(epoch));
}

void FileCoordination::journal_locked(const LeaseJournalEntry& e) {
  std::ofstream out(root_ / "lease.journal", std::ios::app);
  ojson j;
  j["kind"] = kind_name(e.kind);
  j["instance_id"] = e.instance_id;
  j["epoch"] = e.epoch;
  j["at"] = e.at;
  j["expiry"] = e.expiry;
  out << j.dump() << '\n';
}

void FileCoordination::put_state(const std::string& path,
                                 const std::string& value,
                                 std::uint64_t epoch) {
  validate_key(path);
  ScopedLock lock(lock_fd_);
  if (epoch < read_last_epoch_locked()) {
    throw FencingError("stale epoch " + std::to_string(epoch) + " rejected");
  }
  auto full = key_path(path);
  std::filesystem::create_directories(full.parent_path());
  atomic_write(full, value);
  std::lock_guard cache_lock(cache_mu_);
  read_cache_[path] = value;
}

std::optional<std::string> FileCoordination::get_state(const std::string& path,
                                                       ReadMode mode) {
  validate_key(path);
  if (mode == ReadMode::plain) {
    std::lock_guard cache_lock(cache_mu_);
    auto it = read_cache_.find(path);
    if (it != read_cache_.end()) return it->second;
  }
  ScopedLock lock(lock_fd_);
  auto raw = read_file(key_path(path));
  if (raw) {
    std::lock_guard cache_lock(cache_mu_);
    read_cache_[path] = *raw;
  }
  return raw;
}

std::vector<std::string> FileCoordination::list_state(const std::string& prefix) {
  ScopedLock lock(lock_fd_);
  std::vector<std::string> keys;
  auto base = root_ / "kv";
  if (!std::filesystem::exists(base)) return keys;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(base)) {
    if (!entry.is_regular_file()) continue;
    std::string rel = std::filesystem::relative(entry.path(), base).string();
    if (rel.starts_with(prefix)) keys.push_back(rel);
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

Role FileCoordination::acquire_leadership(const std::string& instance_id,
                                          std::uint64_t lease_duration,
                                          std::uint64_t now) {
  ScopedLock lock(lock_fd_);
  auto lease = read_lease_locked();
  if (lease && lease->expiry > now) {
    journal_locked({LeaseJournalEntry::Kind::rejected, instance_id,
                    lease->epoch, now, lease->expiry});
    return Role{false, 0};
  }
  std::uint64_t epoch = read_last_epoch_locked() + 1;
  LeaseRecord l{instance_id, now + lease_duration, epoch};
  write_lease_locked(l);
  write_last_epoch_locked(epoch);
  journal_locked(
      {LeaseJournalEntry::Kind::granted, instance_id, epoch, now, l.expiry});
  return Role{true, epoch};
}

void FileCoordination::renew_leadership(const std::string& instance_id,
                                        std::uint64_t epoch,
                                        std::uint64_t lease_duration,
                                        std::uint64_t now) {
  ScopedLock lock(lock_fd_);
  auto lease = read_lease_locked();
  if (!lease || lease->instance_id != instance_id || lease->epoch != epoch) {
    throw LeaseError("lease superseded; instance must demote");
  }
  if (lease->expiry <= now) {
    throw LeaseError("lease expired; instance must demote");
  }
  lease->expiry = now + lease_duration;
  write_lease_locked(lease);
  journal_locked(
      {LeaseJournalEntry::Kind::renewed, instance_id, epoch, now, lease->expiry});
}

void FileCoordination::release_leadership(const std::string& instance_id,
                                          std::uint64_t epoch,
                                          std::uint64_t now) {
  ScopedLock lock(lock_fd_);
  auto lease = read_lease_locked();
  if (lease && lease->instance_id == instance_id && lease->epoch == epoch) {
    journal_locked(
        {LeaseJournalEntry::Kind::released, instance_id, epoch, now, now});
    write_lease_locked(std::nullopt);
  }
}

std::optional<LeaseRecord> FileCoordination::current_lease() {
  ScopedLock lock(lock_fd_);
  return read_lease_locked();
}

std::vector<LeaseJournalEntry> FileCoordination::lease_journal() {
  ScopedLock lock(lock_fd_);
  std::vector<LeaseJournalEntry> out;
  std::ifstream in(root_ / "lease.journal");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ojson j = ojson::parse(line, nullptr, false);
    if (j.is_discarded()) continue;
    LeaseJournalEntry e;
    e.kind = kind_from_name(j.value("kind", std::string{}));
    e.instance_id = j.value("instance_id", std::string{});
    e.epoch = j.value("epoch", std::uint64_t{0});
    e.at = j.value("at", std::uint64_t{0});
    e.expiry = j.value("expiry", std::uint64_t{0});
    out.push_back(e);
  }
  return out;
}

}  // namespace dblog
