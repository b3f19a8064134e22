#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dblog/types.hpp"

namespace dblog {

enum class ReadMode { plain, linearizable };

struct LeaseRecord {
  std::string instance_id;
  std::uint64_t expiry{};  // clock units supplied by the caller
  std::uint64_t epoch{};
};

struct LeaseJournalEntry {
  enum class Kind { granted, renewed, released, rejected };
  Kind kind{};
  std::string instance_id;
  std::uint64_t epoch{};
  std::uint64_t at{};
  std::uint64_t expiry{};
};

struct Role {
  bool active{};
  std::uint64_t epoch{};
};

// State store plus leader election, standing in for the external
// coordination service. Pluggable: in-process for deterministic tests,
// file-backed for multi-process runs. All writes are fenced by epoch so a
// paused old leader cannot corrupt checkpoints.
class CoordinationBackend {
 public:
  virtual ~CoordinationBackend() = default;

  // Throws FencingError when `epoch` is below the highest granted epoch,
  // StateStoreError when the store is unavailable.
  virtual void put_state(const std::string& path, const std::string& value,
                         std::uint64_t epoch) = 0;
  virtual std::optional<std::string> get_state(
      const std::string& path, ReadMode mode = ReadMode::linearizable) = 0;
  virtual std::vector<std::string> list_state(const std::string& prefix) = 0;

  // First claimant while no unexpired lease exists becomes active with a
  // fresh epoch; everyone else is passive.
  virtual Role acquire_leadership(const std::string& instance_id,
                                  std::uint64_t lease_duration,
                                  std::uint64_t now) = 0;
  // Throws LeaseError if the lease expired or was taken over; the caller
  // must demote itself and stop writing state.
  virtual void renew_leadership(const std::string& instance_id,
                                std::uint64_t epoch,
                                std::uint64_t lease_duration,
                                std::uint64_t now) = 0;
  virtual void release_leadership(const std::string& instance_id,
                                  std::uint64_t epoch, std::uint64_t now) = 0;

  virtual std::optional<LeaseRecord> current_lease() = 0;
  virtual std::vector<LeaseJournalEntry> lease_journal() = 0;
};

class InProcessCoordination : public CoordinationBackend {
 public:
  void put_state(const std::string& path, const std::string& value,
                 std::uint64_t epoch) override;
  std::optional<std::string> get_state(const std::string& path,
                                       ReadMode mode) override;
  std::vector<std::string> list_state(const std::string& prefix) override;
  Role acquire_leadership(const std::string& instance_id,
                          std::uint64_t lease_duration,
                          std::uint64_t now) override;
  void renew_leadership(const std::string& instance_id, std::uint64_t epoch,
                        std::uint64_t lease_duration,
                        std::uint64_t now) override;
  void release_leadership(const std::string& instance_id, std::uint64_t epoch,
                          std::uint64_t now) override;
  std::optional<LeaseRecord> current_lease() override;
  std::vector<LeaseJournalEntry> lease_journal() override;

  // Test hook: subsequent put_state calls fail until cleared.
  void set_unavailable(bool value);

 private:
  std::mutex mu_;
  std::map<std::string, std::string> entries_;
  std::optional<LeaseRecord> lease_;
  std::uint64_t last_epoch_ = 0;
  std::vector<LeaseJournalEntry> journal_;
  bool unavailable_ = false;
};

// Directory-backed implementation safe for concurrent callers across
// processes: a lock file serializes lease mutations and every value is
// written via temp file + atomic rename. Layout:
//   <root>/lease            current lease record
//   <root>/lease.journal    append-only lease journal
//   <root>/kv/<path>        state entries
class FileCoordination : public CoordinationBackend {
 public:
  explicit FileCoordination(std::filesystem::path root);

  void put_state(const std::string& path, const std::string& value,
                 std::uint64_t epoch) override;
  std::optional<std::string> get_state(const std::string& path,
                                       ReadMode mode) override;
  std::vector<std::string> list_state(const std::string& prefix) override;
  Role acquire_leadership(const std::string& instance_id,
                          std::uint64_t lease_duration,
                          std::uint64_t now) override;
  void renew_leadership(const std::string& instance_id, std::uint64_t epoch,
                        std::uint64_t lease_duration,
                        std::uint64_t now) override;
  void release_leadership(const std::string& instance_id, std::uint64_t epoch,
                          std::uint64_t now) override;
  std::optional<LeaseRecord> current_lease() override;
  std::vector<LeaseJournalEntry> lease_journal() override;

 private:
  class ScopedLock;

  std::filesystem::path key_path(const std::string& path) const;
  std::optional<LeaseRecord> read_lease_locked() const;
  void write_lease_locked(const std::optional<LeaseRecord>& lease);
  std::uint64_t read_last_epoch_locked() const;
  void write_last_epoch_locked(std::uint64_t epoch);
  void journal_locked(const LeaseJournalEntry& e);

  std::filesystem::path root_;
  int lock_fd_ = -1;
  // Plain-mode read cache; linearizable reads bypass it.
  mutable std::mutex cache_mu_;
  mutable std::map<std::string, std::string> read_cache_;
};

}  // namespace dblog
