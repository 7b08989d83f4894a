#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "harness/curriculum.hpp"

namespace harness {

inline constexpr const char* kHarnessVersion = "0.1.0";

struct EpisodeRecord {
  std::int64_t block_num = 0;
  BlockType block_type = BlockType::Learn;
  std::string task_name;
  std::string variant_name;
  std::int64_t episode_id = 0;
  std::int64_t steps = 0;
  /// Sum of the true environment rewards, also for evaluation episodes.
  double reward = 0.0;
  bool truncated = false;
  std::uint64_t env_seed = 0;

  bool operator==(const EpisodeRecord&) const = default;
};

struct LifetimeMetadata {
  std::int64_t lifetime_index = 0;
  std::uint64_t master_seed = 0;
  std::uint64_t lifetime_seed = 0;
  std::uint64_t curriculum_seed = 0;
  std::uint64_t agent_seed = 0;
  std::string curriculum_name;
  std::string agent_name;
  std::string harness_version = kHarnessVersion;
  std::string started_at;
  std::string finished_at;
  std::string status = "ok";
  std::optional<std::string> error;

  bool operator==(const LifetimeMetadata&) const = default;
};

class LogReadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LogWriteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Canonical JSON line (no trailing newline). Keys appear in field order and
/// reals use the shortest decimal form that round-trips.
std::string format_episode_record(const EpisodeRecord& rec);
/// Parses one line; `where` prefixes error messages.
EpisodeRecord parse_episode_record(std::string_view line, const std::string& where);

std::string block_file_name(std::int64_t block_num);
std::string utc_timestamp();

/// Receives episodes as the runner completes them.
class EpisodeSink {
 public:
  virtual ~EpisodeSink() = default;
  virtual void begin_block(std::int64_t block_num, BlockType type) {
    (void)block_num;
    (void)type;
  }
  virtual void append_episode(const EpisodeRecord& rec) = 0;
  virtual void end_block() {}
};

/// Writes one lifetime directory: block_NNNN.jsonl per block plus
/// lifetime_metadata.json.
class LifetimeLogWriter final : public EpisodeSink {
 public:
  explicit LifetimeLogWriter(std::filesystem::path dir);

  void begin_block(std::int64_t block_num, BlockType type) override;
  void append_episode(const EpisodeRecord& rec) override;
  void end_block() override;
  void write_metadata(const LifetimeMetadata& meta) const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::ofstream block_;
  std::filesystem::path block_path_;
  std::int64_t block_num_ = -1;
};

struct LifetimeLog {
  LifetimeMetadata metadata;
  std::vector<EpisodeRecord> episodes;
};

std::string metadata_to_string(const LifetimeMetadata& meta);
LifetimeMetadata metadata_from_string(std::string_view text, const std::string& where);

/// Records ordered by block number, then file order.
LifetimeLog read_lifetime(const std::filesystem::path& dir);
/// Lifetime directories of a run directory in index order; a lifetime
/// directory given directly is returned as the only entry.
std::vector<std::filesystem::path> lifetime_dirs(const std::filesystem::path& log_dir);

}  // namespace harness
