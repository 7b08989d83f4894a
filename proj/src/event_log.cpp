#include "harness/event_log.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <sstream>

#include <json.hpp>

namespace harness {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string shortest_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string quoted(const std::string& s) { return json(s).dump(); }

constexpr const char* kRecordKeys[] = {"block_num",  "block_type", "task_name",
                                       "variant_name", "episode_id", "steps",
                                       "reward",     "truncated",  "env_seed"};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LogReadError(path.string() + ": cannot open");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::optional<std::int64_t> block_number_of(const fs::path& path) {
  const std::string name = path.filename().string();
  if (name.size() < 12 || name.rfind("block_", 0) != 0 ||
      name.substr(name.size() - 6) != ".jsonl") {
    return std::nullopt;
  }
  const std::string digits = name.substr(6, name.size() - 12);
  std::int64_t n = 0;
  const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), n);
  if (res.ec != std::errc() || res.ptr != digits.data() + digits.size()) return std::nullopt;
  return n;
}

}  // namespace

std::string format_episode_record(const EpisodeRecord& rec) {
  std::string line;
  line.reserve(192);
  line += "{\"block_num\":" + std::to_string(rec.block_num);
  line += ",\"block_type\":" + quoted(to_string(rec.block_type));
  line += ",\"task_name\":" + quoted(rec.task_name);
  line += ",\"variant_name\":" + quoted(rec.variant_name);
  line += ",\"episode_id\":" + std::to_string(rec.episode_id);
  line += ",\"steps\":" + std::to_string(rec.steps);
  line += ",\"reward\":" + shortest_double(rec.reward);
  line += std::string(",\"truncated\":") + (rec.truncated ? "true" : "false");
  line += ",\"env_seed\":" + std::to_string(rec.env_seed);
  line += "}";
  return line;
}

EpisodeRecord parse_episode_record(std::string_view line, const std::string& where) {
  json j;
  try {
    j = json::parse(line.begin(), line.end());
  } catch (const json::parse_error& e) {
    throw LogReadError(where + ": malformed record: " + e.what());
  }
  if (!j.is_object()) throw LogReadError(where + ": record is not an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(kRecordKeys), std::end(kRecordKeys), key) == std::end(kRecordKeys)) {
      throw LogReadError(where + ": unknown key '" + key + "'");
    }
  }
  for (const char* key : kRecordKeys) {
    if (!j.contains(key)) throw LogReadError(where + ": missing key '" + key + "'");
  }
  auto fail = [&where](const char* key, const char* what) {
    throw LogReadError(where + ": '" + key + "' " + what);
  };
  if (!j["block_num"].is_number_integer()) fail("block_num", "must be an integer");
  if (!j["block_type"].is_string()) fail("block_type", "must be a string");
  if (!j["task_name"].is_string()) fail("task_name", "must be a string");
  if (!j["variant_name"].is_string()) fail("variant_name", "must be a string");
  if (!j["episode_id"].is_number_integer()) fail("episode_id", "must be an integer");
  if (!j["steps"].is_number_integer()) fail("steps", "must be an integer");
  if (!j["reward"].is_number()) fail("reward", "must be a number");
  if (!j["truncated"].is_boolean()) fail("truncated", "must be a boolean");
  if (!j["env_seed"].is_number_unsigned() && !(j["env_seed"].is_number_integer() &&
                                               j["env_seed"].get<std::int64_t>() >= 0)) {
    fail("env_seed", "must be a non-negative integer");
  }

  EpisodeRecord rec;
  rec.block_num = j["block_num"].get<std::int64_t>();
  const std::string type = j["block_type"].get<std::string>();
  if (type == "learn") {
    rec.block_type = BlockType::Learn;
  } else if (type == "eval") {
    rec.block_type = BlockType::Eval;
  } else {
    fail("block_type", "must be \"learn\" or \"eval\"");
  }
  rec.task_name = j["task_name"].get<std::string>();
  rec.variant_name = j["variant_name"].get<std::string>();
  rec.episode_id = j["episode_id"].get<std::int64_t>();
  rec.steps = j["steps"].get<std::int64_t>();
  if (rec.steps < 1) fail("steps", "must be >= 1");
  rec.reward = j["reward"].get<double>();
  rec.truncated = j["truncated"].get<bool>();
  rec.env_seed = j["env_seed"].get<std::uint64_t>();
  return rec;
}

std::string block_file_name(std::int64_t block_num) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "block_%04lld.jsonl", static_cast<long long>(block_num));
  return buf;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

LifetimeLogWriter::LifetimeLogWriter(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw LogWriteError(dir_.string() + ": " + ec.message());
}

void LifetimeLogWriter::begin_block(std::int64_t block_num, BlockType) {
  end_block();
  block_num_ = block_num;
  block_path_ = dir_ / block_file_name(block_num);
  block_.open(block_path_, std::ios::binary | std::ios::trunc);
  if (!block_) throw LogWriteError(block_path_.string() + ": cannot open for writing");
}

void LifetimeLogWriter::append_episode(const EpisodeRecord& rec) {
  if (!block_.is_open()) throw LogWriteError("append_episode called outside a block");
  if (rec.block_num != block_num_) {
    throw LogWriteError("record for block " + std::to_string(rec.block_num) + " written to " +
                        block_path_.string());
  }
  block_ << format_episode_record(rec) << '\n';
  if (!block_) throw LogWriteError(block_path_.string() + ": write failed");
}

void LifetimeLogWriter::end_block() {
  if (!block_.is_open()) return;
  block_.close();
  if (block_.fail()) throw LogWriteError(block_path_.string() + ": close failed");
}

std::string metadata_to_string(const LifetimeMetadata& meta) {
  ordered_json j;
  j["lifetime_index"] = meta.lifetime_index;
  j["master_seed"] = meta.master_seed;
  j["lifetime_seed"] = meta.lifetime_seed;
  j["curriculum_seed"] = meta.curriculum_seed;
  j["agent_seed"] = meta.agent_seed;
  j["curriculum_name"] = meta.curriculum_name;
  j["agent_name"] = meta.agent_name;
  j["harness_version"] = meta.harness_version;
  j["started_at"] = meta.started_at;
  j["finished_at"] = meta.finished_at;
  j["status"] = meta.status;
  j["error"] = meta.error ? ordered_json(*meta.error) : ordered_json(nullptr);
  return j.dump(2) + "\n";
}

LifetimeMetadata metadata_from_string(std::string_view text, const std::string& where) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
    LifetimeMetadata meta;
    meta.lifetime_index = j.at("lifetime_index").get<std::int64_t>();
    meta.master_seed = j.at("master_seed").get<std::uint64_t>();
    meta.lifetime_seed = j.at("lifetime_seed").get<std::uint64_t>();
    meta.curriculum_seed = j.at("curriculum_seed").get<std::uint64_t>();
    meta.agent_seed = j.at("agent_seed").get<std::uint64_t>();
    meta.curriculum_name = j.at("curriculum_name").get<std::string>();
    meta.agent_name = j.at("agent_name").get<std::string>();
    meta.harness_version = j.at("harness_version").get<std::string>();
    meta.started_at = j.at("started_at").get<std::string>();
    meta.finished_at = j.at("finished_at").get<std::string>();
    meta.status = j.at("status").get<std::string>();
    if (j.contains("error") && !j["error"].is_null()) meta.error = j["error"].get<std::string>();
    return meta;
  } catch (const json::exception& e) {
    throw LogReadError(where + ": invalid lifetime metadata: " + e.what());
  }
}

void LifetimeLogWriter::write_metadata(const LifetimeMetadata& meta) const {
  const fs::path path = dir_ / "lifetime_metadata.json";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << metadata_to_string(meta);
  if (!out) throw LogWriteError(path.string() + ": write failed");
}

LifetimeLog read_lifetime(const fs::path& dir) {
  LifetimeLog log;
  const fs::path meta_path = dir / "lifetime_metadata.json";
  log.metadata = metadata_from_string(read_file(meta_path), meta_path.string());

  std::vector<std::pair<std::int64_t, fs::path>> blocks;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (auto n = block_number_of(entry.path())) blocks.emplace_back(*n, entry.path());
  }
  if (ec) throw LogReadError(dir.string() + ": " + ec.message());
  std::sort(blocks.begin(), blocks.end());

  for (const auto& [block_num, path] : blocks) {
    const std::string text = read_file(path);
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
      const std::size_t end = text.find('\n', pos);
      ++line_no;
      const std::string where = path.string() + ":" + std::to_string(line_no);
      if (end == std::string::npos) {
        throw LogReadError(where + ": incomplete line (missing newline)");
      }
      const std::string_view line(text.data() + pos, end - pos);
      pos = end + 1;
      EpisodeRecord rec = parse_episode_record(line, where);
      if (rec.block_num != block_num) {
        throw LogReadError(where + ": record " + std::to_string(line_no - 1) + " has block_num " +
                           std::to_string(rec.block_num) + ", file is block " +
                           std::to_string(block_num));
      }
      if (!log.episodes.empty() && rec.episode_id <= log.episodes.back().episode_id) {
        throw LogReadError(where + ": episode_id not strictly increasing");
      }
      log.episodes.push_back(std::move(rec));
    }
  }
  return log;
}

std::vector<fs::path> lifetime_dirs(const fs::path& log_dir) {
  if (fs::exists(log_dir / "lifetime_metadata.json")) return {log_dir};
  std::vector<std::pair<std::int64_t, fs::path>> found;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(log_dir, ec)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_directory() || name.rfind("lifetime_", 0) != 0) continue;
    std::int64_t idx = 0;
    const auto res = std::from_chars(name.data() + 9, name.data() + name.size(), idx);
    if (res.ec == std::errc() && res.ptr == name.data() + name.size()) {
      found.emplace_back(idx, entry.path());
    }
  }
  if (ec) throw LogReadError(log_dir.string() + ": " + ec.message());
  std::sort(found.begin(), found.end());
  std::vector<fs::path> out;
  for (auto& [idx, path] : found) out.push_back(std::move(path));
  return out;
}

}  // namespace harness
