#include "harness/curriculum_io.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include "harness/tasks.hpp"

namespace harness {

using nlohmann::ordered_json;

ordered_json curriculum_to_json(const Curriculum& c) {
  ordered_json blocks = ordered_json::array();
  for (const Block& block : c.blocks) {
    ordered_json task_blocks = ordered_json::array();
    for (const TaskBlock& tb : block.task_blocks) {
      ordered_json variants = ordered_json::array();
      for (const TaskVariantSpec& v : tb.variants) {
        ordered_json params = ordered_json::object();
        for (const auto& [key, value] : v.params) params[key] = value;
        ordered_json limit = ordered_json::object();
        limit[to_string(v.limit.kind)] = v.limit.amount;
        ordered_json variant;
        variant["variant"] = v.variant_name;
        variant["params"] = std::move(params);
        variant["limit"] = std::move(limit);
        variant["fixed_layout"] = v.fixed_layout;
        variants.push_back(std::move(variant));
      }
      ordered_json entry;
      entry["task"] = tb.task_name;
      entry["variants"] = std::move(variants);
      task_blocks.push_back(std::move(entry));
    }
    ordered_json entry;
    entry["type"] = to_string(block.block_type);
    entry["task_blocks"] = std::move(task_blocks);
    blocks.push_back(std::move(entry));
  }
  ordered_json doc;
  doc["name"] = c.name;
  doc["num_parallel_envs"] = c.num_parallel_envs;
  doc["order_seed"] = c.order_seed ? ordered_json(*c.order_seed) : ordered_json(nullptr);
  doc["blocks"] = std::move(blocks);
  return doc;
}

namespace {

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& path, const std::string& message) const {
    throw CurriculumFileError(source_ + ": " + (path.empty() ? "<root>" : path) + ": " + message);
  }

  void expect_object(const ordered_json& j, const std::string& path,
                     std::initializer_list<const char*> allowed,
                     std::initializer_list<const char*> required) const {
    if (!j.is_object()) fail(path, "expected an object");
    for (const auto& [key, value] : j.items()) {
      bool known = false;
      for (const char* a : allowed) known = known || key == a;
      if (!known) fail(path, "unknown key '" + key + "'");
    }
    for (const char* r : required) {
      if (!j.contains(r)) fail(path, std::string("missing key '") + r + "'");
    }
  }

  std::string string_at(const ordered_json& j, const char* key, const std::string& path) const {
    const auto& v = j.at(key);
    if (!v.is_string()) fail(join(path, key), "expected a string");
    return v.get<std::string>();
  }

  std::int64_t int_at(const ordered_json& j, const char* key, const std::string& path) const {
    const auto& v = j.at(key);
    if (!v.is_number_integer()) fail(join(path, key), "expected an integer");
    if (v.is_number_unsigned() && v.get<std::uint64_t>() > INT64_MAX) {
      fail(join(path, key), "integer out of range");
    }
    return v.get<std::int64_t>();
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  static std::string index(const std::string& path, std::size_t i) {
    return path + "[" + std::to_string(i) + "]";
  }

 private:
  std::string source_;
};

}  // namespace

Curriculum curriculum_from_json(const ordered_json& doc, const std::string& source) {
  Reader r(source);
  r.expect_object(doc, "", {"name", "num_parallel_envs", "order_seed", "blocks"},
                  {"name", "num_parallel_envs", "blocks"});
  Curriculum c;
  c.name = r.string_at(doc, "name", "");
  c.num_parallel_envs = r.int_at(doc, "num_parallel_envs", "");
  if (c.num_parallel_envs < 1) r.fail("num_parallel_envs", "must be >= 1");
  if (doc.contains("order_seed") && !doc["order_seed"].is_null()) {
    const auto& seed = doc["order_seed"];
    if (!seed.is_number_integer() || (seed.is_number_integer() && !seed.is_number_unsigned() &&
                                      seed.get<std::int64_t>() < 0)) {
      r.fail("order_seed", "expected a non-negative integer or null");
    }
    c.order_seed = seed.get<std::uint64_t>();
  }

  const auto& blocks = doc["blocks"];
  if (!blocks.is_array()) r.fail("blocks", "expected an array");
  const auto& registry = TaskRegistry::instance();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::string bpath = Reader::index("blocks", b);
    const auto& jb = blocks[b];
    r.expect_object(jb, bpath, {"type", "task_blocks"}, {"type", "task_blocks"});
    Block block;
    const std::string type = r.string_at(jb, "type", bpath);
    if (type == "learn") {
      block.block_type = BlockType::Learn;
    } else if (type == "eval") {
      block.block_type = BlockType::Eval;
    } else {
      r.fail(bpath + ".type", "expected \"learn\" or \"eval\", got \"" + type + "\"");
    }
    const auto& tbs = jb["task_blocks"];
    if (!tbs.is_array()) r.fail(bpath + ".task_blocks", "expected an array");
    for (std::size_t t = 0; t < tbs.size(); ++t) {
      const std::string tpath = Reader::index(bpath + ".task_blocks", t);
      const auto& jt = tbs[t];
      r.expect_object(jt, tpath, {"task", "variants"}, {"task", "variants"});
      TaskBlock tb;
      tb.task_name = r.string_at(jt, "task", tpath);
      const TaskDefinition* def = registry.find(tb.task_name);
      if (def == nullptr) r.fail(tpath + ".task", "unknown task \"" + tb.task_name + "\"");
      const auto& vs = jt["variants"];
      if (!vs.is_array()) r.fail(tpath + ".variants", "expected an array");
      for (std::size_t v = 0; v < vs.size(); ++v) {
        const std::string vpath = Reader::index(tpath + ".variants", v);
        const auto& jv = vs[v];
        r.expect_object(jv, vpath, {"variant", "params", "limit", "fixed_layout"},
                        {"variant", "params", "limit", "fixed_layout"});
        TaskVariantSpec spec;
        spec.task_name = tb.task_name;
        spec.variant_name = r.string_at(jv, "variant", vpath);
        if (def->find_variant(spec.variant_name) == nullptr) {
          r.fail(vpath + ".variant", "unknown variant \"" + spec.variant_name + "\" of task \"" +
                                         tb.task_name + "\"");
        }
        const auto& params = jv["params"];
        if (!params.is_object()) r.fail(vpath + ".params", "expected an object");
        for (const auto& [key, value] : params.items()) {
          spec.params[key] = r.int_at(params, key.c_str(), vpath + ".params");
        }
        const auto& limit = jv["limit"];
        const std::string lpath = vpath + ".limit";
        if (!limit.is_object() || limit.size() != 1) {
          r.fail(lpath, "expected exactly one of {\"episodes\": n} or {\"steps\": n}");
        }
        r.expect_object(limit, lpath, {"episodes", "steps"}, {});
        const bool episodes = limit.contains("episodes");
        spec.limit.kind = episodes ? LimitKind::Episodes : LimitKind::Steps;
        spec.limit.amount = r.int_at(limit, episodes ? "episodes" : "steps", lpath);
        if (spec.limit.amount < 1) r.fail(lpath, "amount must be >= 1");
        if (!jv["fixed_layout"].is_boolean()) r.fail(vpath + ".fixed_layout", "expected a boolean");
        spec.fixed_layout = jv["fixed_layout"].get<bool>();
        tb.variants.push_back(std::move(spec));
      }
      block.task_blocks.push_back(std::move(tb));
    }
    c.blocks.push_back(std::move(block));
  }
  return c;
}

std::string curriculum_to_string(const Curriculum& c) { return curriculum_to_json(c).dump(2) + "\n"; }

Curriculum curriculum_from_string(std::string_view text, const std::string& source) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw CurriculumFileError(source + ": malformed JSON: " + e.what());
  }
  return curriculum_from_json(doc, source);
}

void save_curriculum_file(const Curriculum& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CurriculumFileError(path.string() + ": cannot open for writing");
  out << curriculum_to_string(c);
  if (!out) throw CurriculumFileError(path.string() + ": write failed");
}

Curriculum load_curriculum_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CurriculumFileError(path.string() + ": cannot open");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return curriculum_from_string(buffer.str(), path.string());
}

}  // namespace harness
