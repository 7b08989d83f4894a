#include <gtest/gtest.h>

#include <filesystem>

#include "harness/curriculum.hpp"
#include "harness/curriculum_io.hpp"
#include "oracles.hpp"

using namespace harness;

namespace {

std::string error_of(const std::string& text) {
  try {
    curriculum_from_string(text, "test.json");
  } catch (const CurriculumFileError& e) {
    return e.what();
  }
  return "";
}

const char* kMinimal = R"({
  "name": "tiny",
  "num_parallel_envs": 2,
  "order_seed": null,
  "blocks": [
    {"type": "learn", "task_blocks": [
      {"task": "Unlock", "variants": [
        {"variant": "small", "params": {"room_size": 5}, "limit": {"steps": 40}, "fixed_layout": true}
      ]}
    ]}
  ]
})";

}  // namespace

TEST(CurriculumIo, RoundTripGeneratedCurricula) {
  for (std::uint64_t seed : {0ULL, 9ULL}) {
    for (const Curriculum& c : {generate_condensed(300, 20, seed), generate_dispersed(30, 5, seed)}) {
      const std::string text = curriculum_to_string(c);
      const Curriculum back = curriculum_from_string(text);
      EXPECT_EQ(back, c);
      EXPECT_EQ(curriculum_to_string(back), text);
    }
  }
}

TEST(CurriculumIo, FileRoundTrip) {
  const auto dir = oracle::temp_dir("cio");
  const Curriculum c = generate_condensed(12, 3, 4);
  save_curriculum_file(c, dir / "c.json");
  EXPECT_EQ(load_curriculum_file(dir / "c.json"), c);
  std::filesystem::remove_all(dir);
}

TEST(CurriculumIo, ParsesMinimalDocument) {
  const Curriculum c = curriculum_from_string(kMinimal);
  EXPECT_EQ(c.name, "tiny");
  EXPECT_EQ(c.num_parallel_envs, 2);
  EXPECT_FALSE(c.order_seed.has_value());
  ASSERT_EQ(c.blocks.size(), 1U);
  const auto& v = c.blocks[0].task_blocks[0].variants[0];
  EXPECT_EQ(v.limit, ExperienceLimit::steps(40));
  EXPECT_TRUE(v.fixed_layout);
  EXPECT_EQ(v.params.at("room_size"), 5);
  EXPECT_TRUE(validate_curriculum(c).empty());
}

TEST(CurriculumIo, ZeroLimitIsSchemaError) {
  std::string text = kMinimal;
  text.replace(text.find("\"steps\": 40"), 11, "\"steps\": 0");
  const std::string err = error_of(text);
  EXPECT_NE(err.find("blocks[0].task_blocks[0].variants[0].limit"), std::string::npos) << err;
}

TEST(CurriculumIo, UnknownTaskIsNamed) {
  std::string text = kMinimal;
  text.replace(text.find("\"Unlock\""), 8, "\"Foo\"");
  const std::string err = error_of(text);
  EXPECT_NE(err.find("Foo"), std::string::npos) << err;
  EXPECT_NE(err.find("blocks[0].task_blocks[0].task"), std::string::npos) << err;
}

TEST(CurriculumIo, UnknownVariantIsNamed) {
  std::string text = kMinimal;
  text.replace(text.find("\"small\""), 7, "\"tiny\"");
  EXPECT_NE(error_of(text).find("tiny"), std::string::npos);
}

TEST(CurriculumIo, UnknownKeysRejectedAtEveryLevel) {
  const std::vector<std::pair<std::string, std::string>> edits{
      {"\"name\": \"tiny\",", "\"name\": \"tiny\", \"extra\": 1,"},
      {"{\"type\": \"learn\",", "{\"type\": \"learn\", \"x\": 1,"},
      {"{\"task\": \"Unlock\",", "{\"task\": \"Unlock\", \"y\": 1,"},
      {"\"fixed_layout\": true}", "\"fixed_layout\": true, \"z\": 2}"},
      {"{\"steps\": 40}", "{\"steps\": 40, \"episodes\": 3}"},
  };
  for (const auto& [from, to] : edits) {
    std::string text = kMinimal;
    const auto pos = text.find(from);
    ASSERT_NE(pos, std::string::npos) << from;
    text.replace(pos, from.size(), to);
    EXPECT_FALSE(error_of(text).empty()) << to;
  }
}

TEST(CurriculumIo, MalformedJsonAndTypeErrors) {
  EXPECT_NE(error_of("{\"name\": ").find("malformed JSON"), std::string::npos);
  std::string text = kMinimal;
  text.replace(text.find("\"learn\""), 7, "\"study\"");
  EXPECT_NE(error_of(text).find("blocks[0].type"), std::string::npos);
  text = kMinimal;
  text.replace(text.find("true"), 4, "1");
  EXPECT_NE(error_of(text).find("fixed_layout"), std::string::npos);
  EXPECT_NE(error_of("[]").find("expected an object"), std::string::npos);
}

TEST(CurriculumIo, MissingFileReported) {
  EXPECT_THROW(load_curriculum_file("/nonexistent/dir/c.json"), CurriculumFileError);
}
