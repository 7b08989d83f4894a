#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "harness/curriculum.hpp"

namespace harness {

/// Raised for malformed or schema-violating curriculum files; the message
/// carries the source name and the offending JSON path.
class CurriculumFileError : public CurriculumError {
 public:
  using CurriculumError::CurriculumError;
};

nlohmann::ordered_json curriculum_to_json(const Curriculum& c);
Curriculum curriculum_from_json(const nlohmann::ordered_json& doc, const std::string& source);

/// Canonical text form: fixed key order, two-space indent, trailing newline.
std::string curriculum_to_string(const Curriculum& c);
Curriculum curriculum_from_string(std::string_view text, const std::string& source = "<string>");

void save_curriculum_file(const Curriculum& c, const std::filesystem::path& path);
Curriculum load_curriculum_file(const std::filesystem::path& path);

}  // namespace harness
