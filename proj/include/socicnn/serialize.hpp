#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "socicnn/model.hpp"

namespace socicnn {

inline constexpr int kModelFormatVersion = 1;

nlohmann::json matrix_to_json(const Matrix& m);
nlohmann::json vector_to_json(const Vector& v);
Matrix matrix_from_json(const nlohmann::json& j);
Vector vector_from_json(const nlohmann::json& j);

/// Model document: dims, layers[{W,U,b}], c, v, b0, quad[{alpha,B,e}], cone[{lambda,A,d}],
/// seed, format_version. Matrices are row-major nested lists.
nlohmann::json model_to_json(const SocIcnnParams& params);
SocIcnnParams model_from_json(const nlohmann::json& doc);

/// Parses text; malformed JSON is reported as ParseError with line and column.
nlohmann::json parse_json_text(const std::string& text, const std::string& source = "<input>");

std::string dump_model(const SocIcnnParams& params);
void save_model(const SocIcnnParams& params, const std::filesystem::path& path);
SocIcnnParams load_model(const std::filesystem::path& path);

}  // namespace socicnn
