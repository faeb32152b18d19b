#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "cqsat/operators.hpp"

namespace cqsat {

using Json = nlohmann::ordered_json;

/// Row-major array of [re, im] pairs.
Json matrix_to_json(const Matrix& m);
/// Reads a rows x cols matrix; the array length must be rows * cols.
Matrix matrix_from_json(const Json& j, const std::string& path, Eigen::Index rows,
                        Eigen::Index cols);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j, const std::string& path, Eigen::Index size);

/// Field access with SchemaError on a missing or mistyped member.
const Json& require_field(const Json& j, const std::string& path, const char* key);
long require_int(const Json& j, const std::string& path, const char* key);
double require_number(const Json& j, const std::string& path, const char* key);

Json parse_document(std::string_view text, const char* what);
std::string dump_document(const Json& j);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& contents);

}  // namespace cqsat
