#include "cqsat/json_io.hpp"

#include <fstream>
#include <sstream>

#include "cqsat/error.hpp"

namespace cqsat {

Json matrix_to_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back({m(i, j).real(), m(i, j).imag()});
  return out;
}

namespace {

cplx entry_from_json(const Json& e, const std::string& path) {
  if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
    throw SchemaError(path, "expected [re, im]");
  return {e[0].get<double>(), e[1].get<double>()};
}

}  // namespace

Matrix matrix_from_json(const Json& j, const std::string& path, Eigen::Index rows,
                        Eigen::Index cols) {
  if (!j.is_array()) throw SchemaError(path, "expected an array of [re, im] pairs");
  if (static_cast<Eigen::Index>(j.size()) != rows * cols) {
    std::ostringstream os;
    os << "expected " << rows * cols << " entries, found " << j.size();
    throw SchemaError(path, os.str());
  }
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto k = static_cast<std::size_t>(i * cols + c);
      m(i, c) = entry_from_json(j[k], path + "[" + std::to_string(k) + "]");
    }
  return m;
}

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back({v(i).real(), v(i).imag()});
  return out;
}

Vector vector_from_json(const Json& j, const std::string& path, Eigen::Index size) {
  return matrix_from_json(j, path, size, 1).col(0);
}

const Json& require_field(const Json& j, const std::string& path, const char* key) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(path.empty() ? key : path + "." + key, "missing field");
  return *it;
}

long require_int(const Json& j, const std::string& path, const char* key) {
  const Json& v = require_field(j, path, key);
  if (!v.is_number_integer())
    throw SchemaError(path.empty() ? key : path + "." + key, "expected an integer");
  return v.get<long>();
}

double require_number(const Json& j, const std::string& path, const char* key) {
  const Json& v = require_field(j, path, key);
  if (!v.is_number()) throw SchemaError(path.empty() ? key : path + "." + key, "expected a number");
  return v.get<double>();
}

Json parse_document(std::string_view text, const char* what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("", std::string(what) + " is not valid JSON: " + e.what());
  }
}

std::string dump_document(const Json& j) { return j.dump(1, '\t') + "\n"; }

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << contents;
  if (!out) throw Error("write failed for " + path);
}

}  // namespace cqsat
