#include "socicnn/serialize.hpp"

#include <fstream>
#include <sstream>

namespace socicnn {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::ParseError, "matrix must be a list of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw Error(ErrorCode::ParseError, "ragged matrix row");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

Vector vector_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::ParseError, "vector must be a list");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

json model_to_json(const SocIcnnParams& p) {
  json doc;
  doc["format_version"] = kModelFormatVersion;
  json widths = json::array();
  for (const auto& layer : p.layers) widths.push_back(layer.b.size());
  doc["dims"] = {{"d0", p.input_dim}, {"widths", widths}};
  json layers = json::array();
  for (const auto& layer : p.layers)
    layers.push_back({{"W", matrix_to_json(layer.W)}, {"U", matrix_to_json(layer.U)},
                      {"b", vector_to_json(layer.b)}});
  doc["layers"] = std::move(layers);
  doc["c"] = vector_to_json(p.c);
  doc["v"] = vector_to_json(p.v);
  doc["b0"] = p.b0;
  json quad = json::array();
  for (const auto& m : p.quad)
    quad.push_back({{"alpha", m.alpha}, {"B", matrix_to_json(m.B)}, {"e", vector_to_json(m.e)}});
  doc["quad"] = std::move(quad);
  json cone = json::array();
  for (const auto& m : p.cone)
    cone.push_back({{"lambda", m.lambda}, {"A", matrix_to_json(m.A)}, {"d", vector_to_json(m.d)}});
  doc["cone"] = std::move(cone);
  doc["seed"] = p.seed;
  return doc;
}

SocIcnnParams model_from_json(const json& doc) {
  try {
    if (doc.value("format_version", 0) != kModelFormatVersion)
      throw Error(ErrorCode::ParseError, "unsupported format_version");
    SocIcnnParams p;
    p.input_dim = doc.at("dims").at("d0").get<Eigen::Index>();
    const auto& widths = doc.at("dims").at("widths");
    Eigen::Index prev = 0;
    std::size_t l = 0;
    for (const auto& jl : doc.at("layers")) {
      Layer layer;
      layer.W = matrix_from_json(jl.at("W"));
      layer.b = vector_from_json(jl.at("b"));
      layer.U = matrix_from_json(jl.at("U"));
      // An empty U serializes as rows of empty lists, or as [] when the layer is empty.
      if (layer.U.size() == 0) layer.U = Matrix(layer.b.size(), prev);
      if (l < widths.size() && widths[l].get<Eigen::Index>() != layer.b.size())
        throw Error(ErrorCode::DimensionMismatch, "dims.widths disagrees with layer sizes");
      prev = layer.b.size();
      p.layers.push_back(std::move(layer));
      ++l;
    }
    if (widths.size() != p.layers.size())
      throw Error(ErrorCode::DimensionMismatch, "dims.widths length disagrees with layers");
    p.c = vector_from_json(doc.at("c"));
    p.v = vector_from_json(doc.at("v"));
    p.b0 = doc.at("b0").get<double>();
    for (const auto& jq : doc.at("quad"))
      p.quad.push_back({jq.at("alpha").get<double>(), matrix_from_json(jq.at("B")),
                        vector_from_json(jq.at("e"))});
    for (const auto& jc : doc.at("cone"))
      p.cone.push_back({jc.at("lambda").get<double>(), matrix_from_json(jc.at("A")),
                        vector_from_json(jc.at("d"))});
    p.seed = doc.value("seed", std::uint64_t{0});
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const auto stop = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream os;
    os << source << ":" << line << ":" << col << ": " << e.what();
    throw Error(ErrorCode::ParseError, os.str());
  }
}

std::string dump_model(const SocIcnnParams& params) { return model_to_json(params).dump(1) + "\n"; }

void save_model(const SocIcnnParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << dump_model(params);
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

SocIcnnParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return model_from_json(parse_json_text(buf.str(), path.string()));
}

}  // namespace socicnn
