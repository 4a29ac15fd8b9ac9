#include "fosyn/plant.hpp"

#include "fosyn/errors.hpp"
#include "json_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace fosyn {

namespace {

void check_block(const Matrix& M, const char* block, Eigen::Index rows, Eigen::Index cols) {
  if (M.rows() != rows || M.cols() != cols) {
    throw DimensionError(std::string("plant block ") + block + " is " + std::to_string(M.rows()) +
                         "x" + std::to_string(M.cols()) + ", expected " + std::to_string(rows) +
                         "x" + std::to_string(cols));
  }
  if (!M.allFinite()) {
    throw InvalidInputError(std::string("plant block ") + block + " has non-finite entries");
  }
}

}  // namespace

const Plant& validate(const Plant& p) {
  if (p.A.rows() != p.A.cols()) {
    throw DimensionError("plant block A is " + std::to_string(p.A.rows()) + "x" +
                         std::to_string(p.A.cols()) + ", expected square");
  }
  const Eigen::Index n = p.A.rows();
  const Eigen::Index m1 = p.B1.cols();
  const Eigen::Index m2 = p.B2.cols();
  const Eigen::Index p1 = p.C1.rows();
  const Eigen::Index p2 = p.C2.rows();
  if (n < 1) {
    throw InvalidInputError("plant must have at least one state");
  }
  if (m2 < 1 || p2 < 1) {
    throw InvalidInputError("plant must have at least one control input and one measured output");
  }
  check_block(p.A, "A", n, n);
  check_block(p.B1, "B1", n, m1);
  check_block(p.B2, "B2", n, m2);
  check_block(p.C1, "C1", p1, n);
  check_block(p.C2, "C2", p2, n);
  check_block(p.D11, "D11", p1, m1);
  check_block(p.D12, "D12", p1, m2);
  check_block(p.D21, "D21", p2, m1);
  check_block(p.D22, "D22", p2, m2);
  return p;
}

const PlantSet& check_set(const PlantSet& ps) {
  if (ps.plants.empty()) {
    throw InvalidInputError("plant set is empty");
  }
  for (const Plant& p : ps.plants) {
    validate(p);
  }
  const Plant& first = ps.plants.front();
  for (std::size_t i = 1; i < ps.plants.size(); ++i) {
    const Plant& p = ps.plants[i];
    if (p.m2() != first.m2() || p.p2() != first.p2()) {
      throw DimensionError("plant \"" + p.name + "\" has controller interface (" +
                           std::to_string(p.m2()) + " in, " + std::to_string(p.p2()) +
                           " out) but plant \"" + first.name + "\" has (" +
                           std::to_string(first.m2()) + ", " + std::to_string(first.p2()) + ")");
    }
    if (p.D22 != first.D22) {
      throw InvalidInputError("plant \"" + p.name + "\" has a different D22 block than plant \"" +
                              first.name + "\"; all plants must share the feedthrough matrix");
    }
  }
  return ps;
}

Plant load_plant(const std::string& text) {
  const nlohmann::json doc = detail::parse_document(text, "load_plant");
  if (!doc.is_object()) {
    throw ParseError("load_plant: document root must be an object");
  }
  static const std::set<std::string> known = {"A",   "B1",  "B2",  "C1",  "C2",
                                              "D11", "D12", "D21", "D22", "name"};
  for (const auto& item : doc.items()) {
    if (!known.count(item.key())) {
      throw ParseError("load_plant: unknown field \"" + item.key() + "\"");
    }
  }

  Plant p;
  auto required = [&](const char* key) {
    if (!doc.contains(key)) {
      throw ParseError(std::string("load_plant: missing required field \"") + key + "\"");
    }
    return detail::matrix_from_json(doc.at(key), key);
  };
  p.A = required("A");
  p.B1 = required("B1");
  p.B2 = required("B2");
  p.C1 = required("C1");
  p.C2 = required("C2");

  auto optional = [&](const char* key, Eigen::Index rows, Eigen::Index cols) {
    if (doc.contains(key)) {
      return detail::matrix_from_json(doc.at(key), key);
    }
    return Matrix(Matrix::Zero(rows, cols));
  };
  p.D11 = optional("D11", p.C1.rows(), p.B1.cols());
  p.D12 = optional("D12", p.C1.rows(), p.B2.cols());
  p.D21 = optional("D21", p.C2.rows(), p.B1.cols());
  p.D22 = optional("D22", p.C2.rows(), p.B2.cols());

  if (doc.contains("name")) {
    if (!doc.at("name").is_string()) {
      throw ParseError("load_plant: field \"name\" must be a string");
    }
    p.name = doc.at("name").get<std::string>();
  }
  validate(p);
  return p;
}

Plant load_plant_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("load_plant: cannot open " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    Plant p = load_plant(buffer.str());
    if (p.name.empty()) {
      p.name = path.stem().string();
    }
    return p;
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string serialize(const Plant& p) {
  validate(p);
  std::string out = "{\n";
  if (!p.name.empty()) {
    out += "  \"name\": " + nlohmann::json(p.name).dump() + ",\n";
  }
  const std::pair<const char*, const Matrix*> blocks[] = {
      {"A", &p.A},     {"B1", &p.B1},   {"B2", &p.B2},   {"C1", &p.C1},  {"C2", &p.C2},
      {"D11", &p.D11}, {"D12", &p.D12}, {"D21", &p.D21}, {"D22", &p.D22}};
  for (std::size_t i = 0; i < std::size(blocks); ++i) {
    out += "  \"" + std::string(blocks[i].first) + "\": " + detail::matrix_text(*blocks[i].second);
    out += (i + 1 < std::size(blocks)) ? ",\n" : "\n";
  }
  out += "}\n";
  return out;
}

void save_plant_file(const Plant& p, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error("save_plant_file: cannot open " + path.string());
  }
  out << serialize(p);
}

}  // namespace fosyn
