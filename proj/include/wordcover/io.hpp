#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wordcover/cover.hpp"
#include "wordcover/errors.hpp"
#include "wordcover/persistence.hpp"
#include "wordcover/space.hpp"

namespace wordcover {

using nlohmann::json;

/// 17 significant digits: enough for exact double round-trips.
inline std::string format_double17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline json space_to_json(const SpaceSpec& spec) {
  return json{{"name", spec.name()},
              {"dim_m", spec.dim_m},
              {"antipodal_dim", spec.antipodal_dim},
              {"c_m", spec.c_m},
              {"v_m", spec.v_m},
              {"diameter", spec.diameter},
              {"injectivity_radius", spec.injectivity_radius},
              {"ambient_dim", spec.ambient_dim}};
}

inline SpaceSpec space_from_json(const json& j) {
  SpaceOverrides ov;
  ov.c_m = j.at("c_m").get<double>();
  ov.v_m = j.at("v_m").get<double>();
  ov.antipodal_dim = j.at("antipodal_dim").get<int>();
  return make_space(j.at("name").get<std::string>(), ov);
}

inline std::string meta_path_for(const std::string& csv_path) {
  return csv_path + ".meta.json";
}

/// Writes the cloud as CSV (one row per point, ambient coordinates, 17
/// significant digits) plus a sibling <path>.meta.json header carrying the
/// SpaceSpec and provenance.
inline void write_cloud_csv(const std::string& path, const PointCloud& cloud) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const Point& p : cloud.points) {
    for (Eigen::Index i = 0; i < p.coords.size(); ++i) {
      if (i) out << ',';
      out << format_double17(p.coords[i]);
    }
    out << '\n';
  }
  out.close();

  json meta;
  meta["schema_version"] = 1;
  meta["space"] = space_to_json(cloud.space);
  json base = json::array();
  for (Eigen::Index i = 0; i < cloud.provenance.base_point.coords.size(); ++i)
    base.push_back(cloud.provenance.base_point.coords[i]);
  meta["provenance"] = json{{"seed", cloud.provenance.seed},
                            {"k", cloud.provenance.k},
                            {"ell", cloud.provenance.ell},
                            {"base_point", base},
                            {"dedup_tolerance", cloud.provenance.dedup_tolerance},
                            {"capped", cloud.provenance.capped}};
  meta["count"] = cloud.points.size();
  std::ofstream mout(meta_path_for(path));
  if (!mout) throw IoError("cannot open for writing: " + meta_path_for(path));
  mout << meta.dump(2) << '\n';
}

inline PointCloud read_cloud_csv(const std::string& path) {
  std::ifstream meta_in(meta_path_for(path));
  if (!meta_in)
    throw IoError("missing cloud header: " + meta_path_for(path));
  json meta;
  try {
    meta_in >> meta;
  } catch (const json::exception& e) {
    throw IoError("bad cloud header " + meta_path_for(path) + ": " + e.what());
  }

  PointCloud cloud;
  cloud.space = space_from_json(meta.at("space"));
  const json& prov = meta.at("provenance");
  cloud.provenance.seed = prov.at("seed").get<std::uint64_t>();
  cloud.provenance.k = prov.at("k").get<long long>();
  cloud.provenance.ell = prov.at("ell").get<long long>();
  cloud.provenance.dedup_tolerance = prov.at("dedup_tolerance").get<double>();
  cloud.provenance.capped = prov.at("capped").get<bool>();
  const auto& base = prov.at("base_point");
  cloud.provenance.base_point.coords.resize(base.size());
  for (std::size_t i = 0; i < base.size(); ++i)
    cloud.provenance.base_point.coords[i] = base[i].get<double>();

  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Point p;
    p.coords.resize(cloud.space.ambient_dim);
    std::stringstream ss(line);
    std::string cell;
    int got = 0;
    while (std::getline(ss, cell, ',')) {
      if (got >= cloud.space.ambient_dim)
        throw IoError(path + ":" + std::to_string(lineno) +
                      ": too many columns");
      p.coords[got++] = std::stod(cell);
    }
    if (got != cloud.space.ambient_dim)
      throw IoError(path + ":" + std::to_string(lineno) + ": expected " +
                    std::to_string(cloud.space.ambient_dim) + " columns");
    if (!on_manifold(cloud.space, p, 1e-9))
      throw IoError(path + ":" + std::to_string(lineno) +
                    ": point is not on the manifold");
    cloud.points.push_back(std::move(p));
  }
  if (meta.contains("count") &&
      meta["count"].get<std::size_t>() != cloud.points.size())
    throw IoError(path + ": row count disagrees with header");
  return cloud;
}

/// Diagram files: CSV rows (degree, birth, death) with an "inf" token.
inline void write_diagram_csv(const std::string& path,
                              const PersistenceDiagram& d) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "degree,birth,death\n";
  for (const auto& bar : d.bars) {
    out << bar.degree << ',' << format_double17(bar.birth) << ',';
    if (std::isinf(bar.death))
      out << "inf";
    else
      out << format_double17(bar.death);
    out << '\n';
  }
}

inline PersistenceDiagram read_diagram_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  PersistenceDiagram d;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("degree", 0) == 0) continue;
    }
    std::stringstream ss(line);
    std::string deg, birth, death;
    std::getline(ss, deg, ',');
    std::getline(ss, birth, ',');
    std::getline(ss, death, ',');
    PersistenceDiagram::Bar bar;
    bar.degree = std::stoi(deg);
    bar.birth = std::stod(birth);
    bar.death = (death == "inf") ? kInfDeath : std::stod(death);
    d.bars.push_back(bar);
  }
  return d;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << text;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace wordcover
