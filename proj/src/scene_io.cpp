// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
#include "selfnerf/scene_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace selfnerf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string frame_name(int t) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d", t);
  return buf;
}

Mat3 parse_mat3(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw ValidationError(what + ": expected 3x3 matrix");
  Mat3 m;
  for (int r = 0; r < 3; ++r) {
    if (!j[r].is_array() || j[r].size() != 3) throw ValidationError(what + ": expected 3x3 matrix");
    for (int c = 0; c < 3; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

void parse_w2c(const json& j, Mat3& R, Vec3& t, const std::string& what) {
  if (!j.is_array() || (j.size() != 3 && j.size() != 4))
    throw ValidationError(what + ": expected 3x4 or 4x4 matrix");
  for (int r = 0; r < 3; ++r) {
    if (!j[r].is_array() || j[r].size() != 4) throw ValidationError(what + ": expected rows of 4");
    for (int c = 0; c < 3; ++c) R(r, c) = j[r][c].get<double>();
    t[r] = j[r][3].get<double>();
  }
}

json mat3_to_json(const Mat3& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
  return rows;
}

json w2c_to_json(const Mat3& R, const Vec3& t) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({R(r, 0), R(r, 1), R(r, 2), t[r]});
  rows.push_back({0.0, 0.0, 0.0, 1.0});
  return rows;
}

Image binarize_mask(Image mask, int t) {
  if (mask.channels == 3) {
    for (std::size_t p = 0; p < mask.pixel_count(); ++p) {
      double a = mask.data[3 * p], b = mask.data[3 * p + 1], c = mask.data[3 * p + 2];
      if (std::abs(a - b) > 1e-9 || std::abs(a - c) > 1e-9)
        throw ValidationError("non-binary mask at frame " + std::to_string(t) +
                              " (color channels disagree)");
    }
    Image gray(mask.width, mask.height, 1);
    for (std::size_t p = 0; p < mask.pixel_count(); ++p) gray.data[p] = mask.data[3 * p];
    mask = std::move(gray);
  }
  bool warned = false;
  for (double& v : mask.data) {
    if (v != 0.0 && v != 1.0) {
      if (!warned) {
        std::fprintf(stderr, "warning: mask at frame %d is not binary, thresholding at 0.5\n", t);
        warned = true;
      }
      v = v >= 0.5 ? 1.0 : 0.0;
    }
  }
  return mask;
}

}  // namespace

PixelRect mask_bbox(const Image& mask) {
  PixelRect r{mask.width, mask.height, -1, -1};
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask.at(x, y, 0) != 0.0) {
        r.x0 = std::min(r.x0, x);
        r.y0 = std::min(r.y0, y);
        r.x1 = std::max(r.x1, x);
        r.y1 = std::max(r.y1, y);
      }
  if (r.x1 < r.x0) throw ValidationError("mask_bbox: empty mask");
  return r;
}

Aabb Dataset::canonical_bounds() const {
  Aabb box;
  for (const Vec3& p : canonical.points) box.expand(p);
  return box;
}

void save_ply(const std::string& path, const std::vector<Vec3>& points,
              const std::vector<Vec3>& normals) {
  if (points.size() != normals.size()) throw ValidationError("save_ply: point/normal count mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open for write: " + path);
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << points.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property float nx\nproperty float ny\nproperty float nz\n"
      << "end_header\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    float v[6] = {float(points[i][0]), float(points[i][1]), float(points[i][2]),
                  float(normals[i][0]), float(normals[i][1]), float(normals[i][2])};
    out.write(reinterpret_cast<const char*>(v), sizeof(v));
  }
}

void load_ply(const std::string& path, std::vector<Vec3>& points, std::vector<Vec3>& normals) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("missing file: " + path);
  std::string line;
  if (!std::getline(in, line) || line.substr(0, 3) != "ply")
    throw ValidationError("not a PLY file: " + path);

  bool binary = false;
  std::size_t vertex_count = 0;
  struct Prop {
    std::string name;
    int bytes;  // 4 = float, 8 = double
  };
  std::vector<Prop> props;
  bool in_vertex_element = false;

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok == "comment") continue;
    if (tok == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt == "binary_little_endian") binary = true;
      else if (fmt == "ascii") binary = false;
      else throw ValidationError("unsupported PLY format in " + path);
    } else if (tok == "element") {
      std::string name;
      std::size_t count;
      ss >> name >> count;
      if (name == "vertex") {
        vertex_count = count;
        in_vertex_element = true;
      } else {
        if (vertex_count == 0)
          throw ValidationError("PLY element before vertex data unsupported: " + path);
        in_vertex_element = false;  // trailing elements (e.g. faces) are ignored
      }
    } else if (tok == "property") {
      if (!in_vertex_element) continue;
      std::string type, name;
      ss >> type >> name;
      if (type == "list") throw ValidationError("PLY list property in vertex element: " + path);
      int bytes = (type == "float" || type == "float32") ? 4
                : (type == "double" || type == "float64") ? 8
                : -1;
      if (bytes < 0) throw ValidationError("unsupported PLY property type '" + type + "': " + path);
      props.push_back({name, bytes});
    } else if (tok == "end_header") {
      break;
    }
  }
  if (vertex_count == 0) throw ValidationError("PLY has no vertices: " + path);

  int slot[6];  // property index of x y z nx ny nz
  const char* wanted[6] = {"x", "y", "z", "nx", "ny", "nz"};
  for (int w = 0; w < 6; ++w) {
    slot[w] = -1;
    for (std::size_t p = 0; p < props.size(); ++p)
      if (props[p].name == wanted[w]) slot[w] = static_cast<int>(p);
    if (slot[w] < 0)
      throw ValidationError(std::string("PLY missing property '") + wanted[w] + "': " + path);
  }

  points.resize(vertex_count);
  normals.resize(vertex_count);
  std::vector<double> row(props.size());
  for (std::size_t i = 0; i < vertex_count; ++i) {
    if (binary) {
      for (std::size_t p = 0; p < props.size(); ++p) {
        if (props[p].bytes == 4) {
          float f;
          in.read(reinterpret_cast<char*>(&f), 4);
          row[p] = f;
        } else {
          in.read(reinterpret_cast<char*>(&row[p]), 8);
        }
      }
    } else {
      for (std::size_t p = 0; p < props.size(); ++p) in >> row[p];
    }
    if (!in) throw ValidationError("PLY truncated at vertex " + std::to_string(i) + ": " + path);
    points[i] = Vec3(row[slot[0]], row[slot[1]], row[slot[2]]);
    normals[i] = Vec3(row[slot[3]], row[slot[4]], row[slot[5]]);
  }
}

Dataset load_dataset(const std::string& path) {
  const fs::path root(path);
  const fs::path cam_path = root / "cameras.json";
  std::ifstream cam_in(cam_path);
  if (!cam_in) throw ValidationError("missing file: " + cam_path.string());
  json doc;
  try {
    cam_in >> doc;
  } catch (const json::exception& e) {
    throw ValidationError("cameras.json parse error: " + std::string(e.what()));
  }
  if (!doc.contains("frames") || !doc["frames"].is_array() || doc["frames"].empty())
    throw ValidationError("cameras.json: missing or empty 'frames' array");

  Dataset ds;
  if (doc.contains("metadata")) {
    const json& m = doc["metadata"];
    if (m.contains("units")) ds.metadata.units = m["units"].get<std::string>();
    if (m.contains("frame_rate")) ds.metadata.frame_rate = m["frame_rate"].get<double>();
  }

  std::vector<Vec3> cn, cnn;
  load_ply((root / "canonical.ply").string(), cn, cnn);
  ds.canonical.points = cn;
  const std::size_t vertex_count = cn.size();

  const int n_frames = static_cast<int>(doc["frames"].size());
  ds.frames.resize(n_frames);
  for (int t = 0; t < n_frames; ++t) {
    DatasetFrame& fr = ds.frames[t];
    const json& jf = doc["frames"][t];
    const std::string at = " at frame " + std::to_string(t);

    fr.camera.K = parse_mat3(jf.at("K"), "cameras.json K" + at);
    parse_w2c(jf.at("w2c"), fr.camera.R, fr.camera.t, "cameras.json w2c" + at);
    fr.camera.width = jf.at("width").get<int>();
    fr.camera.height = jf.at("height").get<int>();
    try {
      fr.camera.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(std::string(e.what()) + at);
    }

    fr.image = load_png((root / "frames" / (frame_name(t) + ".png")).string());
    if (fr.image.channels != 3) throw ValidationError("expected RGB image" + at);
    fr.mask = binarize_mask(load_png((root / "masks" / (frame_name(t) + ".png")).string()), t);

    if (fr.image.width != fr.camera.width || fr.image.height != fr.camera.height ||
        fr.mask.width != fr.image.width || fr.mask.height != fr.image.height ||
        fr.image.width != ds.frames[0].image.width || fr.image.height != ds.frames[0].image.height)
      throw ValidationError("size mismatch" + at);

    bool any_mask = false;
    for (double v : fr.mask.data) any_mask = any_mask || v != 0.0;
    if (!any_mask) throw ValidationError("empty mask" + at);

    std::vector<Vec3> pts, nrm;
    load_ply((root / "surface" / (frame_name(t) + ".ply")).string(), pts, nrm);
    if (pts.size() != vertex_count) throw ValidationError("vertex-count mismatch" + at);
    for (std::size_t i = 0; i < nrm.size(); ++i) {
      double len = nrm[i].norm();
      if (std::abs(len - 1.0) > 1e-3)
        throw ValidationError("non-unit normal at vertex " + std::to_string(i) + at);
      nrm[i] /= len;  // absorb f32 quantization
    }
    fr.surface.points = std::move(pts);
    fr.surface.normals = std::move(nrm);
    fr.surface.frame_index = t;
    fr.surface.validate();
  }
  return ds;
}

void write_cameras_json(const std::string& path, const std::vector<Camera>& cams,
                        const DatasetMetadata& meta) {
  json doc;
  doc["metadata"] = {{"units", meta.units}, {"frame_rate", meta.frame_rate}};
  doc["frames"] = json::array();
  for (const Camera& c : cams)
    doc["frames"].push_back({{"width", c.width},
                             {"height", c.height},
                             {"K", mat3_to_json(c.K)},
                             {"w2c", w2c_to_json(c.R, c.t)}});
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for write: " + path);
  out << doc.dump(1) << "\n";
}

}  // namespace selfnerf
