// SPDX-License-Identifier: Apache-2.0
#include "nerfcc/manifest.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

namespace nerfcc {

using json = nlohmann::json;

void DatasetManifest::validate() const {
  if (images.empty()) throw DataError("manifest lists no images");
  for (const ManifestImage& im : images) {
    if (im.path.empty()) throw DataError("manifest image with empty path");
    im.camera.validate();
  }
  const int n = static_cast<int>(images.size());
  for (const OverlapPair& ov : overlaps) {
    if (ov.i < 0 || ov.i >= n || ov.j < 0 || ov.j >= n || ov.i == ov.j)
      throw DataError("overlap pair indices out of range");
    if (ov.mask_path.empty()) throw DataError("overlap pair with empty mask path");
  }
}

std::string DatasetManifest::resolve(const std::string& relative_path) const {
  std::filesystem::path p(relative_path);
  if (p.is_absolute() || base_dir.empty()) return relative_path;
  return (std::filesystem::path(base_dir) / p).string();
}

std::vector<double> lighting_to_flat(const SHLighting& l) {
  std::vector<double> v;
  v.reserve(kShCoeffs * 3);
  for (int k = 0; k < kShCoeffs; ++k)
    for (int c = 0; c < 3; ++c) v.push_back(l.coeff[k][c]);
  return v;
}

SHLighting lighting_from_flat(const std::vector<double>& v) {
  if (v.size() != kShCoeffs * 3) throw DataError("lighting must have 27 numbers");
  SHLighting l;
  for (int k = 0; k < kShCoeffs; ++k)
    for (int c = 0; c < 3; ++c) l.coeff[k][c] = v[k * 3 + c];
  return l;
}

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    if (!ok) throw DataError("unknown manifest key '" + key + "' in " + where);
  }
}

double num(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw DataError(std::string("missing manifest key '") + key + "' in " + where);
  if (!j[key].is_number()) throw DataError(std::string("manifest key '") + key + "' must be a number in " + where);
  return j[key].get<double>();
}

}  // namespace

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("manifest is not valid JSON: " + path + ": " + e.what());
  }
  if (!j.is_object()) throw DataError("manifest root must be an object: " + path);
  reject_unknown(j, {"seed", "images", "overlaps"}, path);

  DatasetManifest m;
  m.base_dir = std::filesystem::path(path).parent_path().string();
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw DataError("seed must be a non-negative integer: " + path);
    m.seed = j["seed"].get<uint64_t>();
  }
  if (!j.contains("images") || !j["images"].is_array())
    throw DataError("manifest needs an 'images' array: " + path);

  for (const json& ij : j["images"]) {
    const std::string where = path + " images[" + std::to_string(m.images.size()) + "]";
    if (!ij.is_object()) throw DataError("image entries must be objects in " + where);
    reject_unknown(ij,
                   {"path", "width", "height", "fx", "fy", "cx", "cy", "near", "far", "pose",
                    "lighting"},
                   where);
    ManifestImage im;
    if (!ij.contains("path") || !ij["path"].is_string())
      throw DataError("image entry needs a string 'path' in " + where);
    im.path = ij["path"].get<std::string>();
    im.camera.width = static_cast<int>(num(ij, "width", where));
    im.camera.height = static_cast<int>(num(ij, "height", where));
    im.camera.fx = num(ij, "fx", where);
    im.camera.fy = num(ij, "fy", where);
    im.camera.cx = num(ij, "cx", where);
    im.camera.cy = num(ij, "cy", where);
    im.camera.near = num(ij, "near", where);
    im.camera.far = num(ij, "far", where);
    if (!ij.contains("pose") || !ij["pose"].is_array() || ij["pose"].size() != 12)
      throw DataError("image entry needs a 12-number 'pose' in " + where);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) im.camera.rotation(r, c) = ij["pose"][r * 3 + c].get<double>();
    for (int r = 0; r < 3; ++r) im.camera.translation[r] = ij["pose"][9 + r].get<double>();
    if (ij.contains("lighting")) {
      if (!ij["lighting"].is_array() || ij["lighting"].size() != kShCoeffs * 3)
        throw DataError("lighting must have 27 numbers in " + where);
      std::vector<double> flat;
      for (const json& v : ij["lighting"]) flat.push_back(v.get<double>());
      im.lighting = lighting_from_flat(flat);
    }
    m.images.push_back(std::move(im));
  }

  if (j.contains("overlaps")) {
    if (!j["overlaps"].is_array()) throw DataError("overlaps must be an array: " + path);
    for (const json& oj : j["overlaps"]) {
      const std::string where = path + " overlaps[" + std::to_string(m.overlaps.size()) + "]";
      if (!oj.is_object()) throw DataError("overlap entries must be objects in " + where);
      reject_unknown(oj, {"i", "j", "mask"}, where);
      OverlapPair ov;
      ov.i = static_cast<int>(num(oj, "i", where));
      ov.j = static_cast<int>(num(oj, "j", where));
      if (!oj.contains("mask") || !oj["mask"].is_string())
        throw DataError("overlap entry needs a string 'mask' in " + where);
      ov.mask_path = oj["mask"].get<std::string>();
      m.overlaps.push_back(std::move(ov));
    }
  }

  m.validate();
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
  manifest.validate();
  json j;
  j["seed"] = manifest.seed;
  j["images"] = json::array();
  for (const ManifestImage& im : manifest.images) {
    json ij;
    ij["path"] = im.path;
    ij["width"] = im.camera.width;
    ij["height"] = im.camera.height;
    ij["fx"] = im.camera.fx;
    ij["fy"] = im.camera.fy;
    ij["cx"] = im.camera.cx;
    ij["cy"] = im.camera.cy;
    ij["near"] = im.camera.near;
    ij["far"] = im.camera.far;
    json pose = json::array();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) pose.push_back(im.camera.rotation(r, c));
    for (int r = 0; r < 3; ++r) pose.push_back(im.camera.translation[r]);
    ij["pose"] = std::move(pose);
    if (im.lighting) ij["lighting"] = lighting_to_flat(*im.lighting);
    j["images"].push_back(std::move(ij));
  }
  j["overlaps"] = json::array();
  for (const OverlapPair& ov : manifest.overlaps) {
    json oj;
    oj["i"] = ov.i;
    oj["j"] = ov.j;
    oj["mask"] = ov.mask_path;
    j["overlaps"].push_back(std::move(oj));
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace nerfcc
