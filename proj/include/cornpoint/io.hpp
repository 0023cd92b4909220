#pragma once

// File formats: instance masks as 8-bit single-channel PNG (pixel value =
// instance label), depth as 16-bit single-channel PNG in integer
// millimeters (0 = invalid), and scene truth / frame metadata / reports as
// JSON with a schema_version field. Synthetic exports and ingested real
// recordings use exactly the same formats.

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cornpoint/geometry.hpp"
#include "cornpoint/render.hpp"
#include "cornpoint/scene.hpp"
#include "cornpoint/select.hpp"
#include "cornpoint/insertion.hpp"

namespace cornpoint::io {

using json = nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] inline void png_error_fn(png_structp png, png_const_charp msg) {
  (void)png;
  throw Error(Errc::Data, std::string("png: ") + (msg ? msg : "error"));
}

inline void png_warn_fn(png_structp, png_const_charp) {}

inline void write_gray_png(const std::string& path, int width, int height,
                           int bit_depth, const unsigned char* data,
                           std::size_t row_bytes) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw Error(Errc::Io, "cannot open for write: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            png_error_fn, png_warn_fn);
  if (!png) throw Error(Errc::Io, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(Errc::Io, "png_create_info_struct failed");
  }
  try {
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, width, height, bit_depth, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16) png_set_swap(png);  // buffers are host little-endian
    std::vector<png_bytep> rows(height);
    for (int v = 0; v < height; ++v)
      rows[v] = const_cast<png_bytep>(data + v * row_bytes);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
}

struct GrayImage {
  int width = 0;
  int height = 0;
  int bit_depth = 0;
  std::vector<unsigned char> data;  // row-major, native endianness for 16-bit
};

inline GrayImage read_gray_png(const std::string& path, int expected_bit_depth) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw Error(Errc::Io, "cannot open for read: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                           png_error_fn, png_warn_fn);
  if (!png) throw Error(Errc::Io, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error(Errc::Io, "png_create_info_struct failed");
  }
  GrayImage img;
  try {
    png_init_io(png, fp.get());
    png_read_info(png, info);
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.bit_depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (color != PNG_COLOR_TYPE_GRAY || img.bit_depth != expected_bit_depth)
      throw Error(Errc::Data, "png: expected " + std::to_string(expected_bit_depth) +
                                  "-bit grayscale: " + path);
    if (img.bit_depth == 16) png_set_swap(png);
    const std::size_t row_bytes = png_get_rowbytes(png, info);
    img.data.resize(row_bytes * img.height);
    std::vector<png_bytep> rows(img.height);
    for (int v = 0; v < img.height; ++v) rows[v] = img.data.data() + v * row_bytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace detail

inline void write_mask_png(const std::string& path, int width, int height,
                           const std::vector<std::uint8_t>& labels) {
  detail::write_gray_png(path, width, height, 8, labels.data(),
                         static_cast<std::size_t>(width));
}

inline std::vector<std::uint8_t> read_mask_png(const std::string& path, int& width,
                                               int& height) {
  const auto img = detail::read_gray_png(path, 8);
  width = img.width;
  height = img.height;
  return {img.data.begin(), img.data.end()};
}

/// Depth is stored as integer millimeters (0 = invalid); quantization error
/// is at most 0.5 mm.
inline void write_depth_png(const std::string& path, int width, int height,
                            const std::vector<double>& depth_m) {
  std::vector<std::uint16_t> mm(depth_m.size());
  for (std::size_t i = 0; i < depth_m.size(); ++i) {
    const double d = depth_m[i];
    mm[i] = (d > 0.0 && std::isfinite(d))
                ? static_cast<std::uint16_t>(
                      std::min<long>(65535, std::lround(d * 1000.0)))
                : 0;
  }
  detail::write_gray_png(path, width, height, 16,
                         reinterpret_cast<const unsigned char*>(mm.data()),
                         static_cast<std::size_t>(width) * 2);
}

inline std::vector<double> read_depth_png(const std::string& path, int& width,
                                          int& height) {
  const auto img = detail::read_gray_png(path, 16);
  width = img.width;
  height = img.height;
  const auto* mm = reinterpret_cast<const std::uint16_t*>(img.data.data());
  std::vector<double> depth(static_cast<std::size_t>(width) * height);
  for (std::size_t i = 0; i < depth.size(); ++i)
    depth[i] = mm[i] == 0 ? 0.0 : mm[i] / 1000.0;
  return depth;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline json to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

inline Vec3 vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(Errc::Data, "json: expected [x,y,z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json to_json(const Mat3& m) {
  json a = json::array();
  for (double x : m.m) a.push_back(x);
  return a;
}

inline Mat3 mat3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 9)
    throw Error(Errc::Data, "json: expected 9-element row-major matrix");
  Mat3 m;
  for (int i = 0; i < 9; ++i) m.m[i] = j[i].get<double>();
  return m;
}

inline json to_json(const Pose3& p) {
  return {{"rotation", to_json(p.rotation)}, {"translation", to_json(p.translation)}};
}

inline Pose3 pose_from_json(const json& j) {
  return {mat3_from_json(j.at("rotation")), vec3_from_json(j.at("translation"))};
}

inline json to_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy},
          {"width", k.width}, {"height", k.height}};
}

inline CameraIntrinsics intrinsics_from_json(const json& j) {
  CameraIntrinsics k;
  k.fx = j.at("fx").get<double>();
  k.fy = j.at("fy").get<double>();
  k.cx = j.at("cx").get<double>();
  k.cy = j.at("cy").get<double>();
  k.width = j.at("width").get<int>();
  k.height = j.at("height").get<int>();
  return k;
}

inline json to_json(const SceneTruth& scene) {
  json stalks = json::array();
  for (const auto& s : scene.stalks) {
    stalks.push_back({{"axis_point", to_json(s.axis.point)},
                      {"axis_direction", to_json(s.axis.direction)},
                      {"semi_axis_a", s.section.a},
                      {"semi_axis_b", s.section.b},
                      {"orientation", s.section.orientation},
                      {"base_z", s.base_z},
                      {"top_z", s.top_z},
                      {"pith_top_z", s.pith_top_z},
                      {"stiffness", s.stiffness}});
  }
  json leaves = json::array();
  for (const auto& l : scene.leaves) {
    json corners = json::array();
    for (const auto& c : l.corners) corners.push_back(to_json(c));
    leaves.push_back({{"corners", corners},
                      {"stalk", l.stalk_index},
                      {"cover_fraction", l.cover_fraction}});
  }
  json terrain = json::array();
  for (const auto& c : scene.terrain.components)
    terrain.push_back(
        {{"amplitude", c.amplitude}, {"kx", c.kx}, {"ky", c.ky}, {"phase", c.phase}});
  return {{"schema_version", kSchemaVersion},
          {"row_spacing", scene.row_spacing},
          {"rng_seed", scene.rng_seed},
          {"terrain", terrain},
          {"stalks", stalks},
          {"leaves", leaves}};
}

inline SceneTruth scene_from_json(const json& j) {
  SceneTruth scene;
  scene.row_spacing = j.at("row_spacing").get<double>();
  scene.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  for (const auto& c : j.at("terrain"))
    scene.terrain.components.push_back({c.at("amplitude").get<double>(),
                                        c.at("kx").get<double>(),
                                        c.at("ky").get<double>(),
                                        c.at("phase").get<double>()});
  for (const auto& s : j.at("stalks")) {
    StalkTruth st;
    st.axis = {vec3_from_json(s.at("axis_point")),
               vec3_from_json(s.at("axis_direction"))};
    st.section = {s.at("semi_axis_a").get<double>(), s.at("semi_axis_b").get<double>(),
                  s.at("orientation").get<double>()};
    st.base_z = s.at("base_z").get<double>();
    st.top_z = s.at("top_z").get<double>();
    st.pith_top_z = s.at("pith_top_z").get<double>();
    st.stiffness = s.at("stiffness").get<double>();
    scene.stalks.push_back(st);
  }
  for (const auto& l : j.at("leaves")) {
    LeafQuad q;
    const auto& corners = l.at("corners");
    if (!corners.is_array() || corners.size() != 4)
      throw Error(Errc::Data, "json: leaf quad needs 4 corners");
    for (int i = 0; i < 4; ++i) q.corners[i] = vec3_from_json(corners[i]);
    q.stalk_index = l.at("stalk").get<int>();
    q.cover_fraction = l.at("cover_fraction").get<double>();
    scene.leaves.push_back(q);
  }
  return scene;
}

// ---------------------------------------------------------------------------
// Frame observations on disk: <stem>_mask.png + <stem>_depth.png +
// <stem>_meta.json
// ---------------------------------------------------------------------------

inline void save_frame(const std::filesystem::path& dir, const std::string& stem,
                       const FrameObservation& obs) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const std::string mask_name = stem + "_mask.png";
  const std::string depth_name = stem + "_depth.png";
  write_mask_png((dir / mask_name).string(), obs.width(), obs.height(), obs.masks);
  write_depth_png((dir / depth_name).string(), obs.width(), obs.height(), obs.depth);

  json meta = {{"schema_version", kSchemaVersion},
               {"mask", mask_name},
               {"depth", depth_name},
               {"intrinsics", to_json(obs.intrinsics)},
               {"cam_pose", to_json(obs.cam_pose)},
               {"confidences", obs.confidences},
               {"truth_ids", obs.truth_ids}};
  std::FILE* f = std::fopen((dir / (stem + "_meta.json")).string().c_str(), "wb");
  if (!f) throw Error(Errc::Io, "cannot write frame metadata for " + stem);
  const std::string text = meta.dump(2);
  std::fwrite(text.data(), 1, text.size(), f);
  std::fputc('\n', f);
  std::fclose(f);
}

inline json load_json_file(const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.string().c_str(), "rb");
  if (!f) throw Error(Errc::Io, "cannot open: " + path.string());
  std::string text;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, n);
  std::fclose(f);
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::Data, "malformed json: " + path.string());
  return j;
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw Error(Errc::Io, "cannot write: " + path.string());
  const std::string text = j.dump(2);
  std::fwrite(text.data(), 1, text.size(), f);
  std::fputc('\n', f);
  std::fclose(f);
}

inline FrameObservation load_frame(const std::filesystem::path& meta_path) {
  const json meta = load_json_file(meta_path);
  FrameObservation obs;
  try {
    const auto dir = meta_path.parent_path();
    obs.intrinsics = intrinsics_from_json(meta.at("intrinsics"));
    obs.cam_pose = pose_from_json(meta.at("cam_pose"));
    obs.confidences = meta.at("confidences").get<std::vector<double>>();
    if (meta.contains("truth_ids"))
      obs.truth_ids = meta.at("truth_ids").get<std::vector<int>>();

    int w = 0, h = 0;
    obs.masks = read_mask_png((dir / meta.at("mask").get<std::string>()).string(), w, h);
    if (w != obs.intrinsics.width || h != obs.intrinsics.height)
      throw Error(Errc::Data, "mask size does not match intrinsics");
    int wd = 0, hd = 0;
    obs.depth =
        read_depth_png((dir / meta.at("depth").get<std::string>()).string(), wd, hd);
    if (wd != w || hd != h) throw Error(Errc::Data, "depth size does not match mask");

    int max_label = 0;
    for (auto m : obs.masks) max_label = std::max<int>(max_label, m);
    if (max_label > obs.instance_count())
      throw Error(Errc::Data, "mask labels exceed confidence list");
  } catch (const json::exception& e) {
    throw Error(Errc::Data, std::string("frame metadata: ") + e.what());
  }
  return obs;
}

/// All frame metadata files in a directory, sorted by name: the ingestion
/// path for both synthetic exports and real recordings.
inline std::vector<std::filesystem::path> list_frame_metas(
    const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> metas;
  if (!std::filesystem::is_directory(dir))
    throw Error(Errc::Io, "not a directory: " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.size() > 10 && name.ends_with("_meta.json"))
      metas.push_back(entry.path());
  }
  std::sort(metas.begin(), metas.end());
  return metas;
}

// ---------------------------------------------------------------------------
// FSM table export
// ---------------------------------------------------------------------------

inline json fsm_table_to_json() {
  json rows = json::array();
  for (const auto& row : fsm_transition_table())
    rows.push_back({{"state", to_string(row.state)},
                    {"event", to_string(row.event)},
                    {"next", to_string(row.next)},
                    {"action", to_string(row.action)}});
  return {{"schema_version", kSchemaVersion}, {"transitions", rows}};
}

}  // namespace cornpoint::io
