#include "photocal/io.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "photocal/errors.hpp"

namespace photocal {

namespace {

template <class T>
T get(const Json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

Json pose_json(int id, const BoardPose& p) {
  Json j;
  j["image_id"] = id;
  j["quaternion"] = {p.q[0], p.q[1], p.q[2], p.q[3]};
  j["translation"] = {p.t[0], p.t[1], p.t[2]};
  return j;
}

BoardPose pose_from(const Json& j) {
  const auto q = get<std::vector<double>>(j, "quaternion");
  const auto t = get<std::vector<double>>(j, "translation");
  if (q.size() != 4 || t.size() != 3) throw ConfigError("pose needs 4 quaternion and 3 translation values");
  BoardPose p;
  std::copy(q.begin(), q.end(), p.q.begin());
  std::copy(t.begin(), t.end(), p.t.begin());
  return p;
}

Json size_json(ImageSize s) { return {{"width", s.width}, {"height", s.height}}; }

ImageSize size_from(const Json& j) { return {get<int>(j, "width"), get<int>(j, "height")}; }

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError(where + ": not a number '" + s + "'");
  }
  if (used != s.size()) throw ConfigError(where + ": not a number '" + s + "'");
  return v;
}

int parse_int(const std::string& s, const std::string& where) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError(where + ": not an integer '" + s + "'");
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Json to_json(const CameraIntrinsics& c) {
  Json j;
  j["camera_matrix"] = {{"fx", c.fx}, {"fy", c.fy}, {"x0", c.x0}, {"y0", c.y0}};
  j["distortion"] = {{"k1", c.k1}, {"k2", c.k2}, {"p1", c.p1}, {"p2", c.p2}};
  return j;
}

namespace {

CameraIntrinsics intrinsics_from(const Json& j) {
  const Json& k = j.at("camera_matrix");
  CameraIntrinsics c;
  c.fx = get<double>(k, "fx");
  c.fy = get<double>(k, "fy");
  c.x0 = get<double>(k, "x0");
  c.y0 = get<double>(k, "y0");
  if (j.contains("distortion")) {
    const Json& d = j.at("distortion");
    c.k1 = get<double>(d, "k1");
    c.k2 = get<double>(d, "k2");
    c.p1 = get<double>(d, "p1");
    c.p2 = get<double>(d, "p2");
  }
  return c;
}

}  // namespace

Json to_json(const BoardSpec& b) {
  return {{"rows", b.rows},
          {"cols", b.cols},
          {"spacing", b.spacing},
          {"texture_kind", std::string(to_string(b.texture_kind))},
          {"margin", b.margin}};
}

BoardSpec board_from_json(const Json& j) {
  BoardSpec b;
  b.rows = get<int>(j, "rows");
  b.cols = get<int>(j, "cols");
  b.spacing = get<double>(j, "spacing");
  if (j.contains("texture_kind")) b.texture_kind = texture_kind_from_string(get<std::string>(j, "texture_kind"));
  if (j.contains("margin")) b.margin = get<double>(j, "margin");
  validate(b);
  return b;
}

Json to_json(const SolveReport& r) {
  Json j;
  j["iterations"] = r.iterations;
  j["accepted_steps"] = r.accepted_steps;
  j["initial_cost"] = r.initial_cost;
  j["final_cost"] = r.final_cost;
  j["termination"] = to_string(r.termination);
  j["cost_trace"] = r.cost_trace;
  j["failed_evaluations"] = r.failed_evaluations;
  j["global_condition"] = r.global_condition;
  j["warnings"] = r.warnings;
  return j;
}

Json to_json(const PerPixelErrorReport& r) {
  return {{"rms_px", r.rms_px},
          {"max_px", r.max_px},
          {"stride", r.stride},
          {"pixel_count", r.pixel_count},
          {"skipped_count", r.skipped_count}};
}

Json to_json(const TestsetReport& r) {
  Json imgs = Json::array();
  for (const auto& i : r.images) imgs.push_back({{"image_id", i.image_id}, {"rms_px", i.rms_px}});
  return {{"images", imgs}, {"mean_rms_px", r.aggregate.mean}, {"std_rms_px", r.aggregate.std}};
}

void write_estimate(Json& j, const CalibrationEstimate& e) {
  const Json k = to_json(e.intrinsics);
  j["camera_matrix"] = k["camera_matrix"];
  j["distortion"] = k["distortion"];
  Json poses = Json::array();
  for (std::size_t i = 0; i < e.poses.size(); ++i) poses.push_back(pose_json(static_cast<int>(i), e.poses[i]));
  j["poses"] = poses;
  Json sigmas = Json::array();
  for (std::size_t i = 0; i < e.sigmas.size(); ++i) {
    for (std::size_t p = 0; p < e.sigmas[i].size(); ++p) {
      sigmas.push_back({{"image_id", i}, {"point_index", p}, {"sigma_px", e.sigmas[i][p]}});
    }
  }
  j["sigmas"] = sigmas;
}

CalibrationEstimate read_estimate(const Json& j) {
  CalibrationEstimate e;
  if (!j.contains("camera_matrix")) throw ConfigError("calibration: missing field 'camera_matrix'");
  e.intrinsics = intrinsics_from(j);
  if (j.contains("poses")) {
    std::map<int, BoardPose> poses;
    for (const auto& p : j.at("poses")) poses[get<int>(p, "image_id")] = pose_from(p);
    int expect = 0;
    for (const auto& [id, pose] : poses) {
      if (id != expect++) throw ConfigError("calibration: pose image ids must be 0..n-1");
      e.poses.push_back(pose);
    }
  }
  if (j.contains("sigmas") && !j.at("sigmas").empty()) {
    int max_point = -1;
    for (const auto& s : j.at("sigmas")) max_point = std::max(max_point, get<int>(s, "point_index"));
    e.sigmas.assign(e.poses.size(), std::vector<double>(max_point + 1, 1.0));
    for (const auto& s : j.at("sigmas")) {
      const int i = get<int>(s, "image_id");
      const int p = get<int>(s, "point_index");
      if (i < 0 || i >= static_cast<int>(e.poses.size()) || p < 0) {
        throw ConfigError("calibration: sigma entry refers to a missing image");
      }
      e.sigmas[i][p] = get<double>(s, "sigma_px");
    }
  }
  return e;
}

void write_calibration(const std::string& path, const CalibrationFile& f) {
  Json j;
  write_estimate(j, f.estimate);
  j["solver_report"] = f.solver_report;
  if (f.initial) {
    Json init;
    write_estimate(init, *f.initial);
    j["initial"] = init;
  }
  if (f.board) j["board"] = to_json(*f.board);
  if (f.image_size) j["image_size"] = size_json(*f.image_size);
  write_json(path, j);
}

CalibrationFile read_calibration(const std::string& path) {
  const Json j = read_json(path);
  CalibrationFile f;
  try {
    f.estimate = read_estimate(j);
    if (j.contains("initial")) f.initial = read_estimate(j.at("initial"));
    if (j.contains("board")) f.board = board_from_json(j.at("board"));
    if (j.contains("image_size")) f.image_size = size_from(j.at("image_size"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (j.contains("solver_report")) f.solver_report = j.at("solver_report");
  return f;
}

void write_manifest(const std::string& path, const Manifest& m) {
  Json j;
  j["image_size"] = size_json(m.image_size);
  j["board"] = to_json(m.board);
  j["intrinsics"] = to_json(m.intrinsics);
  j["blur_sigma"] = m.blur_sigma;
  j["noise_sigma"] = m.noise_sigma;
  j["render_sigma"] = m.render_sigma;
  j["intensity_range"] = {m.intensity_low, m.intensity_high};
  j["corner_noise"] = m.corner_noise;
  j["seed"] = m.seed;
  j["corners_csv"] = m.corners_csv;
  Json imgs = Json::array();
  for (const auto& im : m.images) {
    Json e = pose_json(im.id, im.pose);
    e["path"] = im.path;
    Json cs = Json::array();
    for (const auto& c : im.corners) cs.push_back({c.x, c.y});
    e["corners"] = cs;
    imgs.push_back(e);
  }
  j["images"] = imgs;
  write_json(path, j);
}

Manifest read_manifest(const std::string& path) {
  const Json j = read_json(path);
  Manifest m;
  try {
    m.image_size = size_from(j.at("image_size"));
    m.board = board_from_json(j.at("board"));
    m.intrinsics = intrinsics_from(j.at("intrinsics"));
    m.blur_sigma = j.value("blur_sigma", 0.0);
    m.noise_sigma = j.value("noise_sigma", 0.0);
    m.render_sigma = j.value("render_sigma", 0.0);
    if (j.contains("intensity_range")) {
      m.intensity_low = j["intensity_range"].at(0).get<double>();
      m.intensity_high = j["intensity_range"].at(1).get<double>();
    }
    m.corner_noise = j.value("corner_noise", 0.0);
    m.seed = j.value("seed", 0ULL);
    m.corners_csv = j.value("corners_csv", std::string());
    for (const auto& e : j.at("images")) {
      ManifestImage im;
      im.id = get<int>(e, "image_id");
      im.path = get<std::string>(e, "path");
      im.pose = pose_from(e);
      if (e.contains("corners")) {
        for (const auto& c : e.at("corners")) im.corners.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
      }
      m.images.push_back(std::move(im));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  std::sort(m.images.begin(), m.images.end(),
            [](const ManifestImage& a, const ManifestImage& b) { return a.id < b.id; });
  return m;
}

CalibrationEstimate manifest_estimate(const Manifest& m) {
  CalibrationEstimate e;
  e.intrinsics = m.intrinsics;
  for (const auto& im : m.images) e.poses.push_back(im.pose);
  return e;
}

void write_corners_csv(const std::string& path, const std::vector<ImageCorners>& corners,
                       const BoardSpec& board) {
  std::string out = "image_id,point_index,board_u,board_v,pixel_x,pixel_y\n";
  for (const auto& img : corners) {
    for (const auto& c : img.corners) {
      const auto uv = board.interest_point(c.point_index);
      out += std::to_string(img.image_id) + ',' + std::to_string(c.point_index) + ',' +
             format_double(uv[0]) + ',' + format_double(uv[1]) + ',' + format_double(c.pixel.x) +
             ',' + format_double(c.pixel.y) + '\n';
    }
  }
  write_text(path, out);
}

std::vector<ImageCorners> read_corners_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty corner file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line, ',');
  std::map<std::string, int> col;
  for (std::size_t k = 0; k < header.size(); ++k) col[header[k]] = static_cast<int>(k);
  for (const char* name : {"image_id", "point_index", "pixel_x", "pixel_y"}) {
    if (!col.count(name)) throw ConfigError(path + ": missing column '" + name + "'");
  }
  std::map<int, std::map<int, PixelPoint>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line, ',');
    const std::string where = path + ":" + std::to_string(lineno);
    if (f.size() != header.size()) throw ConfigError(where + ": wrong number of fields");
    const int id = parse_int(f[col["image_id"]], where);
    const int pt = parse_int(f[col["point_index"]], where);
    if (rows[id].count(pt)) throw ConfigError(where + ": duplicate corner");
    rows[id][pt] = {parse_double(f[col["pixel_x"]], where), parse_double(f[col["pixel_y"]], where)};
  }
  std::vector<ImageCorners> out;
  for (const auto& [id, pts] : rows) {
    ImageCorners ic;
    ic.image_id = id;
    for (const auto& [pt, px] : pts) ic.corners.push_back({pt, px});
    out.push_back(std::move(ic));
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

void write_json(const std::string& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace photocal
