#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "demoforge/error.hpp"
#include "demoforge/geom.hpp"
#include "demoforge/grasp.hpp"
#include "demoforge/retarget.hpp"

namespace demoforge::io {

using nlohmann::json;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write '" + tmp + "'");
    out << content;
    if (!out) throw Error(ErrorKind::IoError, "short write to '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

inline json parse_json(const std::string& text, const std::string& what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::ParseError, "invalid JSON in " + what);
  return j;
}

inline std::array<double, 7> pose_array_from_json(const json& arr, const std::string& what) {
  if (!arr.is_array() || arr.size() != 7) {
    throw Error(ErrorKind::ParseError, what + ": pose must be [x y z qw qx qy qz]");
  }
  std::array<double, 7> a;
  for (int i = 0; i < 7; ++i) a[i] = arr[i].get<double>();
  return a;
}

inline json pose_to_json(const geom::Pose& pose) {
  const auto a = pose.to_array();
  return json(a);
}

inline geom::Pose pose_from_json(const json& arr, const std::string& what) {
  return geom::Pose::from_array(pose_array_from_json(arr, what));
}

// --- part trajectories --------------------------------------------------

inline retarget::PartTrajectory parse_trajectory_json(const std::string& text, const std::string& what) {
  const json j = parse_json(text, what);
  retarget::PartTrajectory traj;
  if (!j.contains("part_id") || !j.contains("waypoints")) {
    throw Error(ErrorKind::ParseError, what + ": expected {part_id, frame, waypoints:[{t, pose}]}");
  }
  traj.part_id = j.at("part_id").get<std::string>();
  for (const json& rec : j.at("waypoints")) {
    retarget::Waypoint w;
    w.t = rec.at("t").get<double>();
    w.pose = pose_from_json(rec.at("pose"), what);
    traj.waypoints.push_back(w);
  }
  traj.validate();
  return traj;
}

inline retarget::PartTrajectory load_trajectory(const std::string& path) {
  return parse_trajectory_json(read_file(path), path);
}

inline std::string trajectory_to_json(const retarget::PartTrajectory& traj) {
  json j;
  j["part_id"] = traj.part_id;
  j["frame"] = "table";
  json wps = json::array();
  for (const auto& w : traj.waypoints) {
    wps.push_back({{"t", w.t}, {"pose", pose_to_json(w.pose)}});
  }
  j["waypoints"] = std::move(wps);
  return j.dump(2) + "\n";
}

// --- hand tracks ----------------------------------------------------------

inline geom::Vec3 vec3_from_json(const json& arr, const std::string& what) {
  if (!arr.is_array() || arr.size() != 3) throw Error(ErrorKind::ParseError, what + ": expected [x y z]");
  return geom::Vec3(arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>());
}

/// File is a JSON array of {t, index_tip, thumb_tip, hand}; frames are
/// grouped by the hand field.
inline std::map<std::string, grasp::HandTrack> parse_hand_tracks_json(const std::string& text,
                                                                      const std::string& what) {
  const json j = parse_json(text, what);
  if (!j.is_array()) throw Error(ErrorKind::ParseError, what + ": expected a JSON array of hand frames");
  std::map<std::string, grasp::HandTrack> tracks;
  for (const json& rec : j) {
    const std::string hand = rec.at("hand").get<std::string>();
    if (hand != "left" && hand != "right") {
      throw Error(ErrorKind::ParseError, what + ": hand must be \"left\" or \"right\"");
    }
    grasp::HandFrame frame;
    frame.t = rec.at("t").get<double>();
    frame.index_tip = vec3_from_json(rec.at("index_tip"), what);
    frame.thumb_tip = vec3_from_json(rec.at("thumb_tip"), what);
    auto& track = tracks[hand];
    track.hand_id = hand;
    track.frames.push_back(frame);
  }
  for (auto& [hand, track] : tracks) {
    (void)hand;
    track.validate();
  }
  return tracks;
}

inline std::map<std::string, grasp::HandTrack> load_hand_tracks(const std::string& path) {
  return parse_hand_tracks_json(read_file(path), path);
}

// --- point sets (PLY / OBJ) ---------------------------------------------

namespace detail {

struct PlyProperty {
  std::string name;
  std::string type;
};

inline std::size_t ply_type_size(const std::string& type) {
  if (type == "float" || type == "float32" || type == "int" || type == "int32" || type == "uint" ||
      type == "uint32") {
    return 4;
  }
  if (type == "double" || type == "float64") return 8;
  if (type == "uchar" || type == "uint8" || type == "char" || type == "int8") return 1;
  if (type == "short" || type == "int16" || type == "ushort" || type == "uint16") return 2;
  throw Error(ErrorKind::ParseError, "unsupported PLY property type '" + type + "'");
}

inline double read_scalar_le(const char*& cursor, const std::string& type) {
  auto take = [&cursor](auto value) {
    std::memcpy(&value, cursor, sizeof(value));
    cursor += sizeof(value);
    return static_cast<double>(value);
  };
  if (type == "float" || type == "float32") return take(float{});
  if (type == "double" || type == "float64") return take(double{});
  if (type == "uchar" || type == "uint8") return take(std::uint8_t{});
  if (type == "char" || type == "int8") return take(std::int8_t{});
  if (type == "short" || type == "int16") return take(std::int16_t{});
  if (type == "ushort" || type == "uint16") return take(std::uint16_t{});
  if (type == "int" || type == "int32") return take(std::int32_t{});
  if (type == "uint" || type == "uint32") return take(std::uint32_t{});
  throw Error(ErrorKind::ParseError, "unsupported PLY property type '" + type + "'");
}

}  // namespace detail

struct PointSet {
  std::vector<geom::Vec3> points;
  std::vector<geom::Vec3> normals;  // empty unless the file carried them
};

/// PLY reader for point data: ascii and binary_little_endian, x/y/z plus
/// optional nx/ny/nz vertex properties; other properties are skipped.
inline PointSet parse_ply(const std::string& data, const std::string& what) {
  std::istringstream header(data);
  std::string line;
  if (!std::getline(header, line) || line.rfind("ply", 0) != 0) {
    throw Error(ErrorKind::ParseError, what + ": not a PLY file");
  }

  std::string format;
  std::size_t vertex_count = 0;
  std::vector<detail::PlyProperty> props;
  bool in_vertex_element = false;
  std::size_t header_end = 0;
  while (std::getline(header, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "format") {
      ls >> format;
    } else if (tok == "element") {
      std::string name;
      std::size_t count;
      ls >> name >> count;
      in_vertex_element = (name == "vertex");
      if (in_vertex_element) vertex_count = count;
    } else if (tok == "property" && in_vertex_element) {
      detail::PlyProperty p;
      ls >> p.type >> p.name;
      if (p.type == "list") throw Error(ErrorKind::ParseError, what + ": list properties on vertices unsupported");
      props.push_back(p);
    } else if (tok == "end_header") {
      header_end = static_cast<std::size_t>(header.tellg());
      break;
    }
  }
  if (header_end == 0) throw Error(ErrorKind::ParseError, what + ": missing end_header");

  int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
  for (std::size_t i = 0; i < props.size(); ++i) {
    if (props[i].name == "x") ix = static_cast<int>(i);
    if (props[i].name == "y") iy = static_cast<int>(i);
    if (props[i].name == "z") iz = static_cast<int>(i);
    if (props[i].name == "nx") inx = static_cast<int>(i);
    if (props[i].name == "ny") iny = static_cast<int>(i);
    if (props[i].name == "nz") inz = static_cast<int>(i);
  }
  if (ix < 0 || iy < 0 || iz < 0) throw Error(ErrorKind::ParseError, what + ": vertex element lacks x/y/z");
  const bool has_normals = inx >= 0 && iny >= 0 && inz >= 0;

  PointSet out;
  out.points.reserve(vertex_count);
  std::vector<double> row(props.size());
  if (format == "ascii") {
    std::istringstream body(data.substr(header_end));
    for (std::size_t v = 0; v < vertex_count; ++v) {
      for (std::size_t p = 0; p < props.size(); ++p) {
        if (!(body >> row[p])) throw Error(ErrorKind::ParseError, what + ": truncated vertex data");
      }
      out.points.emplace_back(row[ix], row[iy], row[iz]);
      if (has_normals) out.normals.emplace_back(row[inx], row[iny], row[inz]);
    }
  } else if (format == "binary_little_endian") {
    const char* cursor = data.data() + header_end;
    const char* end = data.data() + data.size();
    for (std::size_t v = 0; v < vertex_count; ++v) {
      for (std::size_t p = 0; p < props.size(); ++p) {
        if (cursor + detail::ply_type_size(props[p].type) > end) {
          throw Error(ErrorKind::ParseError, what + ": truncated vertex data");
        }
        row[p] = detail::read_scalar_le(cursor, props[p].type);
      }
      out.points.emplace_back(row[ix], row[iy], row[iz]);
      if (has_normals) out.normals.emplace_back(row[inx], row[iny], row[inz]);
    }
  } else {
    throw Error(ErrorKind::ParseError, what + ": unsupported PLY format '" + format + "'");
  }
  return out;
}

/// OBJ reader: vertex positions only.
inline PointSet parse_obj(const std::string& data, const std::string& what) {
  PointSet out;
  std::istringstream in(data);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("v ", 0) != 0) continue;
    std::istringstream ls(line.substr(2));
    double x, y, z;
    if (!(ls >> x >> y >> z)) throw Error(ErrorKind::ParseError, what + ": malformed vertex line");
    out.points.emplace_back(x, y, z);
  }
  if (out.points.empty()) throw Error(ErrorKind::ParseError, what + ": no vertices found");
  return out;
}

inline PointSet load_point_set(const std::string& path) {
  const std::string data = read_file(path);
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".ply") return parse_ply(data, path);
  if (ext == ".obj") return parse_obj(data, path);
  throw Error(ErrorKind::ParseError, path + ": expected a .ply or .obj point set");
}

inline std::string write_ply_ascii(const PointSet& ps) {
  std::ostringstream out;
  out.precision(17);
  out << "ply\nformat ascii 1.0\nelement vertex " << ps.points.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  const bool normals = !ps.normals.empty();
  if (normals) out << "property double nx\nproperty double ny\nproperty double nz\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < ps.points.size(); ++i) {
    out << ps.points[i].x() << ' ' << ps.points[i].y() << ' ' << ps.points[i].z();
    if (normals) out << ' ' << ps.normals[i].x() << ' ' << ps.normals[i].y() << ' ' << ps.normals[i].z();
    out << '\n';
  }
  return out.str();
}

}  // namespace demoforge::io
