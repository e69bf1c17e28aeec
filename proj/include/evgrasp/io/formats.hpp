#pragma once

#include "evgrasp/core/event_io.hpp"
#include "evgrasp/emvs/emvs.hpp"
#include "evgrasp/evaluation/metrics.hpp"
#include "evgrasp/grasp/grasp.hpp"
#include "evgrasp/mems/mems.hpp"
#include "evgrasp/pointcloud/registration.hpp"
#include "evgrasp/servoing/servo.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

namespace evg::io {

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError(ParseError::Kind::Io, 0, "cannot open " + path.string());
  return f;
}

inline std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace detail

/// Cluster assignment file: per retained event `event_index,label`, then a
/// footer block of `cluster,centroid_x,centroid_y,count` rows.
inline void write_clusters(const mems::ClusterSet& clusters,
                           const std::filesystem::path& path) {
  auto f = detail::open_out(path);
  f << "event_index,label\n";
  for (std::size_t i = 0; i < clusters.labels.size(); ++i)
    f << clusters.retained_indices[i] << ',' << clusters.labels[i] << '\n';
  f << "cluster,centroid_x,centroid_y,count\n";
  for (std::size_t c = 0; c < clusters.num_clusters(); ++c)
    f << c << ',' << detail::num(clusters.centroids[c].x()) << ','
      << detail::num(clusters.centroids[c].y()) << ',' << clusters.counts[c] << '\n';
}

/// Ground-truth label file: `event_index,object_id` (-1 for noise).
inline void write_labels(std::span<const int32_t> labels,
                         const std::filesystem::path& path) {
  auto f = detail::open_out(path);
  f << "event_index,object_id\n";
  for (std::size_t i = 0; i < labels.size(); ++i)
    f << i << ',' << labels[i] << '\n';
}

inline std::vector<int32_t> read_labels(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ParseError(ParseError::Kind::Io, 0, "cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(f, line) || (line != "event_index,object_id" &&
                                 line != "event_index,object_id\r"))
    throw ParseError(ParseError::Kind::BadHeader, 1, "bad label file header");
  ++line_no;
  std::vector<int32_t> labels;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = evg::detail::split_csv(line);
    int64_t idx = 0, label = 0;
    if (fields.size() != 2 || !evg::detail::parse_int64(fields[0], idx) ||
        !evg::detail::parse_int64(fields[1], label))
      throw ParseError(ParseError::Kind::MalformedLine, line_no,
                       "malformed label line at line " + std::to_string(line_no));
    if (static_cast<std::size_t>(idx) != labels.size())
      throw ParseError(ParseError::Kind::MalformedLine, line_no,
                       "non-contiguous event index at line " + std::to_string(line_no));
    labels.push_back(static_cast<int32_t>(label));
  }
  return labels;
}

/// Depth map grid: `x,y,depth_m,confidence`, valid pixels only.
inline void write_depth_map(const emvs::DepthMap& map,
                            const std::filesystem::path& path) {
  auto f = detail::open_out(path);
  f << "x,y,depth_m,confidence\n";
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x)
      if (map.valid(x, y))
        f << x << ',' << y << ',' << detail::num(map.depth[map.idx(x, y)]) << ','
          << map.confidence[map.idx(x, y)] << '\n';
}

/// Point cloud: `x,y,z` meters, one point per line, no header.
inline void write_point_cloud(const PointCloud& cloud,
                              const std::filesystem::path& path) {
  auto f = detail::open_out(path);
  for (const auto& p : cloud)
    f << detail::num(p.x()) << ',' << detail::num(p.y()) << ','
      << detail::num(p.z()) << '\n';
}

inline PointCloud read_point_cloud(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ParseError(ParseError::Kind::Io, 0, "cannot open " + path.string());
  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    double x, y, z;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &x, &y, &z) != 3)
      throw ParseError(ParseError::Kind::MalformedLine, line_no,
                       "malformed point at line " + std::to_string(line_no));
    cloud.emplace_back(x, y, z);
  }
  return cloud;
}

/// Transform record: 12 numbers row-major [R|t], then c and e^2.
inline void write_transform(const SimilarityTransform& t,
                            const std::filesystem::path& path) {
  auto f = detail::open_out(path);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) f << detail::num(t.R(r, c)) << ' ';
    f << detail::num(t.t(r)) << '\n';
  }
  f << "c " << detail::num(t.c) << '\n';
  f << "e2 " << detail::num(t.mse) << '\n';
}

/// One row of the servo trace.
struct ServoTraceRow {
  int step = 0;
  int64_t t_us = 0;
  servoing::ServoPhase phase = servoing::ServoPhase::Translate;
  Eigen::Vector2d e_px = Eigen::Vector2d::Zero();
  double e_theta_deg = 0.0;
  servoing::VelocityCommand cmd;
};

inline void write_servo_trace(std::span<const ServoTraceRow> rows,
                              const std::filesystem::path& path) {
  auto f = detail::open_out(path);
  f << "step,t_us,phase,e_px,e_py,e_theta_deg,v_f,v_l,v_r\n";
  for (const auto& r : rows)
    f << r.step << ',' << r.t_us << ',' << servoing::to_string(r.phase) << ','
      << detail::num(r.e_px.x()) << ',' << detail::num(r.e_px.y()) << ','
      << detail::num(r.e_theta_deg) << ',' << detail::num(r.cmd.v_f) << ','
      << detail::num(r.cmd.v_l) << ',' << detail::num(r.cmd.v_r) << '\n';
}

/// Grasp record rows: `object_id,cx,cy,theta_deg,depth_m,feasible`.
struct GraspRecordRow {
  int object_id = 0;
  grasp::GraspPose pose;
};

inline void write_grasp_records(std::span<const GraspRecordRow> rows,
                                const std::filesystem::path& path) {
  auto f = detail::open_out(path);
  f << "object_id,cx,cy,theta_deg,depth_m,feasible\n";
  for (const auto& r : rows)
    f << r.object_id << ',' << detail::num(r.pose.center_px.x()) << ','
      << detail::num(r.pose.center_px.y()) << ',' << detail::num(r.pose.approach_deg)
      << ',' << detail::num(r.pose.depth_m) << ',' << (r.pose.feasible ? 1 : 0)
      << '\n';
}

/// Metrics report: one row per grasp plus an aggregate row of means and
/// the success rate.
struct MetricsRow {
  std::string scenario;
  int object_id = 0;
  bool failed = false;  // pipeline error before evaluation
  std::string error;
  evaluation::GraspMetrics metrics;
};

inline void write_metrics_report(std::span<const MetricsRow> rows,
                                 const std::filesystem::path& path) {
  auto f = detail::open_out(path);
  f << "scenario,object_id,e_gp_cm,e_gr_deg,SS,D_P_cm,D_R_deg,Q_G\n";
  double sum_gp = 0, sum_gr = 0, sum_dp = 0, sum_dr = 0, sum_qg = 0;
  int sum_ss = 0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (r.failed) {
      f << r.scenario << ',' << r.object_id << ",error:" << r.error
        << ",,0,,,\n";
      continue;
    }
    const auto& m = r.metrics;
    f << r.scenario << ',' << r.object_id << ',' << detail::num(m.e_gp_cm) << ','
      << detail::num(m.e_gr_deg) << ',' << m.ss << ',' << detail::num(m.d_p_cm)
      << ',' << detail::num(m.d_r_deg) << ',' << detail::num(m.q_g) << '\n';
    sum_gp += m.e_gp_cm;
    sum_gr += m.e_gr_deg;
    sum_dp += m.d_p_cm;
    sum_dr += m.d_r_deg;
    sum_qg += m.q_g;
    sum_ss += m.ss;
    ++n;
  }
  const double dn = n > 0 ? static_cast<double>(n) : 1.0;
  // Failed objects count against the success rate but not the error means.
  const double rate = rows.empty() ? 0.0
                                   : static_cast<double>(sum_ss) /
                                         static_cast<double>(rows.size());
  f << "aggregate,-1," << detail::num(sum_gp / dn) << ',' << detail::num(sum_gr / dn)
    << ',' << detail::num(rate) << ',' << detail::num(sum_dp / dn) << ','
    << detail::num(sum_dr / dn) << ',' << detail::num(sum_qg / dn) << '\n';
}

}  // namespace evg::io
