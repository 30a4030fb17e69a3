#include "kinaffect/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace kinaffect {

std::array<double, kNumFeatures> FeatureVector::values() const {
  return {speed, energy, amplitude, expansion, jerk, frequency, qom, rom};
}

FeatureParams FeatureParams::from(const EngineConfig& c) {
  FeatureParams p;
  p.window_s = c.window_s;
  p.qom_threshold = c.qom_threshold;
  p.frequency_deadband = c.frequency_deadband;
  p.proximity_scale = c.proximity_scale;
  return p;
}

namespace {

constexpr std::array<std::size_t, 4> kExtremities = {idx(Joint::LeftWrist), idx(Joint::RightWrist),
                                                     idx(Joint::LeftAnkle), idx(Joint::RightAnkle)};

// Per-track view of a window restricted to the frames where the track is usable.
struct TrackSeries {
  std::vector<std::size_t> frame_index;  // position in the window
  std::vector<double> t;
  std::vector<const CleanTrack*> track;
  std::vector<std::size_t> keypoints;  // usable in every selected frame
  std::vector<Point2> centroid;
  double scale = 1.0;
};

std::optional<TrackSeries> build_series(std::span<const CleanFrame> window, int track_id,
                                        const FeatureParams& params) {
  TrackSeries s;
  for (std::size_t i = 0; i < window.size(); ++i) {
    const CleanTrack* tr = window[i].find(track_id);
    if (tr == nullptr || !tr->body_scale) continue;
    if (std::none_of(tr->keypoints.begin(), tr->keypoints.end(), [](const CleanKeypoint& k) { return k.usable(); }))
      continue;
    s.frame_index.push_back(i);
    s.t.push_back(window[i].timestamp);
    s.track.push_back(tr);
  }
  const std::size_t m = s.track.size();
  if (m < 4 || static_cast<double>(m) < params.min_valid_fraction * static_cast<double>(window.size()))
    return std::nullopt;

  for (std::size_t k = 0; k < kNumKeypoints; ++k) {
    const bool always = std::all_of(s.track.begin(), s.track.end(),
                                    [k](const CleanTrack* tr) { return tr->keypoints[k].usable(); });
    if (always) s.keypoints.push_back(k);
  }
  if (s.keypoints.empty()) return std::nullopt;

  s.scale = *s.track.back()->body_scale;
  s.centroid.reserve(m);
  for (const CleanTrack* tr : s.track) {
    Point2 c;
    for (std::size_t k : s.keypoints) {
      c.x += tr->keypoints[k].x;
      c.y += tr->keypoints[k].y;
    }
    const double n = static_cast<double>(s.keypoints.size());
    s.centroid.push_back({c.x / n, c.y / n});
  }
  return s;
}

double bbox_diagonal(const CleanTrack& tr, std::span<const std::size_t> keypoints) {
  double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
  double min_y = min_x, max_y = -min_x;
  for (std::size_t k : keypoints) {
    min_x = std::min(min_x, tr.keypoints[k].x);
    max_x = std::max(max_x, tr.keypoints[k].x);
    min_y = std::min(min_y, tr.keypoints[k].y);
    max_y = std::max(max_y, tr.keypoints[k].y);
  }
  return std::hypot(max_x - min_x, max_y - min_y);
}

std::vector<double> centroid_speeds(const TrackSeries& s) {
  std::vector<double> v;
  for (std::size_t j = 0; j + 1 < s.centroid.size(); ++j) {
    const double dt = s.t[j + 1] - s.t[j];
    v.push_back(distance(s.centroid[j + 1], s.centroid[j]) / dt / s.scale);
  }
  return v;
}

FeatureVector compute(const TrackSeries& s, const FeatureParams& params) {
  const std::size_t m = s.centroid.size();
  const double scale = s.scale;
  FeatureVector f;

  const std::vector<double> speeds = centroid_speeds(s);
  for (double v : speeds) f.speed += v;
  f.speed /= static_cast<double>(speeds.size());

  std::vector<double> vertical;
  double energy = 0.0;
  double moving = 0.0;
  for (std::size_t j = 0; j + 1 < m; ++j) {
    const double dt = s.t[j + 1] - s.t[j];
    vertical.push_back((s.centroid[j + 1].y - s.centroid[j].y) / dt / scale);
    double e = 0.0;
    int n_moving = 0;
    for (std::size_t k : s.keypoints) {
      const auto& a = s.track[j]->keypoints[k];
      const auto& b = s.track[j + 1]->keypoints[k];
      const double disp = std::hypot(b.x - a.x, b.y - a.y) / scale;
      const double v = disp / dt;
      e += v * v;
      if (disp > params.qom_threshold) ++n_moving;
    }
    energy += e / static_cast<double>(s.keypoints.size());
    moving += static_cast<double>(n_moving) / static_cast<double>(s.keypoints.size());
  }
  f.energy = energy / static_cast<double>(m - 1);
  f.qom = moving / static_cast<double>(m - 1);

  std::vector<std::size_t> extremities;
  for (std::size_t k : kExtremities)
    if (std::find(s.keypoints.begin(), s.keypoints.end(), k) != s.keypoints.end()) extremities.push_back(k);

  double diag_sum = 0.0, diag_min = std::numeric_limits<double>::infinity(), diag_max = 0.0;
  double expansion = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double d = bbox_diagonal(*s.track[j], s.keypoints);
    diag_sum += d;
    diag_min = std::min(diag_min, d);
    diag_max = std::max(diag_max, d);
    if (!extremities.empty()) {
      double e = 0.0;
      for (std::size_t k : extremities)
        e += distance({s.track[j]->keypoints[k].x, s.track[j]->keypoints[k].y}, s.centroid[j]);
      expansion += e / static_cast<double>(extremities.size());
    }
  }
  f.amplitude = diag_sum / static_cast<double>(m) / scale;
  f.expansion = expansion / static_cast<double>(m) / scale;
  f.rom = (diag_max - diag_min) / scale;

  // Third difference on a uniform grid at the mean frame interval.
  const double dt = (s.t.back() - s.t.front()) / static_cast<double>(m - 1);
  const double dt3 = dt * dt * dt;
  double jerk = 0.0;
  for (std::size_t j = 0; j + 3 < m; ++j) {
    const Point2& c0 = s.centroid[j];
    const Point2& c1 = s.centroid[j + 1];
    const Point2& c2 = s.centroid[j + 2];
    const Point2& c3 = s.centroid[j + 3];
    const double jx = c3.x - 3.0 * c2.x + 3.0 * c1.x - c0.x;
    const double jy = c3.y - 3.0 * c2.y + 3.0 * c1.y - c0.y;
    jerk += std::hypot(jx, jy) / dt3 / scale;
  }
  f.jerk = jerk / static_cast<double>(m - 3);

  f.frequency = count_zero_crossings(vertical, params.frequency_deadband) / (2.0 * params.window_s);
  return f;
}

std::vector<int> track_ids(std::span<const CleanFrame> window) {
  std::vector<int> ids;
  for (const auto& frame : window)
    for (const auto& tr : frame.tracks)
      if (std::find(ids.begin(), ids.end(), tr.track_id) == ids.end()) ids.push_back(tr.track_id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

int count_zero_crossings(std::span<const double> series, double deadband) {
  int crossings = 0;
  int side = 0;
  for (double v : series) {
    int now = 0;
    if (v > deadband) now = 1;
    else if (v < -deadband) now = -1;
    if (now == 0) continue;
    if (side != 0 && now != side) ++crossings;
    side = now;
  }
  return crossings;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = std::min(a.size(), b.size());
  if (n < 2) return 0.0;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::optional<FeatureVector> extract_features(std::span<const CleanFrame> window, int track_id,
                                              const FeatureParams& params) {
  auto series = build_series(window, track_id, params);
  if (!series) return std::nullopt;
  return compute(*series, params);
}

GroupFeatures extract_group(std::span<const CleanFrame> window, const FeatureParams& params) {
  std::vector<TrackSeries> active;
  for (int id : track_ids(window))
    if (auto s = build_series(window, id, params)) active.push_back(std::move(*s));

  GroupFeatures g;
  g.count = static_cast<int>(active.size());
  if (g.count < 2) {
    g.proximity = 0.0;
    g.synchrony = 1.0;
    return g;
  }

  std::vector<Point2> means;
  std::vector<std::map<std::size_t, double>> speed_by_frame(active.size());
  for (std::size_t a = 0; a < active.size(); ++a) {
    const TrackSeries& s = active[a];
    Point2 mean;
    for (const auto& c : s.centroid) {
      mean.x += c.x;
      mean.y += c.y;
    }
    means.push_back({mean.x / static_cast<double>(s.centroid.size()), mean.y / static_cast<double>(s.centroid.size())});
    const std::vector<double> v = centroid_speeds(s);
    for (std::size_t j = 0; j < v.size(); ++j) speed_by_frame[a][s.frame_index[j + 1]] = v[j];
  }

  double dist_sum = 0.0, sync_sum = 0.0;
  int pairs = 0;
  for (std::size_t a = 0; a < active.size(); ++a) {
    for (std::size_t b = a + 1; b < active.size(); ++b) {
      dist_sum += distance(means[a], means[b]);
      std::vector<double> sa, sb;
      for (const auto& [frame, v] : speed_by_frame[a]) {
        auto it = speed_by_frame[b].find(frame);
        if (it == speed_by_frame[b].end()) continue;
        sa.push_back(v);
        sb.push_back(it->second);
      }
      sync_sum += pearson(sa, sb);
      ++pairs;
    }
  }
  g.proximity = 1.0 - std::clamp(dist_sum / pairs / params.proximity_scale, 0.0, 1.0);
  g.synchrony = std::clamp(sync_sum / pairs, -1.0, 1.0);
  return g;
}

NormalizedFeatures normalize(const FeatureVector& features, std::span<const Range, kNumFeatures> ranges) {
  const auto raw = features.values();
  NormalizedFeatures out{};
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    const double span = ranges[i].max - ranges[i].min;
    const double v = (raw[i] - ranges[i].min) / span;
    out[i] = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : (raw[i] > ranges[i].min ? 1.0 : 0.0);
  }
  return out;
}

}  // namespace kinaffect
