#include "kinaffect/pose_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace kinaffect {

double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

const CleanTrack* CleanFrame::find(int track_id) const {
  for (const auto& t : tracks)
    if (t.track_id == track_id) return &t;
  return nullptr;
}

PoseFrame gate_confidence(PoseFrame frame, double threshold) {
  for (auto& person : frame.persons)
    for (auto& kp : person.keypoints)
      if (kp.confidence < threshold) kp.valid = false;
  return frame;
}

std::optional<Point2> detection_centroid(const Skeleton& skeleton) {
  Point2 sum;
  int n = 0;
  for (const auto& kp : skeleton) {
    if (!kp.valid) continue;
    sum.x += kp.x;
    sum.y += kp.y;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return Point2{sum.x / n, sum.y / n};
}

TrackAssignment assign_tracks(std::span<const Point2> detections, std::span<const TrackCentroid> tracks, double gate) {
  struct Pair {
    double d;
    int track_id;
    std::size_t det;
    std::size_t track;
  };
  std::vector<Pair> pairs;
  pairs.reserve(detections.size() * tracks.size());
  for (std::size_t i = 0; i < detections.size(); ++i)
    for (std::size_t j = 0; j < tracks.size(); ++j) {
      const double d = distance(detections[i], tracks[j].centroid);
      if (d <= gate) pairs.push_back({d, tracks[j].track_id, i, j});
    }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return std::tie(a.d, a.track_id, a.det) < std::tie(b.d, b.track_id, b.det);
  });

  std::vector<bool> det_used(detections.size(), false);
  std::vector<bool> track_used(tracks.size(), false);
  TrackAssignment out;
  for (const auto& p : pairs) {
    if (det_used[p.det] || track_used[p.track]) continue;
    det_used[p.det] = true;
    track_used[p.track] = true;
    out.matched.emplace_back(p.det, p.track_id);
  }
  for (std::size_t i = 0; i < detections.size(); ++i)
    if (!det_used[i]) out.unmatched_detections.push_back(i);
  for (std::size_t j = 0; j < tracks.size(); ++j)
    if (!track_used[j]) out.unmatched_tracks.push_back(tracks[j].track_id);
  std::sort(out.matched.begin(), out.matched.end());
  return out;
}

double smooth_step(double previous, double sample, double alpha) { return alpha * sample + (1.0 - alpha) * previous; }

std::vector<double> smooth(std::span<const double> samples, double alpha) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (double x : samples) out.push_back(out.empty() ? x : smooth_step(out.back(), x, alpha));
  return out;
}

CleanKeypoint KeypointFilter::update(const Keypoint* observation, double alpha, int max_gap_frames) {
  if (observation == nullptr || !observation->valid) return fill_gap(max_gap_frames);
  if (value_) {
    value_->x = smooth_step(value_->x, observation->x, alpha);
    value_->y = smooth_step(value_->y, observation->y, alpha);
  } else {
    value_ = Point2{observation->x, observation->y};
  }
  misses_ = 0;
  return {value_->x, value_->y, KeypointState::Valid};
}

CleanKeypoint KeypointFilter::fill_gap(int max_gap_frames) {
  if (!value_) return {0.0, 0.0, KeypointState::Stale};
  ++misses_;
  return {value_->x, value_->y, misses_ <= max_gap_frames ? KeypointState::Interpolated : KeypointState::Stale};
}

std::optional<double> BodyScaleCalibrator::update(double timestamp, std::optional<double> torso) {
  if (torso && std::isfinite(*torso)) samples_.emplace_back(timestamp, *torso);
  while (!samples_.empty() && !(samples_.front().first > timestamp - window_s_)) samples_.pop_front();
  if (samples_.empty()) return scale_;

  std::vector<double> values;
  values.reserve(samples_.size());
  for (const auto& s : samples_) values.push_back(s.second);
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  const double median = (n % 2 == 1) ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  scale_ = std::max(median, kMinScale);
  return scale_;
}

std::optional<double> torso_length(const std::array<CleanKeypoint, kNumKeypoints>& kp) {
  const auto& ls = kp[idx(Joint::LeftShoulder)];
  const auto& rs = kp[idx(Joint::RightShoulder)];
  const auto& lh = kp[idx(Joint::LeftHip)];
  const auto& rh = kp[idx(Joint::RightHip)];
  for (const auto* k : {&ls, &rs, &lh, &rh})
    if (k->state != KeypointState::Valid) return std::nullopt;
  const Point2 shoulders{0.5 * (ls.x + rs.x), 0.5 * (ls.y + rs.y)};
  const Point2 hips{0.5 * (lh.x + rh.x), 0.5 * (lh.y + rh.y)};
  return distance(shoulders, hips);
}

namespace {

std::optional<Point2> clean_centroid(const std::array<CleanKeypoint, kNumKeypoints>& kps) {
  Point2 sum;
  int n = 0;
  for (const auto& kp : kps) {
    if (!kp.usable()) continue;
    sum.x += kp.x;
    sum.y += kp.y;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return Point2{sum.x / n, sum.y / n};
}

}  // namespace

PosePipeline::PosePipeline(const EngineConfig& config)
    : threshold_(config.confidence_threshold),
      alpha_(config.smoothing_alpha),
      max_gap_(config.max_gap_frames),
      gate_(config.track_gate),
      calibration_window_s_(config.calibration_window_s) {
  reset();
  tracks_.resize(static_cast<std::size_t>(config.max_persons));
  for (auto& t : tracks_) t.calibrator = BodyScaleCalibrator(calibration_window_s_);
}

void PosePipeline::reset() {
  const std::size_t n = tracks_.size();
  tracks_.clear();
  tracks_.resize(n);
  for (auto& t : tracks_) t.calibrator = BodyScaleCalibrator(calibration_window_s_);
}

void PosePipeline::open_track(Track& track, int track_id, const PersonPose& person, double t, EventLog* events) {
  const std::uint32_t generation = track.generation + 1;
  track = Track{};
  track.live = true;
  track.generation = generation;
  track.calibrator = BodyScaleCalibrator(calibration_window_s_);
  if (events) events->push_back({t, EventKind::TrackOpened, track_id, "person " + std::to_string(person.id)});
  update_track(track, track_id, &person, t, events);
}

void PosePipeline::update_track(Track& track, int track_id, const PersonPose* person, double t, EventLog* events) {
  if (person) {
    track.staleness = 0;
    track.person_id = person->id;
  } else {
    ++track.staleness;
  }
  for (std::size_t k = 0; k < kNumKeypoints; ++k) {
    const bool was_usable = track.current[k].usable() && track.filters[k].value().has_value();
    track.current[k] = track.filters[k].update(person ? &person->keypoints[k] : nullptr, alpha_, max_gap_);
    if (events && was_usable && !track.current[k].usable())
      events->push_back({t, EventKind::KeypointStale, track_id, std::string(joint_name(k))});
  }
  const bool was_calibrated = track.calibrator.calibrated();
  track.calibrator.update(t, torso_length(track.current));
  if (events && !was_calibrated && track.calibrator.calibrated())
    events->push_back({t, EventKind::Calibrated, track_id, ""});
  if (auto c = clean_centroid(track.current)) track.centroid = *c;
}

CleanFrame PosePipeline::process(const PoseFrame& raw, EventLog* events) {
  const PoseFrame frame = gate_confidence(raw, threshold_);
  const double t = frame.timestamp;

  std::vector<Point2> detections;
  std::vector<const PersonPose*> persons;
  for (const auto& p : frame.persons) {
    if (auto c = detection_centroid(p.keypoints)) {
      detections.push_back(*c);
      persons.push_back(&p);
    }
  }
  std::vector<TrackCentroid> live;
  for (std::size_t i = 0; i < tracks_.size(); ++i)
    if (tracks_[i].live) live.push_back({static_cast<int>(i), tracks_[i].centroid});

  const TrackAssignment assignment = assign_tracks(detections, live, gate_);
  for (const auto& [det, track_id] : assignment.matched)
    update_track(tracks_[static_cast<std::size_t>(track_id)], track_id, persons[det], t, events);
  for (int track_id : assignment.unmatched_tracks) {
    Track& track = tracks_[static_cast<std::size_t>(track_id)];
    update_track(track, track_id, nullptr, t, events);
    if (track.staleness > max_gap_) {
      track.live = false;
      if (events) events->push_back({t, EventKind::TrackRetired, track_id, ""});
    }
  }
  for (std::size_t det : assignment.unmatched_detections) {
    auto slot = std::find_if(tracks_.begin(), tracks_.end(), [](const Track& tr) { return !tr.live; });
    if (slot == tracks_.end()) {
      if (events) events->push_back({t, EventKind::PersonDropped, persons[det]->id, "no free track"});
      continue;
    }
    open_track(*slot, static_cast<int>(slot - tracks_.begin()), *persons[det], t, events);
  }

  CleanFrame out;
  out.timestamp = t;
  for (std::size_t i = 0; i < tracks_.size(); ++i) {
    const Track& tr = tracks_[i];
    if (!tr.live) continue;
    CleanTrack ct;
    ct.track_id = static_cast<int>(i);
    ct.person_id = tr.person_id;
    ct.generation = tr.generation;
    ct.keypoints = tr.current;
    ct.body_scale = tr.calibrator.scale();
    out.tracks.push_back(ct);
  }
  return out;
}

}  // namespace kinaffect
