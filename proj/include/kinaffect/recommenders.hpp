#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kinaffect/config.hpp"
#include "kinaffect/core.hpp"
#include "kinaffect/features.hpp"

namespace kinaffect {

using Distribution = std::vector<double>;

struct Anchor {
  double valence = 0.0;
  double arousal = 0.0;

  bool operator==(const Anchor&) const = default;
};

inline constexpr int kGroupSubject = -1;

struct EmotionEstimate {
  Distribution distribution;
  double valence = 0.0;
  double arousal = 0.0;
  double intensity = 0.0;
  double confidence = 0.0;
  int subject = kGroupSubject;  // track id, or kGroupSubject
  double timestamp = 0.0;

  std::size_t top() const;
  bool operator==(const EmotionEstimate&) const = default;
};

// ---------------------------------------------------------------------------
// Distribution helpers
// ---------------------------------------------------------------------------

/// Natural-log entropy.
double entropy(std::span<const double> p);

/// 1 - H(p)/ln(K); 1 for K <= 1.
double distribution_confidence(std::span<const double> p);

/// Jensen-Shannon divergence in bits (range [0,1]).
double js_divergence(std::span<const double> p, std::span<const double> q);

/// Scales to unit sum; a zero vector becomes uniform.
void renormalize(Distribution& p);

std::size_t argmax(std::span<const double> p);

// ---------------------------------------------------------------------------
// Circumplex
// ---------------------------------------------------------------------------

struct CircumplexPoint {
  double valence = 0.0;
  double arousal = 0.0;
  double energy = 0.0;  // composite in [0,1]; doubles as intensity
};

CircumplexPoint circumplex_map(const NormalizedFeatures& x);

/// Quadrant anchor for a taught label: (+-0.7, +-0.7) by the signs of the
/// position, with zero counted as positive.
Anchor quadrant_anchor(double valence, double arousal);

// ---------------------------------------------------------------------------
// Lexicon
// ---------------------------------------------------------------------------

struct Prototype {
  std::array<double, kNumFeatures> mean{};
  std::array<double, kNumFeatures> m2{};  // Welford sum of squared deviations
  std::size_t count = 0;
  Anchor anchor;

  /// Population standard deviation, floored.
  double spread(std::size_t feature, double floor) const;
  bool operator==(const Prototype&) const = default;
};

/// A taught segment: normalized windows with their end timestamps.
struct TeachSegment {
  double start = 0.0;
  double end = 0.0;
  std::vector<std::pair<double, NormalizedFeatures>> windows;
};

/// Per-session mapping from labels to feature prototypes. Predefined labels
/// exist from construction with count 0 and fall back to their circumplex
/// anchor.
class EmotionLexicon {
 public:
  explicit EmotionLexicon(const EngineConfig& config = {});

  const LabelSet& labels() const { return labels_; }
  std::size_t size() const { return prototypes_.size(); }
  const Prototype& prototype(std::size_t label) const { return prototypes_.at(label); }
  double sigma_floor() const { return sigma_floor_; }
  std::size_t total_count() const;

  /// Returns the label index (creating a taught label if needed).
  std::size_t intern(std::string_view label);

  /// Folds one window into the label's running mean/variance.
  void accumulate(std::size_t label, const NormalizedFeatures& x);

  /// One affine step of the prototype mean toward `target`.
  void shift_mean(std::size_t label, const NormalizedFeatures& target, double rate);

  std::vector<Anchor> anchors() const;

  bool operator==(const EmotionLexicon&) const = default;

 private:
  LabelSet labels_;
  std::vector<Prototype> prototypes_;
  double sigma_floor_;
};

/// Accumulates `segment` into `label` after discarding windows ending within
/// `lead_in_s` of the segment start. Throws SegmentTooShort (lexicon
/// unchanged) when the trimmed segment is shorter than `min_segment_s`.
void teach(EmotionLexicon& lexicon, std::string_view label, const TeachSegment& segment, double lead_in_s = 1.0,
           double min_segment_s = 3.0);

/// Moves the top label's prototype toward `recent_mean` unless `feedback`
/// is an explicit disagreement. Labels with no taught windows are left
/// alone. Returns whether the lexicon changed.
bool adapt(EmotionLexicon& lexicon, std::size_t top_label, const NormalizedFeatures& recent_mean, double rate,
           std::optional<bool> feedback);

// ---------------------------------------------------------------------------
// Recommenders
// ---------------------------------------------------------------------------

struct RecommenderParams {
  double circumplex_sigma = 0.6;
  double sigma_floor = 0.05;
  int blend_full_windows = 100;

  static RecommenderParams from(const EngineConfig& config);
};

/// Probability-weighted mean of label anchors.
Anchor weighted_anchor(std::span<const double> p, std::span<const Anchor> anchors);

/// Behavioral recommender: circumplex baseline blended with the learned
/// prototype likelihood as taught windows accumulate.
EmotionEstimate rec1_behavioral(const NormalizedFeatures& x, const EmotionLexicon& lexicon,
                                const RecommenderParams& params);

/// Contextual recommender: pulls each person's distribution toward the group
/// mean by the group's cohesion.
std::vector<EmotionEstimate> rec2_contextual(std::span<const EmotionEstimate> estimates, const GroupFeatures& group,
                                             std::span<const Anchor> anchors);

double cohesion(const GroupFeatures& group);

struct TrendShift {
  double timestamp = 0.0;
  double divergence = 0.0;
};

/// Longitudinal recommender state: fast/main/slow exponential averages of
/// the aggregate distribution with per-update decay 2^(-dt/half_life).
class LongitudinalState {
 public:
  LongitudinalState() = default;
  LongitudinalState(double fast_half_life, double main_half_life, double slow_half_life, double trend_threshold);
  static LongitudinalState from(const EngineConfig& config);

  /// Main EMA, or nullopt before the first update.
  std::optional<Distribution> prior() const;

  /// Folds in `p` at `timestamp`; returns a TrendShift when the fast/slow
  /// divergence rises above the threshold.
  std::optional<TrendShift> update(const Distribution& p, double timestamp);

  bool initialized() const { return last_.has_value(); }
  const Distribution& fast() const { return fast_; }
  const Distribution& main() const { return main_; }
  const Distribution& slow() const { return slow_; }
  void reset();

 private:
  double fast_h_ = 1.0, main_h_ = 5.0, slow_h_ = 10.0, threshold_ = 0.15;
  std::optional<double> last_;
  bool above_ = false;
  Distribution fast_, main_, slow_;
};

struct WeightedRecommendation {
  const Distribution* distribution = nullptr;  // nullptr = absent this hop
  double weight = 0.0;
};

/// Weighted convex combination of recommender outputs. Absent inputs are
/// skipped and the remaining weights renormalized. Throws LabelSetMismatch.
EmotionEstimate aggregate(std::span<const WeightedRecommendation> inputs, std::span<const Anchor> anchors,
                          double intensity);

/// Convenience overload for the REC1/REC2/REC3 triple.
EmotionEstimate aggregate(const EmotionEstimate& rec1, const EmotionEstimate& rec2,
                          const std::optional<Distribution>& rec3, const std::array<double, 3>& weights,
                          std::span<const Anchor> anchors);

/// Extension point for additional recommenders (facial, vocal,
/// physiological). Implementations return a distribution over the
/// lexicon's label set, or nullopt when they have nothing to say this hop.
class Recommender {
 public:
  virtual ~Recommender() = default;
  virtual std::string_view name() const = 0;
  virtual std::optional<Distribution> recommend(int subject, double timestamp, const NormalizedFeatures& features,
                                                const EmotionLexicon& lexicon) = 0;
};

}  // namespace kinaffect
