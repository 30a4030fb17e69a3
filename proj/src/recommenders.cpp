#include "kinaffect/recommenders.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace kinaffect {

std::size_t EmotionEstimate::top() const { return argmax(distribution); }

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

double distribution_confidence(std::span<const double> p) {
  if (p.size() <= 1) return 1.0;
  const double c = 1.0 - entropy(p) / std::log(static_cast<double>(p.size()));
  return std::clamp(c, 0.0, 1.0);
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
  const std::size_t n = std::max(p.size(), q.size());
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = i < p.size() ? p[i] : 0.0;
    const double b = i < q.size() ? q[i] : 0.0;
    const double m = 0.5 * (a + b);
    if (a > 0.0) d += 0.5 * a * std::log2(a / m);
    if (b > 0.0) d += 0.5 * b * std::log2(b / m);
  }
  return std::clamp(d, 0.0, 1.0);
}

void renormalize(Distribution& p) {
  double sum = 0.0;
  for (double& v : p) {
    if (!(v > 0.0)) v = 0.0;
    sum += v;
  }
  if (!(sum > 0.0) || !std::isfinite(sum)) {
    std::fill(p.begin(), p.end(), p.empty() ? 0.0 : 1.0 / static_cast<double>(p.size()));
    return;
  }
  for (double& v : p) v /= sum;
}

std::size_t argmax(std::span<const double> p) {
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

CircumplexPoint circumplex_map(const NormalizedFeatures& x) {
  CircumplexPoint out;
  out.energy = 0.5 * x[static_cast<std::size_t>(Feature::Speed)] + 0.3 * x[static_cast<std::size_t>(Feature::Qom)] +
               0.2 * x[static_cast<std::size_t>(Feature::Frequency)];
  out.arousal = std::clamp(2.0 * out.energy - 1.0, -1.0, 1.0);
  out.valence = std::clamp(2.0 * (0.6 * x[static_cast<std::size_t>(Feature::Expansion)] +
                                  0.4 * (1.0 - x[static_cast<std::size_t>(Feature::Jerk)])) -
                               1.0,
                           -1.0, 1.0);
  return out;
}

Anchor quadrant_anchor(double valence, double arousal) {
  return {valence >= 0.0 ? 0.7 : -0.7, arousal >= 0.0 ? 0.7 : -0.7};
}

double Prototype::spread(std::size_t feature, double floor) const {
  if (count == 0) return floor;
  return std::max(std::sqrt(m2[feature] / static_cast<double>(count)), floor);
}

EmotionLexicon::EmotionLexicon(const EngineConfig& config) : sigma_floor_(config.sigma_floor) {
  prototypes_.resize(kNumPredefinedLabels);
  for (std::size_t i = 0; i < kNumPredefinedLabels; ++i)
    prototypes_[i].anchor = {config.anchors[i][0], config.anchors[i][1]};
}

std::size_t EmotionLexicon::total_count() const {
  std::size_t n = 0;
  for (const auto& p : prototypes_) n += p.count;
  return n;
}

std::size_t EmotionLexicon::intern(std::string_view label) {
  const std::size_t index = labels_.intern(label);
  if (index >= prototypes_.size()) prototypes_.resize(index + 1);
  return index;
}

void EmotionLexicon::accumulate(std::size_t label, const NormalizedFeatures& x) {
  Prototype& p = prototypes_.at(label);
  ++p.count;
  const double n = static_cast<double>(p.count);
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    const double delta = x[i] - p.mean[i];
    p.mean[i] += delta / n;
    p.m2[i] += delta * (x[i] - p.mean[i]);
  }
  if (!LabelSet::is_predefined(label)) {
    const CircumplexPoint c = circumplex_map(p.mean);
    p.anchor = quadrant_anchor(c.valence, c.arousal);
  }
}

void EmotionLexicon::shift_mean(std::size_t label, const NormalizedFeatures& target, double rate) {
  Prototype& p = prototypes_.at(label);
  for (std::size_t i = 0; i < kNumFeatures; ++i) p.mean[i] = (1.0 - rate) * p.mean[i] + rate * target[i];
}

std::vector<Anchor> EmotionLexicon::anchors() const {
  std::vector<Anchor> out;
  out.reserve(prototypes_.size());
  for (const auto& p : prototypes_) out.push_back(p.anchor);
  return out;
}

void teach(EmotionLexicon& lexicon, std::string_view label, const TeachSegment& segment, double lead_in_s,
           double min_segment_s) {
  const double trimmed_start = segment.start + lead_in_s;
  const double length = segment.end - trimmed_start;
  if (length + 1e-9 < min_segment_s) {
    throw Error(ErrorKind::SegmentTooShort, "teaching segment for '" + std::string(label) + "' lasts " +
                                                std::to_string(std::max(length, 0.0)) + " s after lead-in");
  }
  const std::size_t index = lexicon.intern(label);
  for (const auto& [t, x] : segment.windows)
    if (t > trimmed_start && t <= segment.end) lexicon.accumulate(index, x);
}

bool adapt(EmotionLexicon& lexicon, std::size_t top_label, const NormalizedFeatures& recent_mean, double rate,
           std::optional<bool> feedback) {
  if (feedback.has_value() && !*feedback) return false;
  if (top_label >= lexicon.size() || lexicon.prototype(top_label).count == 0) return false;
  if (rate == 0.0) return false;
  lexicon.shift_mean(top_label, recent_mean, rate);
  return true;
}

RecommenderParams RecommenderParams::from(const EngineConfig& c) {
  return {c.circumplex_sigma, c.sigma_floor, c.blend_full_windows};
}

Anchor weighted_anchor(std::span<const double> p, std::span<const Anchor> anchors) {
  Anchor out;
  for (std::size_t k = 0; k < p.size() && k < anchors.size(); ++k) {
    out.valence += p[k] * anchors[k].valence;
    out.arousal += p[k] * anchors[k].arousal;
  }
  out.valence = std::clamp(out.valence, -1.0, 1.0);
  out.arousal = std::clamp(out.arousal, -1.0, 1.0);
  return out;
}

namespace {

// exp(log_weights - max), normalized.
Distribution softmax(const std::vector<double>& log_weights, const std::vector<bool>& active) {
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < log_weights.size(); ++k)
    if (active[k]) top = std::max(top, log_weights[k]);
  Distribution p(log_weights.size(), 0.0);
  double sum = 0.0;
  for (std::size_t k = 0; k < log_weights.size(); ++k) {
    if (!active[k]) continue;
    p[k] = std::exp(log_weights[k] - top);
    sum += p[k];
  }
  for (double& v : p) v /= sum;
  return p;
}

}  // namespace

EmotionEstimate rec1_behavioral(const NormalizedFeatures& x, const EmotionLexicon& lexicon,
                                const RecommenderParams& params) {
  const CircumplexPoint cp = circumplex_map(x);
  const std::size_t K = lexicon.size();
  const std::vector<Anchor> anchors = lexicon.anchors();

  std::vector<double> log_base(K);
  const double two_sigma2 = 2.0 * params.circumplex_sigma * params.circumplex_sigma;
  for (std::size_t k = 0; k < K; ++k) {
    const double dv = cp.valence - anchors[k].valence;
    const double da = cp.arousal - anchors[k].arousal;
    log_base[k] = -(dv * dv + da * da) / two_sigma2;
  }
  Distribution p = softmax(log_base, std::vector<bool>(K, true));

  const std::size_t n_total = lexicon.total_count();
  if (n_total > 0) {
    const double beta = std::min(1.0, static_cast<double>(n_total) / static_cast<double>(params.blend_full_windows));
    std::vector<double> log_learn(K, 0.0);
    std::vector<bool> taught(K, false);
    const double floor2 = params.sigma_floor * params.sigma_floor;
    for (std::size_t k = 0; k < K; ++k) {
      const Prototype& proto = lexicon.prototype(k);
      if (proto.count == 0) continue;
      taught[k] = true;
      double ll = 0.0;
      for (std::size_t i = 0; i < kNumFeatures; ++i) {
        const double sigma = proto.spread(i, lexicon.sigma_floor());
        const double d = x[i] - proto.mean[i];
        ll -= d * d / (2.0 * (sigma * sigma + floor2));
      }
      log_learn[k] = ll;
    }
    const Distribution learned = softmax(log_learn, taught);
    for (std::size_t k = 0; k < K; ++k) p[k] = beta * learned[k] + (1.0 - beta) * p[k];
    renormalize(p);
  }

  EmotionEstimate e;
  e.distribution = std::move(p);
  e.valence = cp.valence;
  e.arousal = cp.arousal;
  e.intensity = std::clamp(cp.energy, 0.0, 1.0);
  e.confidence = distribution_confidence(e.distribution);
  return e;
}

double cohesion(const GroupFeatures& group) {
  return std::clamp(0.5 * group.proximity + 0.5 * std::max(0.0, group.synchrony), 0.0, 1.0);
}

std::vector<EmotionEstimate> rec2_contextual(std::span<const EmotionEstimate> estimates, const GroupFeatures& group,
                                             std::span<const Anchor> anchors) {
  std::vector<EmotionEstimate> out(estimates.begin(), estimates.end());
  const double c = cohesion(group);
  if (estimates.size() < 2 || c == 0.0) return out;

  const std::size_t K = estimates.front().distribution.size();
  for (const auto& e : estimates)
    if (e.distribution.size() != K) throw Error(ErrorKind::LabelSetMismatch, "rec2 inputs differ in label count");

  Distribution g(K, 0.0);
  for (const auto& e : estimates)
    for (std::size_t k = 0; k < K; ++k) g[k] += e.distribution[k];
  for (double& v : g) v /= static_cast<double>(estimates.size());

  for (auto& e : out) {
    for (std::size_t k = 0; k < K; ++k) e.distribution[k] = (1.0 - c) * e.distribution[k] + c * g[k];
    renormalize(e.distribution);
    const Anchor va = weighted_anchor(e.distribution, anchors);
    e.valence = va.valence;
    e.arousal = va.arousal;
    e.confidence = distribution_confidence(e.distribution);
  }
  return out;
}

LongitudinalState::LongitudinalState(double fast, double main, double slow, double threshold)
    : fast_h_(fast), main_h_(main), slow_h_(slow), threshold_(threshold) {}

LongitudinalState LongitudinalState::from(const EngineConfig& c) {
  return {c.ema_half_life_fast_s, c.ema_half_life_main_s, c.ema_half_life_slow_s, c.trend_threshold};
}

std::optional<Distribution> LongitudinalState::prior() const {
  if (!last_) return std::nullopt;
  return main_;
}

void LongitudinalState::reset() {
  last_.reset();
  above_ = false;
  fast_.clear();
  main_.clear();
  slow_.clear();
}

std::optional<TrendShift> LongitudinalState::update(const Distribution& p, double timestamp) {
  if (!last_) {
    fast_ = main_ = slow_ = p;
    last_ = timestamp;
    return std::nullopt;
  }
  if (p.size() < main_.size()) throw Error(ErrorKind::LabelSetMismatch, "longitudinal input lost labels");
  fast_.resize(p.size(), 0.0);
  main_.resize(p.size(), 0.0);
  slow_.resize(p.size(), 0.0);

  const double dt = std::max(0.0, timestamp - *last_);
  last_ = timestamp;
  auto blend = [&](Distribution& ema, double half_life) {
    const double decay = std::exp2(-dt / half_life);
    for (std::size_t k = 0; k < p.size(); ++k) ema[k] = decay * ema[k] + (1.0 - decay) * p[k];
  };
  blend(fast_, fast_h_);
  blend(main_, main_h_);
  blend(slow_, slow_h_);

  const double d = js_divergence(fast_, slow_);
  if (d > threshold_) {
    if (!above_) {
      above_ = true;
      return TrendShift{timestamp, d};
    }
  } else {
    above_ = false;
  }
  return std::nullopt;
}

EmotionEstimate aggregate(std::span<const WeightedRecommendation> inputs, std::span<const Anchor> anchors,
                          double intensity) {
  const std::size_t K = anchors.size();
  double total = 0.0;
  std::size_t present = 0;
  for (const auto& in : inputs) {
    if (in.distribution == nullptr) continue;
    ++present;
    if (in.distribution->size() != K)
      throw Error(ErrorKind::LabelSetMismatch, "recommendation over " + std::to_string(in.distribution->size()) +
                                                   " labels, expected " + std::to_string(K));
    if (!(in.weight >= 0.0)) throw Error(ErrorKind::InvariantViolation, "recommender weight must be nonnegative");
    total += in.weight;
  }
  if (present == 0) throw Error(ErrorKind::InvariantViolation, "no recommendations to aggregate");
  // Only zero-weight inputs present: fall back to an unweighted mean.
  const bool uniform = !(total > 0.0);

  EmotionEstimate e;
  e.distribution.assign(K, 0.0);
  for (const auto& in : inputs) {
    if (in.distribution == nullptr || (!uniform && in.weight == 0.0)) continue;
    const double w = uniform ? 1.0 / static_cast<double>(present) : in.weight / total;
    for (std::size_t k = 0; k < K; ++k) e.distribution[k] += w * (*in.distribution)[k];
  }
  const Anchor va = weighted_anchor(e.distribution, anchors);
  e.valence = va.valence;
  e.arousal = va.arousal;
  e.intensity = std::clamp(intensity, 0.0, 1.0);
  e.confidence = distribution_confidence(e.distribution);
  return e;
}

EmotionEstimate aggregate(const EmotionEstimate& rec1, const EmotionEstimate& rec2,
                          const std::optional<Distribution>& rec3, const std::array<double, 3>& weights,
                          std::span<const Anchor> anchors) {
  const WeightedRecommendation inputs[3] = {
      {&rec1.distribution, weights[0]},
      {&rec2.distribution, weights[1]},
      {rec3 ? &*rec3 : nullptr, weights[2]},
  };
  EmotionEstimate e = aggregate(inputs, anchors, rec1.intensity);
  e.subject = rec1.subject;
  e.timestamp = rec1.timestamp;
  return e;
}

}  // namespace kinaffect
