#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "kinaffect/harness.hpp"
#include "kinaffect/recommenders.hpp"

using namespace kinaffect;

namespace {

constexpr std::size_t kSpeed = 0, kExpansion = 3, kJerk = 4, kFrequency = 5, kQom = 6;

NormalizedFeatures filled(double v) {
  NormalizedFeatures x;
  x.fill(v);
  return x;
}

std::vector<Anchor> default_anchors() { return EmotionLexicon{}.anchors(); }

void check_probability(const Distribution& p) {
  double s = 0.0;
  for (double v : p) {
    CHECK(v >= 0.0);
    s += v;
  }
  CHECK(std::abs(s - 1.0) <= 1e-9);
}

NormalizedFeatures random_features(Rng& rng) {
  NormalizedFeatures x;
  for (double& v : x) v = rng.uniform();
  return x;
}

Distribution random_distribution(Rng& rng, std::size_t k) {
  Distribution p(k);
  for (double& v : p) v = -std::log(1.0 - rng.uniform());
  renormalize(p);
  return p;
}

}  // namespace

TEST_CASE("circumplex map examples") {
  const auto zero = circumplex_map(filled(0.0));
  CHECK(zero.arousal == -1.0);
  CHECK(zero.valence == doctest::Approx(-0.2));

  auto x = filled(0.0);
  x[kSpeed] = x[kQom] = x[kFrequency] = 1.0;
  CHECK(circumplex_map(x).arousal == doctest::Approx(1.0));

  x = filled(0.0);
  x[kExpansion] = 1.0;
  x[kJerk] = 0.0;
  CHECK(circumplex_map(x).valence == doctest::Approx(1.0));
}

TEST_CASE("rec1 on an empty lexicon") {
  const EmotionLexicon lex;
  const RecommenderParams params;

  SUBCASE("at the happiness anchor") {
    // energy 0.85 -> arousal 0.7; 0.6 e + 0.4 (1 - j) = 0.85 -> valence 0.7.
    auto x = filled(0.0);
    x[kSpeed] = x[kQom] = x[kFrequency] = 0.85;
    x[kExpansion] = 1.0;
    x[kJerk] = 0.375;
    const auto e = rec1_behavioral(x, lex, params);
    CHECK(e.valence == doctest::Approx(0.7));
    CHECK(e.arousal == doctest::Approx(0.7));
    CHECK(e.top() == 0);
  }
  SUBCASE("at the origin gives the uniform distribution") {
    auto x = filled(0.0);
    x[kSpeed] = 1.0;  // energy 0.5
    x[kExpansion] = 0.5;
    x[kJerk] = 0.5;
    const auto e = rec1_behavioral(x, lex, params);
    for (double v : e.distribution) CHECK(v == doctest::Approx(0.25));
    CHECK(e.confidence == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("all-zero features") {
    // (v, a) = (-0.2, -1); Gaussian kernel at sigma 0.6 against each anchor.
    std::vector<double> w;
    for (const Anchor& a : default_anchors()) {
      const double d2 = std::pow(-0.2 - a.valence, 2) + std::pow(-1.0 - a.arousal, 2);
      w.push_back(std::exp(-d2 / (2 * 0.36)));
    }
    const double total = w[0] + w[1] + w[2] + w[3];
    const auto e = rec1_behavioral(filled(0.0), lex, params);
    REQUIRE(e.distribution.size() == 4);
    for (std::size_t k = 0; k < 4; ++k) CHECK(e.distribution[k] == doctest::Approx(w[k] / total).epsilon(1e-12));
    const double frozen[] = {0.006314092912615, 0.308484930422069, 0.013743443625235, 0.671457533040080};
    for (std::size_t k = 0; k < 4; ++k) CHECK(e.distribution[k] == doctest::Approx(frozen[k]).epsilon(1e-10));
    CHECK(e.confidence == doctest::Approx(0.479800435624384).epsilon(1e-10));
    CHECK(e.intensity == 0.0);
  }
}

TEST_CASE("rec1 ranks by distance for any kernel width") {
  Rng rng(5);
  const EmotionLexicon lex;
  for (int i = 0; i < 2000; ++i) {
    const auto x = random_features(rng);
    RecommenderParams a, b;
    a.circumplex_sigma = 0.6;
    b.circumplex_sigma = rng.uniform(0.05, 3.0);
    CHECK(rec1_behavioral(x, lex, a).top() == rec1_behavioral(x, lex, b).top());
  }
}

TEST_CASE("teaching") {
  const EngineConfig config;
  SUBCASE("constant vector") {
    EmotionLexicon lex(config);
    auto x = filled(0.3);
    x[kJerk] = 0.9;
    TeachSegment seg{0.0, 5.0, {}};
    for (int i = 0; i <= 50; ++i) seg.windows.push_back({i * 0.1, x});
    teach(lex, "happiness", seg);
    const auto& p = lex.prototype(0);
    CHECK(p.count == 40);  // windows ending in (1, 5]
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
      CHECK(p.mean[i] == doctest::Approx(x[i]));
      CHECK(p.spread(i, lex.sigma_floor()) == lex.sigma_floor());
    }
    RecommenderParams params;
    params.blend_full_windows = 40;  // beta = 1
    CHECK(rec1_behavioral(x, lex, params).top() == 0);
  }
  SUBCASE("two segments pool into one mean") {
    EmotionLexicon lex(config);
    Rng rng(9);
    std::vector<NormalizedFeatures> all;
    for (double start : {0.0, 10.0}) {
      TeachSegment seg{start, start + 5.0, {}};
      for (int i = 11; i <= 50; ++i) {
        const auto x = random_features(rng);
        seg.windows.push_back({start + i * 0.1, x});
        all.push_back(x);
      }
      teach(lex, "wonder", seg);
    }
    const auto index = lex.labels().find("wonder");
    REQUIRE(index);
    const auto& p = lex.prototype(*index);
    CHECK(p.count == all.size());
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
      double m = 0.0;
      for (const auto& x : all) m += x[i];
      m /= static_cast<double>(all.size());
      double v = 0.0;
      for (const auto& x : all) v += (x[i] - m) * (x[i] - m);
      v /= static_cast<double>(all.size());
      CHECK(p.mean[i] == doctest::Approx(m).epsilon(1e-12));
      CHECK(p.spread(i, 0.0) == doctest::Approx(std::sqrt(v)).epsilon(1e-10));
    }
  }
  SUBCASE("a 2 s segment is too short and changes nothing") {
    EmotionLexicon lex(config);
    const EmotionLexicon before = lex;
    TeachSegment seg{0.0, 2.0, {{1.5, filled(0.5)}, {2.0, filled(0.5)}}};
    try {
      teach(lex, "calm", seg);
      FAIL("expected SegmentTooShort");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::SegmentTooShort);
    }
    CHECK(lex == before);
  }
  SUBCASE("taught labels get a quadrant anchor") {
    EmotionLexicon lex(config);
    const auto k = lex.intern("glee");
    auto x = filled(1.0);
    x[kJerk] = 0.0;
    lex.accumulate(k, x);
    CHECK(lex.prototype(k).anchor == Anchor{0.7, 0.7});
    CHECK(quadrant_anchor(0.0, -0.1) == Anchor{0.7, -0.7});
  }
}

TEST_CASE("adaptation") {
  EmotionLexicon lex;
  lex.accumulate(0, filled(0.5));
  SUBCASE("zero rate") {
    const auto before = lex;
    CHECK_FALSE(adapt(lex, 0, filled(1.0), 0.0, std::nullopt));
    CHECK(lex == before);
  }
  SUBCASE("one affine step") {
    CHECK(adapt(lex, 0, filled(1.0), 0.05, std::nullopt));
    for (double m : lex.prototype(0).mean) CHECK(m == doctest::Approx(0.525));
  }
  SUBCASE("agreement allows the step") {
    CHECK(adapt(lex, 0, filled(1.0), 0.05, true));
  }
  SUBCASE("disagreement suppresses it") {
    const auto before = lex;
    CHECK_FALSE(adapt(lex, 0, filled(1.0), 0.05, false));
    CHECK(lex == before);
  }
  SUBCASE("untaught labels are left alone") {
    const auto before = lex;
    CHECK_FALSE(adapt(lex, 2, filled(1.0), 0.05, std::nullopt));
    CHECK(lex == before);
  }
}

TEST_CASE("rec2 contextual") {
  const auto anchors = default_anchors();
  EmotionEstimate a, b;
  a.distribution = {1, 0, 0, 0};
  b.distribution = {0, 1, 0, 0};

  SUBCASE("single person is unchanged") {
    GroupFeatures g{1, 1.0, 1.0};
    const std::vector<EmotionEstimate> in = {a};
    CHECK(rec2_contextual(in, g, anchors) == in);
  }
  SUBCASE("zero cohesion is unchanged") {
    GroupFeatures g{2, 0.0, -0.5};
    const std::vector<EmotionEstimate> in = {a, b};
    CHECK(rec2_contextual(in, g, anchors) == in);
  }
  SUBCASE("full cohesion goes to the mean") {
    GroupFeatures g{2, 1.0, 1.0};
    const std::vector<EmotionEstimate> in = {a, b};
    for (const auto& e : rec2_contextual(in, g, anchors)) {
      CHECK(e.distribution == Distribution{0.5, 0.5, 0.0, 0.0});
      CHECK(e.valence == doctest::Approx(0.7));
      CHECK(e.arousal == doctest::Approx(0.0));
    }
  }
  SUBCASE("mismatched label counts") {
    b.distribution = {0, 1, 0, 0, 0};
    GroupFeatures g{2, 1.0, 1.0};
    const std::vector<EmotionEstimate> in = {a, b};
    CHECK_THROWS_AS(rec2_contextual(in, g, anchors), Error);
  }
}

TEST_CASE("rec3 longitudinal") {
  SUBCASE("constant input is a fixed point") {
    LongitudinalState s = LongitudinalState::from(EngineConfig{});
    const Distribution p = {0.1, 0.2, 0.3, 0.4};
    for (int k = 0; k <= 600; ++k) CHECK_FALSE(s.update(p, k * 0.1));
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(s.fast()[i] == doctest::Approx(p[i]));
      CHECK(s.main()[i] == doctest::Approx(p[i]));
      CHECK(s.slow()[i] == doctest::Approx(p[i]));
    }
    CHECK(js_divergence(s.fast(), s.slow()) == doctest::Approx(0.0));
  }
  SUBCASE("step response reaches its midpoint after one half-life") {
    // Discrete EMA at 0.1 s hops: m_k = 1 - 2^(-0.1 k / 5).
    int oracle_k = 0;
    while (1.0 - std::exp2(-0.1 * oracle_k / 5.0) < 0.5) ++oracle_k;
    LongitudinalState s = LongitudinalState::from(EngineConfig{});
    s.update({1, 0, 0, 0}, 0.0);
    int k = 0;
    while (s.main()[1] < 0.5) {
      ++k;
      s.update({0, 1, 0, 0}, k * 0.1);
    }
    CHECK(std::abs(k - oracle_k) <= 1);
    CHECK(std::abs(k * 0.1 - 5.0) <= 0.1 + 1e-9);
  }
  SUBCASE("trend shift fires once on the rising edge") {
    LongitudinalState s = LongitudinalState::from(EngineConfig{});
    for (int k = 0; k < 100; ++k) s.update({1, 0, 0, 0}, k * 0.1);
    int shifts = 0;
    for (int k = 100; k < 200; ++k)
      if (s.update({0, 0, 0, 1}, k * 0.1)) ++shifts;
    CHECK(shifts == 1);
  }
  SUBCASE("identical distributions have zero divergence") {
    const Distribution p = {0.25, 0.25, 0.5};
    CHECK(js_divergence(p, p) == 0.0);
    CHECK(js_divergence(Distribution{1, 0}, Distribution{0, 1}) == doctest::Approx(1.0));
  }
  SUBCASE("EMAs stay probability vectors") {
    Rng rng(21);
    LongitudinalState s = LongitudinalState::from(EngineConfig{});
    for (int k = 0; k < 5000; ++k) {
      s.update(random_distribution(rng, 4), k * 0.1);
      check_probability(s.fast());
      check_probability(s.main());
      check_probability(s.slow());
    }
  }
}

TEST_CASE("aggregation") {
  const auto anchors = default_anchors();
  EmotionEstimate r1, r2;
  r1.distribution = {1, 0, 0, 0};
  r2.distribution = {0, 1, 0, 0};
  const Distribution r3 = {0, 1, 0, 0};

  SUBCASE("worked example") {
    const auto e = aggregate(r1, r2, r3, {0.4, 0.3, 0.3}, anchors);
    CHECK(e.distribution[0] == doctest::Approx(0.4));
    CHECK(e.distribution[1] == doctest::Approx(0.6));
    const double h = -(0.4 * std::log(0.4) + 0.6 * std::log(0.6));
    CHECK(e.confidence == doctest::Approx(1.0 - h / std::log(4.0)));
    CHECK(e.confidence == doctest::Approx(0.5145247027726656).epsilon(1e-12));
  }
  SUBCASE("degenerate weights select rec1") {
    CHECK(aggregate(r1, r2, r3, {1, 0, 0}, anchors).distribution == r1.distribution);
  }
  SUBCASE("equal inputs are a fixed point") {
    r1.distribution = r2.distribution = {0.1, 0.2, 0.3, 0.4};
    const auto e = aggregate(r1, r2, r1.distribution, {0.4, 0.3, 0.3}, anchors);
    for (std::size_t k = 0; k < 4; ++k) CHECK(e.distribution[k] == doctest::Approx(r1.distribution[k]));
  }
  SUBCASE("absent rec3 renormalizes the remaining weights") {
    const auto e = aggregate(r1, r2, std::nullopt, {0.4, 0.4, 0.2}, anchors);
    CHECK(e.distribution[0] == doctest::Approx(0.5));
  }
  SUBCASE("label-set mismatch") {
    r2.distribution = {0, 1, 0, 0, 0};
    CHECK_THROWS_AS(aggregate(r1, r2, r3, {0.4, 0.3, 0.3}, anchors), Error);
  }
}

TEST_CASE("every emitted distribution is a probability vector") {
  Rng rng(1234);
  const EngineConfig config;
  const RecommenderParams params = RecommenderParams::from(config);
  for (int trial = 0; trial < 300; ++trial) {
    EmotionLexicon lex(config);
    if (rng.uniform() < 0.5) lex.intern("wonder");
    for (int i = 0; i < static_cast<int>(rng.uniform(0, 150)); ++i)
      lex.accumulate(static_cast<std::size_t>(rng.uniform(0, static_cast<double>(lex.size()))), random_features(rng));
    const auto anchors = lex.anchors();
    std::vector<EmotionEstimate> people;
    for (int n = 0; n < 3; ++n) {
      people.push_back(rec1_behavioral(random_features(rng), lex, params));
      check_probability(people.back().distribution);
    }
    GroupFeatures g{3, rng.uniform(), rng.uniform(-1, 1)};
    const auto ctx = rec2_contextual(people, g, anchors);
    for (std::size_t n = 0; n < ctx.size(); ++n) {
      check_probability(ctx[n].distribution);
      const Distribution prior = random_distribution(rng, lex.size());
      const auto e = aggregate(people[n], ctx[n], prior, {rng.uniform(), rng.uniform(), rng.uniform()}, anchors);
      check_probability(e.distribution);
      for (std::size_t k = 0; k < lex.size(); ++k) {
        const double lo = std::min({people[n].distribution[k], ctx[n].distribution[k], prior[k]});
        const double hi = std::max({people[n].distribution[k], ctx[n].distribution[k], prior[k]});
        CHECK(e.distribution[k] >= lo - 1e-12);
        CHECK(e.distribution[k] <= hi + 1e-12);
      }
      CHECK(e.confidence >= 0.0);
      CHECK(e.confidence <= 1.0);
      CHECK(std::abs(e.valence) <= 1.0);
      CHECK(std::abs(e.arousal) <= 1.0);
    }
  }
}
