#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"

using namespace dacd;

namespace {

Descriptor one_hot(std::size_t i) {
  Descriptor d{};
  d[i] = 1.0f;
  return d;
}

/// Unit-L1 descriptor at Euclidean distance `dist` from one_hot(0):
/// mass (1-t) on bin 0 and t on bin 1 puts it at sqrt(2)*t.
Descriptor at_distance(double dist) {
  const double t = dist / std::sqrt(2.0);
  Descriptor d{};
  d[0] = static_cast<float>(1.0 - t);
  d[1] = static_cast<float>(t);
  return d;
}

Feature feat(double x, double y, const Descriptor& d, Origin o, Detector det = Detector::Corner) {
  return Feature({x, y, 2.0, det}, d, o);
}

FeatureSet set_of(std::vector<Feature> f, int w = 64, int h = 64) { return FeatureSet{"s", w, h, std::move(f)}; }

void expect_same(const ScoredFeature& a, const ScoredFeature& b) {
  EXPECT_EQ(a.loc, b.loc);  // exact
  EXPECT_EQ(a.matched_ref, b.matched_ref);
  EXPECT_TRUE(a.penalties == b.penalties);
  EXPECT_TRUE(a.feature == b.feature);
}

}  // namespace

TEST(CompareParams, DefaultsAndValidation) {
  CompareParams p;
  EXPECT_EQ(p.radius, 10.0);
  EXPECT_EQ(p.ratio_threshold, 0.4);
  EXPECT_EQ(p.d_a, 3.0);
  EXPECT_EQ(p.d_b, 2.0);
  EXPECT_DOUBLE_EQ(p.loc_ceiling, std::sqrt(2.0));
  EXPECT_NO_THROW(p.validate());
  for (auto bad : {CompareParams{0.0}, CompareParams{10, 2.0, 3.0}, CompareParams{10, 3, 2, 1.0},
                   CompareParams{10, 3, 2, 0.4, 0.0}, CompareParams{10, 3, 1.0}}) {
    EXPECT_THROW(bad.validate(), Error);
  }
}

TEST(CompareParams, PenaltyOrdering) {
  for (auto [da, db] : {std::pair{3.0, 2.0}, std::pair{5.0, 1.5}, std::pair{2.0, 1.01}}) {
    CompareParams p;
    p.d_a = da;
    p.d_b = db;
    ASSERT_NO_THROW(p.validate());
    EXPECT_LT(p.dense_factor(), p.match_factor());
    EXPECT_LT(p.match_factor(), std::exp(-1.0));
  }
}

TEST(MergeFeatureSets, WithMergeConcatenates) {
  std::mt19937_64 rng(1);
  FeatureSet raw = oracle::random_feature_set(rng, 5, 64, Origin::RawRef);
  FeatureSet virt = oracle::random_feature_set(rng, 7, 64, Origin::VirtualRef);
  raw.image_id = "r";
  const FeatureSet m = merge_feature_sets(raw, virt, MergeStrategy::WithMerge);
  ASSERT_EQ(m.size(), 12u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(m.features[i], raw.features[i]);
  for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(m.features[5 + i], virt.features[i]);
  EXPECT_EQ(std::count_if(m.features.begin(), m.features.end(), [](const Feature& f) { return f.origin() == Origin::RawRef; }), 5);
  EXPECT_EQ(std::count_if(m.features.begin(), m.features.end(), [](const Feature& f) { return f.origin() == Origin::VirtualRef; }), 7);
}

TEST(MergeFeatureSets, WithoutMergeIsVirtualAlone) {
  std::mt19937_64 rng(2);
  const FeatureSet raw = oracle::random_feature_set(rng, 5, 64, Origin::RawRef);
  const FeatureSet virt = oracle::random_feature_set(rng, 7, 64, Origin::VirtualRef);
  EXPECT_EQ(merge_feature_sets(raw, virt, MergeStrategy::WithoutMerge), virt);
}

TEST(MergeFeatureSets, EmptyVirtualKeepsRaw) {
  std::mt19937_64 rng(3);
  const FeatureSet raw = oracle::random_feature_set(rng, 5, 64, Origin::RawRef);
  EXPECT_EQ(merge_feature_sets(raw, set_of({}), MergeStrategy::WithMerge).features, raw.features);
}

TEST(MergeFeatureSets, DimensionMismatchThrows) {
  EXPECT_THROW(merge_feature_sets(set_of({}, 64, 64), set_of({}, 32, 64), MergeStrategy::WithMerge), Error);
}

TEST(RefIndex, EmptyIndexHasNoNeighbors) {
  const RefIndex idx = build_index(set_of({}));
  EXPECT_TRUE(neighbors_in_radius(idx, 3.0, 4.0, 10.0).empty());
  EXPECT_TRUE(neighbors_in_radius(idx, -100.0, 1e9, 1e6).empty());
}

TEST(RefIndex, MatchesLinearScan) {
  std::mt19937_64 rng(4);
  const FeatureSet refs = oracle::random_feature_set(rng, 100, 64, Origin::RawRef);
  const RefIndex idx = build_index(refs);
  std::uniform_real_distribution<double> u(-5.0, 69.0);
  std::uniform_real_distribution<double> rad(0.5, 20.0);
  for (int q = 0; q < 50; ++q) {
    const double x = (q % 3 == 0) ? std::floor(u(rng)) : u(rng);
    const double y = (q % 3 == 0) ? std::floor(u(rng)) : u(rng);
    const double r = (q % 4 == 0) ? 10.0 : rad(rng);
    EXPECT_EQ(idx.neighbors_in_radius(x, y, r), oracle::scan_radius(refs.features, x, y, r));
  }
  EXPECT_EQ(idx.features(), refs.features);  // index never reorders the stored set
}

TEST(RefIndex, DuplicatePositionsBothReturned) {
  const RefIndex idx = build_index(set_of({feat(5, 5, one_hot(0), Origin::RawRef), feat(5, 5, one_hot(1), Origin::RawRef)}));
  EXPECT_EQ(idx.neighbors_in_radius(6, 5, 2.0), (std::vector<std::size_t>{0, 1}));
}

TEST(RefIndex, RadiusBoundaryInclusive) {
  const RefIndex idx = build_index(set_of({feat(10.0, 0.0, one_hot(0), Origin::RawRef), feat(10.001, 0, one_hot(0), Origin::RawRef),
                                           feat(6.0, 8.0, one_hot(0), Origin::RawRef)}));
  EXPECT_EQ(idx.neighbors_in_radius(0.0, 0.0, 10.0), (std::vector<std::size_t>{0, 2}));
}

TEST(RefIndex, EqualDistanceOrderedByIndex) {
  const RefIndex idx = build_index(set_of({feat(20, 3, one_hot(0), Origin::RawRef), feat(3, 0, one_hot(0), Origin::RawRef),
                                           feat(0, 3, one_hot(0), Origin::RawRef), feat(1, 0, one_hot(0), Origin::RawRef)}));
  EXPECT_EQ(idx.neighbors_in_radius(0, 0, 5), (std::vector<std::size_t>{3, 1, 2}));
}

TEST(RefIndex, NonPositiveRadiusThrows) {
  const RefIndex idx = build_index(set_of({}));
  EXPECT_THROW(neighbors_in_radius(idx, 0, 0, 0.0), Error);
  EXPECT_THROW(neighbors_in_radius(idx, 0, 0, -1.0), Error);
}

TEST(QueryLoc, IdenticalDescriptorGivesZero) {
  const RefIndex idx = build_index(set_of({feat(12, 12, one_hot(3), Origin::RawRef), feat(13, 12, one_hot(5), Origin::RawRef)}));
  for (Detector det : {Detector::Corner, Detector::Dense}) {
    const ScoredFeature s = query_loc(feat(10, 10, one_hot(3), Origin::Query, det), idx, CompareParams{});
    EXPECT_EQ(s.loc, 0.0);
    EXPECT_EQ(s.matched_ref, 0u);
  }
}

TEST(QueryLoc, DensePenaltyArithmetic) {
  const RefIndex idx = build_index(set_of({feat(5, 5, at_distance(1.0), Origin::RawRef)}));
  const Feature q = feat(5, 5, one_hot(0), Origin::Query, Detector::Dense);
  const ScoredFeature s = query_loc(q, idx, CompareParams{});
  EXPECT_NEAR(s.loc, std::exp(-9.0), 1e-10);
  EXPECT_NEAR(s.loc, 1.2341e-4, 1e-8);
  EXPECT_TRUE(s.penalties.has(Penalty::DensePenalty));
  EXPECT_FALSE(s.penalties.has(Penalty::MatchPenalty));
}

TEST(QueryLoc, NoNeighborGivesCeiling) {
  const RefIndex idx = build_index(set_of({feat(40, 40, one_hot(0), Origin::RawRef)}));
  const ScoredFeature s = query_loc(feat(5, 5, one_hot(0), Origin::Query), idx, CompareParams{});
  EXPECT_DOUBLE_EQ(s.loc, std::sqrt(2.0));
  EXPECT_NEAR(s.loc, 1.41421, 1e-5);
  EXPECT_TRUE(s.penalties.has(Penalty::NoNeighborCeiling));
  EXPECT_FALSE(s.matched_ref.has_value());
}

TEST(QueryLoc, PenaltiesCompose) {
  // Nearest at 0.1, second at 1.0: ratio 0.1 < 0.4, and Dense.
  const RefIndex idx = build_index(set_of({feat(5, 5, at_distance(0.1), Origin::RawRef), feat(6, 5, at_distance(1.0), Origin::RawRef)}));
  const ScoredFeature s = query_loc(feat(5, 5, one_hot(0), Origin::Query, Detector::Dense), idx, CompareParams{});
  EXPECT_NEAR(s.loc, 0.1 * std::exp(-9.0) * std::exp(-4.0), 1e-12);
  EXPECT_TRUE(s.penalties.has(Penalty::DensePenalty));
  EXPECT_TRUE(s.penalties.has(Penalty::MatchPenalty));
}

TEST(QueryLoc, RequiresQueryOrigin) {
  const RefIndex idx = build_index(set_of({}));
  try {
    query_loc(feat(1, 1, one_hot(0), Origin::RawRef), idx, CompareParams{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("origin"), std::string::npos);
  }
}

TEST(RatioTest, StrongWhenNearestIsZero) { EXPECT_TRUE(ratio_test_passes(0.0, 0.8, 0.4)); }

TEST(RatioTest, WeakForCloseDistances) { EXPECT_FALSE(ratio_test_passes(0.5, 0.6, 0.4)); }

TEST(RatioTest, ZeroSecondRequiresZeroNearest) {
  EXPECT_TRUE(ratio_test_passes(0.0, 0.0, 0.4));
  EXPECT_FALSE(ratio_test_passes(0.3, 0.0, 0.4));
}

TEST(RatioTest, ThresholdIsStrict) {
  EXPECT_FALSE(ratio_test_passes(0.4, 1.0, 0.4));
  EXPECT_TRUE(ratio_test_passes(0.39, 1.0, 0.4));
}

TEST(IsStrongMatch, FromDescriptorDistances) {
  const Feature q = feat(5, 5, one_hot(0), Origin::Query);
  const RefIndex strong = build_index(set_of({feat(5, 6, at_distance(0.0), Origin::RawRef), feat(4, 5, at_distance(0.8), Origin::RawRef)}));
  const RefIndex weak = build_index(set_of({feat(5, 6, at_distance(0.5), Origin::RawRef), feat(4, 5, at_distance(0.6), Origin::RawRef)}));
  EXPECT_TRUE(is_strong_match(q, strong, CompareParams{}));
  EXPECT_FALSE(is_strong_match(q, weak, CompareParams{}));
}

TEST(IsStrongMatch, SingleNeighborNeverStrong) {
  const RefIndex idx = build_index(set_of({feat(5, 6, at_distance(0.0), Origin::RawRef), feat(50, 50, at_distance(1.0), Origin::RawRef)}));
  EXPECT_FALSE(is_strong_match(feat(5, 5, one_hot(0), Origin::Query), idx, CompareParams{}));
}

TEST(IsStrongMatch, ExactCopyOfNearestIsNotACompetitor) {
  // Reference set merged with itself: the copy must not act as the runner-up.
  const FeatureSet base = set_of({feat(5, 6, at_distance(0.1), Origin::RawRef), feat(4, 5, at_distance(1.0), Origin::RawRef)});
  const FeatureSet twice = merge_feature_sets(base, base, MergeStrategy::WithMerge);
  const Feature q = feat(5, 5, one_hot(0), Origin::Query);
  EXPECT_TRUE(is_strong_match(q, build_index(base), CompareParams{}));
  EXPECT_TRUE(is_strong_match(q, build_index(twice), CompareParams{}));
  EXPECT_EQ(query_loc(q, build_index(base), CompareParams{}).loc, query_loc(q, build_index(twice), CompareParams{}).loc);
}

TEST(ScoreImage, MatchesScanOracleSmall) {
  std::mt19937_64 rng(20);
  for (int trial = 0; trial < 50; ++trial) {
    const FeatureSet refs = oracle::random_feature_set(rng, 20, 40, Origin::RawRef);
    const FeatureSet query = oracle::random_feature_set(rng, 20, 40, Origin::Query);
    const auto got = score_image(query, build_index(refs), CompareParams{});
    const auto want = oracle::scan_score_image(query, refs, CompareParams{});
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) expect_same(got[i], want[i]);
  }
}

TEST(ScoreImage, MatchesScanOracleLarge) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const FeatureSet refs = oracle::random_feature_set(rng, 500, 256, Origin::VirtualRef);
    const FeatureSet query = oracle::random_feature_set(rng, 500, 256, Origin::Query);
    const auto got = score_image(query, build_index(refs), CompareParams{});
    const auto want = oracle::scan_score_image(query, refs, CompareParams{});
    for (std::size_t i = 0; i < got.size(); ++i) expect_same(got[i], want[i]);
  }
}

TEST(ScoreImage, SelfImageCornersScoreZero) {
  SynthRng rng(5);
  const Image img = render_scene(rng);
  const FeatureSet q = extract(img, ExtractionConfig{}, Origin::Query);
  const FeatureSet r = extract(img, ExtractionConfig{}, Origin::RawRef);
  for (const auto& s : score_image(q, build_index(r), CompareParams{})) {
    EXPECT_EQ(s.loc, 0.0);
  }
}

TEST(ScoreImage, EmptyReferenceGivesCeilingEverywhere) {
  std::mt19937_64 rng(6);
  const FeatureSet q = oracle::random_feature_set(rng, 30, 64, Origin::Query);
  const auto scored = score_image(q, build_index(set_of({})), CompareParams{});
  ASSERT_EQ(scored.size(), 30u);
  for (const auto& s : scored) {
    EXPECT_EQ(s.loc, CompareParams{}.loc_ceiling);
    EXPECT_TRUE(s.penalties.has(Penalty::NoNeighborCeiling));
  }
}

TEST(ScoreImage, LocWithinBounds) {
  std::mt19937_64 rng(7);
  CompareParams p;
  p.loc_ceiling = 0.5;  // also exercises the clamp
  const FeatureSet refs = oracle::random_feature_set(rng, 200, 64, Origin::RawRef);
  const FeatureSet q = oracle::random_feature_set(rng, 200, 64, Origin::Query);
  for (const auto& s : score_image(q, build_index(refs), p)) {
    EXPECT_GE(s.loc, 0.0);
    EXPECT_LE(s.loc, p.loc_ceiling);
  }
}

TEST(ScoreImage, MonotoneInNearestDistance) {
  // Single neighbour, fixed penalty set: loc grows with the descriptor distance.
  double prev = -1.0;
  for (double d = 0.0; d <= 1.4; d += 0.05) {
    const RefIndex idx = build_index(set_of({feat(5, 5, at_distance(d), Origin::RawRef)}));
    const double loc = query_loc(feat(5, 5, one_hot(0), Origin::Query, Detector::Dense), idx, CompareParams{}).loc;
    EXPECT_GE(loc, prev);
    prev = loc;
  }
}

TEST(ScoreImage, AddingReferenceNeverIncreasesBaseDistance) {
  std::mt19937_64 rng(8);
  CompareParams p;
  p.d_a = 1.5;  // penalties are irrelevant here; recover the base from the scan oracle
  FeatureSet refs = oracle::random_feature_set(rng, 40, 48, Origin::RawRef);
  const FeatureSet q = oracle::random_feature_set(rng, 40, 48, Origin::Query);
  auto base_of = [&](const FeatureSet& r) {
    std::vector<double> out;
    for (const auto& f : q.features) {
      double best = INFINITY;
      for (std::size_t j : build_index(r).neighbors_in_radius(f.keypoint.x, f.keypoint.y, p.radius)) {
        best = std::min(best, descriptor_distance(f.descriptor, r.features[j].descriptor));
      }
      out.push_back(best);
    }
    return out;
  };
  auto before = base_of(refs);
  for (int extra = 0; extra < 20; ++extra) {
    refs.features.push_back(oracle::random_feature(rng, 48, Origin::RawRef));
    const auto after = base_of(refs);
    for (std::size_t i = 0; i < after.size(); ++i) EXPECT_LE(after[i], before[i]);
    before = after;
  }
}

TEST(ScoresJson, CarriesPenalties) {
  const RefIndex idx = build_index(set_of({}));
  const auto j = scores_to_json(score_image(set_of({feat(1, 2, one_hot(0), Origin::Query, Detector::Dense)}), idx, CompareParams{}));
  ASSERT_EQ(j.size(), 1u);
  EXPECT_EQ(j[0]["penalties"][0], "no_neighbor");
  EXPECT_EQ(j[0]["detector"], "dense");
  EXPECT_TRUE(j[0]["matched_ref"].is_null());
}
