#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "mapfilter/calib_filter.hpp"
#include "mapfilter/errors.hpp"
#include "mapfilter/synth.hpp"
#include "test_util.hpp"

using namespace mapfilter;
using mapfilter::testing::pooled_from;
using mapfilter::testing::random_triplet;
using mapfilter::testing::TempDir;

namespace {

// P=1, C=2 worked example: q=[1,0], r=[1,1], n=[0,1].
CalibrationTriplet worked_triplet() {
  CalibrationTriplet t;
  t.query = pooled_from({1, 0});
  t.reference = pooled_from({1, 1});
  t.negative = pooled_from({0, 1});
  return t;
}

CalibConfig cutoff(double c) {
  CalibConfig cfg;
  cfg.gradient_cutoff = c;
  return cfg;
}

}  // namespace

TEST_CASE("l2_distance hand examples") {
  const auto a = pooled_from({1, 0});
  const auto b = pooled_from({1, 1});
  CHECK(l2_distance(a, a, ChannelSet::all(2)) == 0.0);
  CHECK(l2_distance(a, b, ChannelSet::all(2)) == doctest::Approx(1.0));
  CHECK(l2_distance(a, b, ChannelSet({1})) == doctest::Approx(1.0));
  CHECK(l2_distance(a, b, ChannelSet({0})) == 0.0);
  CHECK_THROWS_AS(l2_distance(a, b, ChannelSet{}), InvalidArgument);
}

TEST_CASE("removal_scores on the worked triplet") {
  const auto s = removal_scores(worked_triplet(), ChannelSet::all(2));
  REQUIRE(s.size() == 2);
  CHECK(s[0] == doctest::Approx(-1.0));
  CHECK(s[1] == doctest::Approx(1.0));
  CHECK_THROWS_AS(removal_scores(worked_triplet(), ChannelSet({0})), InvalidArgument);
}

TEST_CASE("removal_scores reduces to one term when two members coincide") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    auto t = random_triplet(rng, 6, 5);
    const auto kept = ChannelSet({0, 2, 3, 5});

    auto same_place = t;
    same_place.query = same_place.reference;
    auto s = removal_scores(same_place, kept);
    for (std::size_t k = 0; k < kept.size(); ++k) {
      const auto j = kept.indices()[k];
      CHECK(s[k] == doctest::Approx(l2_distance(t.reference, t.negative, kept.without(j))));
    }

    auto same_ref = t;
    same_ref.negative = same_ref.reference;
    s = removal_scores(same_ref, kept);
    for (std::size_t k = 0; k < kept.size(); ++k) {
      const auto j = kept.indices()[k];
      CHECK(s[k] == doctest::Approx(-l2_distance(t.query, t.reference, kept.without(j))));
      CHECK(s[k] <= 0.0);
    }
  }
}

TEST_CASE("greedy_filter on the worked triplet removes channel 1 then hits the floor") {
  const auto trace = greedy_filter(worked_triplet(), cutoff(0.1));
  CHECK(trace.removed == std::vector<std::size_t>{1});
  REQUIRE(trace.objective.size() == 2);
  CHECK(trace.objective[0] == doctest::Approx(0.0));
  CHECK(trace.objective[1] == doctest::Approx(1.0));
  CHECK(trace.separated);
  CHECK(synth::brute_force_greedy(worked_triplet(), 0.1) == trace.removed);
}

TEST_CASE("degenerate and infinite-cutoff triplets remove nothing") {
  CalibrationTriplet same;
  same.query = same.reference = same.negative = pooled_from({1, 2, 3, 4}, 2);
  CHECK(greedy_filter(same, cutoff(0.1)).removed.empty());

  std::mt19937_64 rng(17);
  for (int i = 0; i < 20; ++i) {
    const auto t = random_triplet(rng, 8, 5);
    CHECK(greedy_filter(t, cutoff(std::numeric_limits<double>::infinity())).removed.empty());
  }
}

TEST_CASE("greedy_filter preconditions") {
  CalibrationTriplet one;
  one.query = one.reference = one.negative = pooled_from({1});
  CHECK_THROWS_AS(greedy_filter(one, cutoff(0.1)), InvalidArgument);

  auto mismatched = worked_triplet();
  mismatched.negative = pooled_from({0, 1, 2});
  CHECK_THROWS_AS(greedy_filter(mismatched, cutoff(0.1)), InvalidArgument);
  CHECK_THROWS_AS(greedy_filter(worked_triplet(), cutoff(-0.5)), InvalidArgument);
}

TEST_CASE("each greedy step picks the exhaustive-oracle argmax") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> channels(2, 8);
  for (int i = 0; i < 100; ++i) {
    const auto t = random_triplet(rng, channels(rng), i % 2 ? 5 : 1);
    const auto trace = greedy_filter(t, cutoff(0.0));
    ChannelSet kept = ChannelSet::all(t.query.channels);
    for (std::size_t step = 0; step < trace.removed.size(); ++step) {
      const auto [j, score] = synth::brute_force_best_removal(t, kept);
      REQUIRE(trace.removed[step] == j);
      CHECK(trace.objective[step + 1] == doctest::Approx(score).epsilon(1e-12));
      kept = kept.without(j);
    }
  }
}

TEST_CASE("accepted removals improve the objective by at least the cut-off") {
  std::mt19937_64 rng(99);
  for (double c : {0.0, 0.05, 0.1, 0.3}) {
    for (int i = 0; i < 50; ++i) {
      const auto t = random_triplet(rng, 16, 5);
      const auto trace = greedy_filter(t, cutoff(c));
      REQUIRE(trace.objective.size() == trace.removed.size() + 1);
      for (std::size_t k = 1; k < trace.objective.size(); ++k) {
        CHECK(trace.objective[k] - trace.objective[k - 1] >= c);
      }
      const std::set<std::size_t> unique(trace.removed.begin(), trace.removed.end());
      CHECK(unique.size() == trace.removed.size());
      CHECK(trace.removed.size() < 16);
    }
  }
}

TEST_CASE("with a zero cut-off the loop stops at a local maximum or the one-map floor") {
  std::mt19937_64 rng(123);
  for (int i = 0; i < 100; ++i) {
    const auto t = random_triplet(rng, 12, i % 2 ? 5 : 1);
    const auto trace = greedy_filter(t, cutoff(0.0));
    ChannelSet kept = ChannelSet::all(12);
    for (auto j : trace.removed) kept = kept.without(j);
    if (kept.size() == 1) continue;
    const double current = trace.objective.back();
    for (double d : removal_scores(t, kept)) CHECK(d < current);
  }
}

TEST_CASE("cached leave-one-out distances match full recomputation") {
  std::mt19937_64 rng(77);
  const auto t = random_triplet(rng, 32, 5);
  TripletDistanceCache cache(t, ChannelSet::all(32));
  std::uniform_int_distribution<std::size_t> pick(0, 31);
  while (cache.kept_count() > 1) {
    const auto kept = cache.kept_set();
    CHECK(cache.qr_distance() == doctest::Approx(l2_distance(t.query, t.reference, kept)).epsilon(1e-9));
    CHECK(cache.rn_distance() == doctest::Approx(l2_distance(t.reference, t.negative, kept)).epsilon(1e-9));
    for (std::size_t j : kept) {
      CHECK(cache.qr_distance_without(j) ==
            doctest::Approx(l2_distance(t.query, t.reference, kept.without(j))).epsilon(1e-9));
    }
    std::size_t j = pick(rng);
    while (!cache.is_kept(j)) j = pick(rng);
    cache.remove(j);
  }
  CHECK_THROWS_AS(cache.remove(cache.kept_set().indices().front() == 0 ? 1 : 0), InvalidArgument);
}

TEST_CASE("aggregate hand example") {
  const auto r = aggregate({{0, 1}, {1}, {1, 2}}, 4);
  CHECK(r.removal_counts == std::vector<std::size_t>{1, 3, 1, 0});
  CHECK(r.kept_count == 3);
  CHECK(r.kept_set.indices() == std::vector<std::size_t>{0, 2, 3});
}

TEST_CASE("aggregate edge cases") {
  CHECK(aggregate({{}, {}}, 5).kept_set == ChannelSet::all(5));
  const auto single = aggregate({{5}}, 6);
  CHECK(single.kept_count == 5);
  CHECK(single.kept_set.indices() == std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK_THROWS_AS(aggregate({}, 4), InvalidArgument);
  CHECK_THROWS_AS(aggregate({{4}}, 4), InvalidArgument);
  CHECK_THROWS_AS(aggregate({{1, 1}}, 4), InvalidArgument);
}

TEST_CASE("aggregate is invariant to the order of calibration images") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t C = 20;
    std::vector<std::vector<std::size_t>> lists(10);
    for (auto& l : lists) {
      std::vector<std::size_t> all(C);
      std::iota(all.begin(), all.end(), std::size_t{0});
      std::shuffle(all.begin(), all.end(), rng);
      all.resize(std::uniform_int_distribution<std::size_t>(0, C - 1)(rng));
      l = all;
    }
    const auto a = aggregate(lists, C);
    std::shuffle(lists.begin(), lists.end(), rng);
    const auto b = aggregate(lists, C);
    CHECK(a.kept_set == b.kept_set);
    CHECK(a.removal_counts == b.removal_counts);
    std::size_t max_remaining = 0;
    for (const auto& l : lists) max_remaining = std::max(max_remaining, C - l.size());
    CHECK(a.kept_count == max_remaining);
  }
}

TEST_CASE("build_triplets is deterministic and respects the exclusion band") {
  std::mt19937_64 rng(1);
  std::vector<PooledMatrix> refs;
  for (int i = 0; i < 100; ++i) refs.push_back(mapfilter::testing::random_pooled(rng, 4, 5));
  std::vector<PooledMatrix> queries(refs.begin(), refs.begin() + 3);

  CalibConfig cfg;
  cfg.num_calibration_images = 3;
  cfg.rng_seed = 7;
  const std::vector<std::size_t> corr{10, 50, 95};
  const auto a = build_triplets(queries, refs, corr, cfg);
  const auto b = build_triplets(queries, refs, corr, cfg);
  REQUIRE(a.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a[i].negative_index == b[i].negative_index);
    CHECK(a[i].reference_index == corr[i]);
    CHECK(a[i].reference == refs[corr[i]]);
  }

  // Many draws around index 10: never inside [0, 30].
  std::vector<PooledMatrix> many(60, queries[0]);
  CalibConfig wide;
  wide.num_calibration_images = 60;
  wide.rng_seed = 3;
  const auto ts = build_triplets(many, refs, std::vector<std::size_t>(60, 10), wide);
  for (const auto& t : ts) CHECK(t.negative_index > 30);
}

TEST_CASE("build_triplets with 50 calibration images and error paths") {
  std::mt19937_64 rng(2);
  std::vector<PooledMatrix> refs;
  for (int i = 0; i < 200; ++i) refs.push_back(mapfilter::testing::random_pooled(rng, 4, 5));
  std::vector<PooledMatrix> queries(refs.begin(), refs.begin() + 60);
  std::vector<std::size_t> corr(60);
  std::iota(corr.begin(), corr.end(), std::size_t{0});
  CalibConfig cfg;  // defaults to 50 calibration images
  CHECK(build_triplets(queries, refs, corr, cfg).size() == 50);

  std::vector<PooledMatrix> small(refs.begin(), refs.begin() + 41);
  CalibConfig one;
  one.num_calibration_images = 1;
  CHECK_THROWS_AS(build_triplets(queries, small, {20}, one), InvalidArgument);
  CHECK_THROWS_AS(build_triplets(std::vector<PooledMatrix>(10, refs[0]), refs, corr, cfg),
                  InvalidArgument);
}

TEST_CASE("filter document round trip") {
  TempDir dir;
  FilterDocument doc;
  doc.layer_name = "conv3";
  doc.channels = 4;
  doc.result = aggregate({{0, 1}, {1}, {1, 2}}, 4);
  doc.config.rng_seed = 9;
  doc.negative_indices = {40, 41, 42};
  doc.separated = {true, false, true};
  doc.final_objective = {0.5, -0.25, 1.0};
  write_filter_document(doc, dir / "f.json");
  const auto back = read_filter_document(dir / "f.json");
  CHECK(back.layer_name == "conv3");
  CHECK(back.channels == 4);
  CHECK(back.result.kept_set == doc.result.kept_set);
  CHECK(back.result.removal_counts == doc.result.removal_counts);
  CHECK(back.result.per_image_removed == doc.result.per_image_removed);
  CHECK(back.config.rng_seed == 9);
  CHECK(back.separated == doc.separated);
}
