#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <fstream>

#include "mapfilter/errors.hpp"
#include "mapfilter/matcher.hpp"
#include "mapfilter/synth.hpp"
#include "mapfilter/text_io.hpp"
#include "test_util.hpp"

using namespace mapfilter;
using mapfilter::testing::pooled_from;
using mapfilter::testing::random_triplet;
using mapfilter::testing::TempDir;

namespace {

synth::SynthParams small_params() {
  auto p = synth::default_params(5);
  p.num_places = 40;
  p.num_calibration = 10;
  p.num_queries = 20;
  p.channels = 12;
  synth::assign_channels(p, 4);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("default parameters") {
  const auto p = synth::default_params();
  CHECK(p.num_places == 300);
  CHECK(p.num_calibration == 50);
  CHECK(p.num_queries == 100);
  CHECK(p.channels == 64);
  CHECK(p.signal_channels.size() == 16);
  CHECK(p.noise_channels.size() == 48);
  CHECK(p.seed == 42);
  p.validate();
}

TEST_CASE("generation is deterministic for a fixed seed") {
  const auto p = small_params();
  const auto a = synth::generate(p);
  const auto b = synth::generate(p);
  CHECK(a.reference.tensors == b.reference.tensors);
  CHECK(a.query.tensors == b.query.tensors);
  CHECK(a.calibration.tensors == b.calibration.tensors);

  TempDir d1, d2;
  synth::write_dataset(a, d1.path());
  synth::write_dataset(b, d2.path());
  for (const char* f : {"reference/manifest.json", "reference/ref_0007.fmap", "query/query_0003.fmap",
                        "calibration/calib_0009.fmap", "query_truth.txt", "calibration_truth.txt"}) {
    CHECK(slurp(d1 / f) == slurp(d2 / f));
  }

  auto other = p;
  other.seed = 6;
  synth::assign_channels(other, 4);
  CHECK(synth::generate(other).reference.tensors != a.reference.tensors);
}

TEST_CASE("written dataset reloads through the manifest") {
  TempDir dir;
  const auto ds = synth::generate(small_params());
  synth::write_dataset(ds, dir.path());
  const auto m = load_manifest(dir / "query/manifest.json");
  CHECK(m.entries.size() == 20);
  CHECK(load_tensors(m) == ds.query.tensors);
  CHECK(read_correspondences(dir / "query_truth.txt") == ds.query_truth);
}

TEST_CASE("no condition change makes queries equal their references") {
  auto p = small_params();
  p.condition_noise_scale = 0.0;
  p.appearance_shift = 0.0;
  const auto ds = synth::generate(p);
  for (std::size_t i = 0; i < ds.query.tensors.size(); ++i) {
    CHECK(ds.query.tensors[i] == ds.reference.tensors[ds.query_truth[i]]);
  }
  const ReferenceDatabase db(pyramid_pool_batch(ds.reference.tensors), ChannelSet::all(p.channels));
  const auto queries = pyramid_pool_batch(ds.query.tensors);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    CHECK(db.match(queries[i], {}).best_index == ds.query_truth[i]);
  }
}

TEST_CASE("signal and noise channels must partition the channel range") {
  auto p = small_params();
  p.noise_channels.push_back(p.signal_channels.front());
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p = small_params();
  p.noise_channels.pop_back();
  CHECK_THROWS_AS(synth::generate(p), InvalidArgument);
  p = small_params();
  p.num_queries = 100;
  CHECK_THROWS_AS(synth::generate(p), InvalidArgument);
}

TEST_CASE("brute-force best removal examples") {
  CalibrationTriplet t;
  t.query = pooled_from({1, 0});
  t.reference = pooled_from({1, 1});
  t.negative = pooled_from({0, 1});
  const auto [j, score] = synth::brute_force_best_removal(t, ChannelSet::all(2));
  CHECK(j == 1);
  CHECK(score == doctest::Approx(1.0));

  CalibrationTriplet same;
  same.query = same.reference = same.negative = pooled_from({3, 1, 4, 1, 5});
  const auto [k, zero] = synth::brute_force_best_removal(same, ChannelSet({1, 2, 4}));
  CHECK(k == 1);
  CHECK(zero == 0.0);
}

TEST_CASE("brute-force argmax agrees with removal_scores on random C=8 triplets") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) {
    const auto t = random_triplet(rng, 8, 5);
    const auto kept = ChannelSet::all(8);
    const auto s = removal_scores(t, kept);
    const auto arg = static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
    const auto [j, score] = synth::brute_force_best_removal(t, kept);
    CHECK(j == arg);
    CHECK(score == doctest::Approx(s[arg]).epsilon(1e-12));
  }
}

TEST_CASE("greedy trace equals the brute-force trace for small C") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<std::size_t> channels(2, 8);
  for (int i = 0; i < 200; ++i) {
    const auto t = random_triplet(rng, channels(rng), i % 2 ? 5 : 1);
    for (double c : {0.0, 0.1}) {
      CalibConfig cfg;
      cfg.gradient_cutoff = c;
      REQUIRE(greedy_filter(t, cfg).removed == synth::brute_force_greedy(t, c));
    }
  }
}
