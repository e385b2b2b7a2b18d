// Serial reference vs OpenMP kernels on paper-sized inputs.
//
//   mapfilter_bench [--threads N] [--reps N]

#include <chrono>
#include <cstdio>
#include <random>
#include <string>

#include <omp.h>

#include "mapfilter/calib_filter.hpp"
#include "mapfilter/matcher.hpp"
#include "mapfilter/pooling.hpp"

using namespace mapfilter;

namespace {

template <typename F>
double best_of(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

PooledMatrix random_pooled(std::mt19937_64& rng, std::size_t c) {
  std::normal_distribution<double> n(0.0, 1.0);
  PooledMatrix m(c, kPyramidSlots);
  for (auto& v : m.values) v = n(rng);
  return m;
}

void report(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-34s serial %9.2f ms   omp %9.2f ms   speedup %5.2fx\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms);
}

}  // namespace

int main(int argc, char** argv) {
  int reps = 3;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--threads") omp_set_num_threads(std::stoi(argv[i + 1]));
    if (flag == "--reps") reps = std::stoi(argv[i + 1]);
  }
  std::printf("threads: %d\n", omp_get_max_threads());
  std::mt19937_64 rng(1);

  {
    // Conv3-sized activations.
    std::normal_distribution<float> n(0.0f, 1.0f);
    std::vector<FeatureTensor> tensors(200, FeatureTensor(13, 13, 384));
    for (auto& t : tensors) {
      for (auto& v : t.data) v = n(rng);
    }
    const double s = best_of(reps, [&] { pyramid_pool_batch_serial(tensors); });
    const double p = best_of(reps, [&] { pyramid_pool_batch(tensors); });
    report("pool 200 x 13x13x384", s, p);
  }
  {
    std::vector<CalibrationTriplet> triplets(50);
    for (auto& t : triplets) {
      t.query = random_pooled(rng, 384);
      t.reference = random_pooled(rng, 384);
      t.negative = random_pooled(rng, 384);
    }
    CalibConfig cfg;
    const double s = best_of(reps, [&] { greedy_filter_batch_serial(triplets, cfg); });
    const double p = best_of(reps, [&] { greedy_filter_batch(triplets, cfg); });
    report("greedy filter 50 triplets, C=384", s, p);
  }
  {
    std::vector<PooledMatrix> refs, queries;
    std::vector<std::string> ids;
    for (int i = 0; i < 1442; ++i) refs.push_back(random_pooled(rng, 384));
    for (int i = 0; i < 100; ++i) {
      queries.push_back(random_pooled(rng, 384));
      ids.push_back(std::to_string(i));
    }
    for (std::size_t kept : {384u, 199u}) {
      std::vector<std::size_t> idx;
      for (std::size_t c = 0; c < kept; ++c) idx.push_back(c);
      const ReferenceDatabase db(refs, ChannelSet(idx));
      const double s = best_of(reps, [&] { match_queries_serial(db, queries, ids, {}); });
      const double p = best_of(reps, [&] { match_queries(db, queries, ids, {}); });
      const std::string name = "match 100 q x 1442 refs, K=" + std::to_string(kept);
      report(name.c_str(), s, p);
    }
  }
  return 0;
}
