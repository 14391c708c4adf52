// Serial vs OpenMP timings for the three batch kernels, with a max-abs-diff
// column proving the parallel paths reproduce the serial results exactly.
//
//   arguq_bench [scale]    scale multiplies the workload sizes (default 1)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "arguq/evalharness.hpp"
#include "arguq/qbaf.hpp"
#include "arguq/rng.hpp"
#include "arguq/uq.hpp"

namespace {

using Clock = std::chrono::steady_clock;
using arguq::SubStream;

double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

arguq::qbaf::ArgumentNode random_tree(SubStream& stream) {
  arguq::qbaf::ArgumentNode root;
  root.id = "root";
  root.base_score = stream.next_double();

  struct Slot {
    arguq::qbaf::ArgumentNode* node;
    int level;
  };
  std::vector<Slot> frontier{{&root, 0}};
  int serial = 0;
  while (!frontier.empty()) {
    Slot slot = frontier.back();
    frontier.pop_back();
    if (slot.level >= 3) continue;
    auto fanout = static_cast<int>(stream.next_index(4));  // 0..3 children
    // Reserve before pushing: the frontier keeps pointers into this vector.
    slot.node->children.reserve(static_cast<std::size_t>(fanout));
    for (int c = 0; c < fanout; ++c) {
      arguq::qbaf::ArgumentNode child;
      child.id = slot.node->id + "." + std::to_string(serial++);
      child.base_score = stream.next_double();
      child.polarity = stream.next_index(2) == 0
                           ? arguq::qbaf::Polarity::Support
                           : arguq::qbaf::Polarity::Attack;
      slot.node->children.push_back(std::move(child));
      frontier.push_back({&slot.node->children.back(), slot.level + 1});
    }
  }
  return root;
}

arguq::uq::SimilarityMatrix random_similarity(SubStream& stream, int n) {
  arguq::uq::SimilarityMatrix sim(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double v = stream.next_double();
      sim.set(i, j, v);
      sim.set(j, i, v);
    }
  }
  return sim;
}

void report(const char* name, std::size_t items, double serial_ms,
            double parallel_ms, double max_diff) {
  std::printf("%-24s %9zu %11.1f %11.1f %8.2fx %10.3g\n", name, items,
              serial_ms, parallel_ms, serial_ms / parallel_ms, max_diff);
}

}  // namespace

int main(int argc, char** argv) {
  double scale = 1.0;
  if (argc > 1) scale = std::strtod(argv[1], nullptr);
  if (!(scale > 0.0)) {
    std::fprintf(stderr, "usage: arguq_bench [positive scale]\n");
    return 2;
  }

  std::printf("%-24s %9s %11s %11s %9s %10s\n", "kernel", "items",
              "serial ms", "omp ms", "speedup", "max |diff|");

  {
    auto count = static_cast<std::size_t>(100000 * scale);
    SubStream stream(arguq::fnv1a64("bench-trees"), 0);
    std::vector<arguq::qbaf::ArgumentNode> roots;
    roots.reserve(count);
    for (std::size_t i = 0; i < count; ++i) roots.push_back(random_tree(stream));

    auto t0 = Clock::now();
    auto serial = arguq::qbaf::evaluate_strength_batch(roots, false);
    double serial_ms = elapsed_ms(t0);
    t0 = Clock::now();
    auto parallel = arguq::qbaf::evaluate_strength_batch(roots, true);
    double parallel_ms = elapsed_ms(t0);

    double max_diff = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      max_diff = std::max(max_diff, std::fabs(serial[i].root_strength -
                                              parallel[i].root_strength));
      for (const auto& [id, v] : serial[i].strengths) {
        max_diff =
            std::max(max_diff, std::fabs(v - parallel[i].strengths.at(id)));
      }
    }
    report("tree evaluation", count, serial_ms, parallel_ms, max_diff);
  }

  {
    auto count = static_cast<std::size_t>(4000 * scale);
    SubStream stream(arguq::fnv1a64("bench-eccentricity"), 0);
    std::vector<arguq::uq::SimilarityMatrix> sims;
    sims.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      sims.push_back(
          random_similarity(stream, 16 + static_cast<int>(stream.next_index(17))));
    }

    auto t0 = Clock::now();
    auto serial = arguq::uq::eccentricity_batch(sims, false);
    double serial_ms = elapsed_ms(t0);
    t0 = Clock::now();
    auto parallel = arguq::uq::eccentricity_batch(sims, true);
    double parallel_ms = elapsed_ms(t0);

    double max_diff = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      max_diff = std::max(max_diff, std::fabs(serial[i] - parallel[i]));
    }
    report("eccentricity", count, serial_ms, parallel_ms, max_diff);
  }

  {
    auto resamples = static_cast<int>(100000 * scale);
    const std::size_t n = 500;
    SubStream stream(arguq::fnv1a64("bench-bootstrap"), 0);
    std::vector<std::uint8_t> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = stream.next_double() < 0.8 ? 1 : 0;
      b[i] = stream.next_double() < 0.6 ? 1 : 0;
    }
    std::uint64_t key = arguq::fnv1a64("bench-bootstrap-key");

    auto t0 = Clock::now();
    auto serial =
        arguq::evalharness::bootstrap_diff_samples(a, b, key, resamples, false);
    double serial_ms = elapsed_ms(t0);
    t0 = Clock::now();
    auto parallel =
        arguq::evalharness::bootstrap_diff_samples(a, b, key, resamples, true);
    double parallel_ms = elapsed_ms(t0);

    double max_diff = 0.0;
    for (int r = 0; r < resamples; ++r) {
      max_diff = std::max(
          max_diff, std::fabs(serial[static_cast<std::size_t>(r)] -
                              parallel[static_cast<std::size_t>(r)]));
    }
    report("bootstrap resamples", static_cast<std::size_t>(resamples),
           serial_ms, parallel_ms, max_diff);
  }

  return 0;
}
