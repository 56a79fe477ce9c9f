#include <random>

#include "doctest.h"
#include "checks.hpp"
#include "helpers.hpp"
#include "sirius/errors.hpp"
#include "sirius/labeling.hpp"

using namespace sirius;
using sirius::testing::labels_from;
using sirius::testing::make_trajectory;

namespace {

using checks::random_labels;

std::string codes(const std::vector<ClassLabel>& labels) {
  std::string s;
  for (ClassLabel l : labels) s += to_string(l).front();
  return s;
}

}  // namespace

TEST_SUITE("labeling") {
  TEST_CASE("window before a single segment") {
    const auto in = labels_from(std::string(40, 'r') + std::string(15, 'i') + std::string(10, 'r'));
    const auto out = relabel_preintv(in, LabelingConfig{15});
    for (std::size_t i = 0; i < out.size(); ++i) {
      const ClassLabel want = i < 25 ? ClassLabel::robot
                              : i < 40 ? ClassLabel::preintv
                              : i < 55 ? ClassLabel::intv
                                       : ClassLabel::robot;
      CHECK(out[i] == want);
    }
  }

  TEST_CASE("window clipped at the episode start") {
    const auto out = relabel_preintv(labels_from("rrrrriiii"), LabelingConfig{15});
    CHECK(codes(out) == "pppppiiii");
  }

  TEST_CASE("close segments share the gap") {
    const auto in = labels_from(std::string(20, 'r') + std::string(5, 'i') + std::string(5, 'r') +
                                std::string(10, 'i'));
    const auto out = relabel_preintv(in, LabelingConfig{15});
    CHECK(out == checks::brute_force_relabel(in, 15));
    CHECK(codes(out) == std::string(5, 'r') + std::string(15, 'p') + std::string(5, 'i') + std::string(5, 'p') +
                            std::string(10, 'i'));
  }

  TEST_CASE("ell = 0 is the identity") {
    const auto in = labels_from("rrriirr");
    CHECK(relabel_preintv(in, LabelingConfig{0}) == in);
  }

  TEST_CASE("matches the per-index oracle on random sequences") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 500; ++trial) {
      const auto in = random_labels(rng);
      const int ell = static_cast<int>(rng() % 31);
      REQUIRE_MESSAGE(relabel_preintv(in, LabelingConfig{ell}) == checks::brute_force_relabel(in, ell), codes(in), " ell=", ell);
    }
  }

  TEST_CASE("idempotent, bounded and monotone in ell") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 300; ++trial) {
      const auto in = random_labels(rng);
      const int ell = static_cast<int>(rng() % 31);
      const auto once = relabel_preintv(in, LabelingConfig{ell});
      CHECK(relabel_preintv(once, LabelingConfig{ell}) == once);

      std::size_t preintv = 0;
      for (std::size_t i = 0; i < in.size(); ++i) {
        if (once[i] == ClassLabel::preintv) ++preintv;
        if (in[i] != ClassLabel::robot) CHECK(once[i] == in[i]);
      }
      CHECK(preintv <= static_cast<std::size_t>(ell) * intervention_segments(in).size());

      const auto wider = relabel_preintv(in, LabelingConfig{ell + 3});
      for (std::size_t i = 0; i < in.size(); ++i) {
        if (once[i] == ClassLabel::preintv) CHECK(wider[i] == ClassLabel::preintv);
      }
    }
  }

  TEST_CASE("demo trajectories are untouched") {
    const Trajectory t = make_trajectory("dddddd");
    CHECK(relabel_preintv(t, LabelingConfig{}) == t);
  }

  TEST_CASE("trajectory relabel keeps samples and provenance") {
    const Trajectory t = make_trajectory("rrrii", 2, 77);
    const Trajectory r = relabel_preintv(t, LabelingConfig{2});
    CHECK(codes(r.labels()) == "rppii");
    CHECK(r.provenance() == t.provenance());
    CHECK(r[0].state == t[0].state);
  }

  TEST_CASE("negative ell is a config error") { CHECK_THROWS_AS(LabelingConfig{-1}.validate(), ConfigError); }
}
