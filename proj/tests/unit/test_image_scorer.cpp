#include <doctest.h>

#include <numeric>

#include "helpers.hpp"
#include "sdss/image_scorer.hpp"
#include "sdss/oracle.hpp"
#include "sdss/pixel_sampler.hpp"

using namespace sdss;
using testing::I;
using testing::map_of;

namespace {

// 4x4: class 0 on 12 pixels with 6 correct, class 1 on 4 pixels all correct.
std::pair<LabelMap, LabelMap> worked_example() {
  const LabelMap gt = map_of(4, 4, 2, {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1});
  const LabelMap pseudo = map_of(4, 4, 2, {0, 0, 0, 0, 0, 0, 1, 1, 1, I, I, 1, 1, 1, 1, 1});
  return {pseudo, gt};
}

LabelMap permuted(const LabelMap& m, const std::vector<Label>& perm) {
  LabelMap out = m;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!is_ignore(out[i])) out[i] = perm[out[i]];
  return out;
}

}  // namespace

TEST_SUITE("image_scorer") {

TEST_CASE("tally counts GT classes and refined matches") {
  const ClassTally t = tally(map_of(4, 1, 2, {0, I, 1, I}), map_of(4, 1, 2, {0, 0, 1, I}));
  CHECK(t.n_class == std::vector<std::int64_t>{2, 1});
  CHECK(t.n_correct == std::vector<std::int64_t>{1, 1});
  CHECK(t.n_image == 4);
  CHECK(t.n_valid() == 3);
  CHECK(t.classes_present() == 2);
  CHECK(t.consistent());
}

TEST_CASE("tally of an all-ignore refined map has no correct pixels") {
  const ClassTally t = tally(LabelMap(3, 3, 4), map_of(3, 3, 4, {0, 1, 2, 3, 0, 1, 2, 3, 0}));
  CHECK(std::accumulate(t.n_correct.begin(), t.n_correct.end(), std::int64_t{0}) == 0);
}

TEST_CASE("single class, fully correct: counts equal and score zero") {
  const LabelMap gt(5, 5, 3, Label{1});
  const ClassTally t = tally(gt, gt);
  CHECK(t.n_correct[1] == 25);
  CHECK(t.n_class[1] == 25);
  CHECK(t.n_image == 25);
  CHECK(score(t) == 0.0);
}

TEST_CASE("worked 4x4 example scores 0.875") {
  const auto [pseudo, gt] = worked_example();
  const ImageScore s = score_image(pseudo, gt, "x");
  CHECK(s.tally.n_class == std::vector<std::int64_t>{12, 4});
  CHECK(s.tally.n_correct == std::vector<std::int64_t>{6, 4});
  CHECK(s.score == doctest::Approx(0.875).epsilon(1e-15));
  CHECK(std::abs(oracle_score(pseudo, gt) - 0.875) <= 1e-12);
}

TEST_CASE("no correct pixels gives zero") {
  const LabelMap gt = map_of(2, 2, 3, {0, 1, 2, 0});
  CHECK(score_image(map_of(2, 2, 3, {1, 2, 0, 1}), gt).score == 0.0);
  CHECK(score_image(LabelMap(2, 2, 3), gt).score == 0.0);
  CHECK(oracle_score(LabelMap(2, 2, 3), gt) == 0.0);
}

TEST_CASE("two classes at 50/50, perfect prediction: 1.0") {
  const LabelMap gt = map_of(2, 2, 2, {0, 0, 1, 1});
  CHECK(score_image(gt, gt).score == 1.0);
}

TEST_CASE("empty image is an error") {
  ClassTally t;
  t.n_class = {0};
  t.n_correct = {0};
  CHECK_THROWS_AS(score(t), Error);
}

TEST_CASE("ignore_in_total switches the denominator to valid pixels") {
  // gt: 2 px of class 0, 2 px of class 1, 4 px ignore; everything correct.
  const LabelMap gt = map_of(4, 2, 2, {0, 0, 1, 1, I, I, I, I});
  const LabelMap pseudo = map_of(4, 2, 2, {0, 0, 1, 1, 0, 0, 0, 0});
  CHECK(score_image(pseudo, gt, "", {true, true}).score == doctest::Approx(1.5));
  CHECK(score_image(pseudo, gt, "", {false, true}).score == doctest::Approx(1.0));
  CHECK(std::abs(oracle_score(pseudo, gt, {false, true}) - 1.0) <= 1e-12);
}

TEST_CASE("class_balance=false sums plain correctness ratios") {
  const auto [pseudo, gt] = worked_example();
  CHECK(score_image(pseudo, gt, "", {true, false}).score == doctest::Approx(1.5));
  CHECK(std::abs(oracle_score(pseudo, gt, {true, false}) - 1.5) <= 1e-12);
}

TEST_CASE("score bounds and invariances on random maps") {
  Rng rng(31);
  for (int t = 0; t < 200; ++t) {
    const std::size_t k = 1 + rng.below(12);
    const std::size_t w = 1 + rng.below(20), h = 1 + rng.below(20);
    const LabelMap gt = testing::random_map(rng, w, h, k, rng.uniform(0.0, 0.4));
    const LabelMap pseudo = testing::random_map(rng, w, h, k, rng.uniform(0.0, 0.4));
    const ImageScore s = score_image(pseudo, gt);
    const double covered = static_cast<double>(s.tally.n_valid()) / static_cast<double>(s.tally.n_image);
    CHECK(s.score >= 0.0);
    CHECK(s.score <= static_cast<double>(s.tally.classes_present()) - covered + 1e-12);

    std::vector<Label> perm(k);
    std::iota(perm.begin(), perm.end(), Label{0});
    for (std::size_t i = k; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    CHECK(std::abs(score_image(permuted(pseudo, perm), permuted(gt, perm)).score - s.score) <= 1e-12);

    std::vector<std::size_t> order(gt.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    LabelMap sg = gt, sp = pseudo;
    for (std::size_t i = 0; i < order.size(); ++i) {
      sg[i] = gt[order[i]];
      sp[i] = pseudo[order[i]];
    }
    CHECK(std::abs(score_image(sp, sg).score - s.score) <= 1e-12);

    const std::size_t f = 2 + rng.below(3);
    LabelMap ug(w * f, h * f, k), up(w * f, h * f, k);
    for (std::size_t y = 0; y < h * f; ++y)
      for (std::size_t x = 0; x < w * f; ++x) {
        ug[y * w * f + x] = gt.at(x / f, y / f);
        up[y * w * f + x] = pseudo.at(x / f, y / f);
      }
    CHECK(std::abs(score_image(up, ug).score - s.score) <= 1e-12);
  }
}

TEST_CASE("more correct pixels never lowers the score") {
  Rng rng(8);
  for (int t = 0; t < 100; ++t) {
    const LabelMap gt = testing::random_map(rng, 12, 12, 6, 0.1);
    LabelMap pseudo = testing::random_map(rng, 12, 12, 6, 0.3);
    double last = score_image(pseudo, gt).score;
    for (std::size_t p = 0; p < gt.size(); ++p) {
      if (is_ignore(gt[p]) || pseudo[p] == gt[p]) continue;
      pseudo[p] = gt[p];
      const double now = score_image(pseudo, gt).score;
      CHECK(now >= last);
      last = now;
    }
  }
}

TEST_CASE("equal correctness ratio r with full coverage gives r*(C-1)") {
  // Each of C classes covers 10 pixels; 7 of each are correct.
  for (std::size_t c = 1; c <= 19; ++c) {
    LabelMap gt(10, c, 19), pseudo(10, c, 19);
    for (std::size_t y = 0; y < c; ++y)
      for (std::size_t x = 0; x < 10; ++x) {
        gt[y * 10 + x] = static_cast<Label>(y);
        pseudo[y * 10 + x] = x < 7 ? static_cast<Label>(y) : kIgnore;
      }
    CHECK(std::abs(score_image(pseudo, gt).score - 0.7 * static_cast<double>(c - 1)) <= 1e-12);
  }
}

}  // TEST_SUITE
