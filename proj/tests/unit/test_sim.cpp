#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "sdss/image_scorer.hpp"
#include "sdss/oracle.hpp"
#include "sdss/pixel_sampler.hpp"
#include "sdss/sim.hpp"
#include "sdss/stats_report.hpp"

using namespace sdss;

TEST_SUITE("sim_oracle") {

TEST_CASE("rng is the named 64-bit Mersenne Twister") {
  Rng rng(5489);
  CHECK(rng.next() == 14514284786278117030ull);  // first output of mt19937_64 for its default seed
  CHECK(Rng::kAlgorithm == "mt19937_64");
  Rng a(1), b(1);
  for (int i = 0; i < 100; ++i) CHECK(a.below(7) == b.below(7));
}

TEST_CASE("rng distributions stay in range") {
  Rng rng(9);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(rng.below(3) < 3);
  }
  const std::vector<double> w = {0.0, 1.0, 0.0};
  for (int i = 0; i < 100; ++i) CHECK(rng.weighted(w) == 1);
}

TEST_CASE("one class without ignore gives a uniform map") {
  SceneSpec s = SceneSpec::balanced(20, 10, 3, 1, 4);
  const LabelMap m = gen_label_map(s);
  CHECK(std::all_of(m.data().begin(), m.data().end(), [](Label l) { return l == 0; }));
}

TEST_CASE("same seed, same map") {
  const SceneSpec s = SceneSpec::balanced(40, 30, 6, 4, 99);
  CHECK(gen_label_map(s) == gen_label_map(s));
  SceneSpec t = s;
  t.seed = 100;
  CHECK_FALSE(gen_label_map(s) == gen_label_map(t));
}

TEST_CASE("realized fractions on a 512x512 scene") {
  SceneSpec s;
  s.width = s.height = 512;
  s.num_classes = 3;
  s.area_fractions = {0.5, 0.3, 0.2};
  s.blob_size = 4096;
  s.seed = 1;
  const std::vector<LabelMap> maps = {gen_label_map(s)};
  const auto h = class_histogram(maps);
  const double n = 512.0 * 512.0;
  CHECK(std::abs(h[0] / n - 0.5) <= 0.02);
  CHECK(std::abs(h[1] / n - 0.3) <= 0.02);
  CHECK(std::abs(h[2] / n - 0.2) <= 0.02);
}

TEST_CASE("regions are contiguous rather than noise") {
  const LabelMap m = gen_label_map(SceneSpec::balanced(64, 64, 4, 4, 3));
  std::size_t same = 0, pairs = 0;
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x + 1 < 64; ++x, ++pairs) same += m.at(x, y) == m.at(x + 1, y);
  // Per-pixel noise over 4 balanced classes would agree about a quarter of the time.
  CHECK(static_cast<double>(same) / static_cast<double>(pairs) > 0.8);
}

TEST_CASE("infeasible scene specs") {
  SceneSpec s = SceneSpec::balanced(8, 8, 3, 3, 0);
  s.area_fractions = {0.5, 0.5, 0.5};
  CHECK_THROWS_AS(gen_label_map(s), Error);
  s = SceneSpec::balanced(8, 8, 3, 3, 0);
  s.blob_size = 65;
  CHECK_THROWS_AS(gen_label_map(s), Error);
  s = SceneSpec::balanced(0, 8, 3, 3, 0);
  CHECK_THROWS_AS(gen_label_map(s), Error);
}

TEST_CASE("perfect predictor reproduces GT through pseudo-labelling") {
  SceneSpec s = SceneSpec::balanced(48, 32, 19, 7, 2);
  s.ignore_fraction = 0.1;
  for (std::size_t k = 0; k < 7; ++k) s.area_fractions[k] = 0.9 / 7;
  const LabelMap gt = gen_label_map(s);
  PredictorSpec p = PredictorSpec::uniform(19, 1.0, 3);
  p.correct_confidence = {1.0, 1.0};
  const LabelMap pseudo = pseudo_label(mock_predict(gt, p), 0.1);
  for (std::size_t i = 0; i < gt.size(); ++i)
    if (!is_ignore(gt[i])) CHECK(pseudo[i] == gt[i]);
}

TEST_CASE("zero-accuracy predictor leaves nothing after refinement") {
  const LabelMap gt = gen_label_map(SceneSpec::balanced(32, 32, 5, 5, 6));
  const LabelMap r = refine(pseudo_label(mock_predict(gt, PredictorSpec::uniform(5, 0.0, 1)), 0.1), gt);
  CHECK(std::all_of(r.data().begin(), r.data().end(), is_ignore));
}

TEST_CASE("predictor accuracy 0.8 over a million pixels is within 3 sigma") {
  const LabelMap gt = gen_label_map(SceneSpec::balanced(1000, 1000, 19, 19, 8));
  const ProbVolume v = mock_predict(gt, PredictorSpec::uniform(19, 0.8, 9));
  CHECK(v.normalized());
  const ConfPair c = compress(v);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) correct += c.argmax[i] == gt[i];
  const double n = 1e6, sigma = std::sqrt(n * 0.8 * 0.2);
  CHECK(std::abs(static_cast<double>(correct) - 0.8 * n) <= 3 * sigma);
}

TEST_CASE("predictor spec validation") {
  const LabelMap gt(2, 2, 3, Label{0});
  PredictorSpec p = PredictorSpec::uniform(2, 0.5, 0);
  CHECK_THROWS_AS(mock_predict(gt, p), Error);
  p = PredictorSpec::uniform(3, 1.5, 0);
  CHECK_THROWS_AS(mock_predict(gt, p), Error);
}

TEST_CASE("class entropy and spearman") {
  const LabelMap two = testing::map_of(2, 1, 3, {0, 1});
  CHECK(class_entropy(two) == doctest::Approx(std::log(2.0)));
  CHECK(class_entropy(LabelMap(2, 2, 3, Label{2})) == 0.0);
  const std::vector<double> x = {1, 2, 3, 4}, y = {10, 20, 30, 40}, z = {4, 3, 2, 1}, t = {1, 1, 2, 2};
  CHECK(spearman(x, y) == doctest::Approx(1.0));
  CHECK(spearman(x, z) == doctest::Approx(-1.0));
  CHECK(spearman(x, t) == doctest::Approx(0.894427191));  // average ranks 1.5,1.5,3.5,3.5
}

TEST_CASE("oracles agree with the production path") {
  Rng rng(123);
  for (int i = 0; i < 200; ++i) {
    const std::size_t k = 1 + rng.below(19);
    const std::size_t w = 1 + rng.below(32), h = 1 + rng.below(32);
    const ProbVolume v = testing::random_volume(rng, w, h, k);
    const LabelMap gt = testing::random_map(rng, w, h, k, rng.uniform(0.0, 0.5));
    const double tau = rng.uniform(0.0, 0.6);
    const LabelMap pseudo = pseudo_label(v, tau);
    CHECK(pseudo == oracle_pseudo_label(v, tau));
    CHECK(refine(pseudo, gt) == oracle_refine(pseudo, gt));
    for (bool iit : {true, false})
      for (bool cb : {true, false})
        CHECK(std::abs(score_image(pseudo, gt, "", {iit, cb}).score - oracle_score(pseudo, gt, {iit, cb})) <= 1e-12);
  }
  const LabelMap gt = testing::map_of(2, 1, 2, {0, 1});
  CHECK(oracle_score(LabelMap(2, 1, 2), gt) == 0.0);
  CHECK(score_image(LabelMap(2, 1, 2), gt).score == 0.0);
}

}  // TEST_SUITE
