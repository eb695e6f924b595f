#include "sdss/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace sdss {

std::uint64_t Rng::below(std::uint64_t n) {
  // Rejection keeps the result unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v;
  do {
    v = next();
  } while (v >= limit);
  return v % n;
}

std::size_t Rng::weighted(std::span<const double> weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double r = uniform() * total;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = i;
    if (r < weights[i]) return i;
    r -= weights[i];
  }
  return last_positive;
}

// ---------------------------------------------------------------------------

SceneSpec SceneSpec::balanced(std::size_t width, std::size_t height, std::size_t num_classes, std::size_t present,
                              std::uint64_t seed) {
  SceneSpec s;
  s.width = width;
  s.height = height;
  s.num_classes = num_classes;
  s.area_fractions.assign(num_classes, 0.0);
  for (std::size_t k = 0; k < present; ++k) s.area_fractions[k] = 1.0 / static_cast<double>(present);
  s.blob_size = std::max<std::size_t>(1, width * height / (4 * std::max<std::size_t>(present, 1)));
  s.seed = seed;
  return s;
}

void SceneSpec::check() const {
  if (width == 0 || height == 0) throw Error(ErrorCode::InfeasibleSpec, "scene has no pixels");
  if (num_classes == 0 || num_classes > kMaxClasses) throw Error(ErrorCode::InfeasibleSpec, "bad class count");
  if (area_fractions.size() != num_classes)
    throw Error(ErrorCode::InfeasibleSpec, "need one area fraction per class");
  if (blob_size == 0 || blob_size > width * height)
    throw Error(ErrorCode::InfeasibleSpec, "blob size " + std::to_string(blob_size) + " does not fit a " +
                                               std::to_string(width) + "x" + std::to_string(height) + " image");
  double sum = ignore_fraction;
  if (!(ignore_fraction >= 0.0 && ignore_fraction <= 1.0))
    throw Error(ErrorCode::InfeasibleSpec, "ignore fraction outside [0,1]");
  for (double f : area_fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw Error(ErrorCode::InfeasibleSpec, "area fraction outside [0,1]");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw Error(ErrorCode::InfeasibleSpec, "fractions sum to " + std::to_string(sum) + ", expected 1");
}

namespace {

// Largest-remainder apportionment of n pixels over fractions.
std::vector<std::size_t> apportion(std::span<const double> fractions, std::size_t n) {
  std::vector<std::size_t> quota(fractions.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t used = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double exact = fractions[i] * static_cast<double>(n);
    quota[i] = static_cast<std::size_t>(std::floor(exact));
    used += quota[i];
    rem.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t j = 0; used < n && j < rem.size(); ++j) {
    if (fractions[rem[j].second] <= 0.0) continue;
    ++quota[rem[j].second];
    ++used;
  }
  // Only reachable through accumulated rounding; park the rest on the largest bucket.
  if (used < n) quota[std::max_element(fractions.begin(), fractions.end()) - fractions.begin()] += n - used;
  return quota;
}

}  // namespace

LabelMap gen_label_map(const SceneSpec& spec) {
  spec.check();
  const std::size_t w = spec.width, h = spec.height, n = w * h;
  const std::size_t buckets = spec.num_classes + 1;  // last bucket is ignore

  std::vector<double> fractions(spec.area_fractions);
  fractions.push_back(spec.ignore_fraction);
  std::vector<std::size_t> remaining = apportion(fractions, n);

  Rng rng(spec.seed);
  std::vector<std::uint32_t> seeds(n);
  std::iota(seeds.begin(), seeds.end(), 0u);
  for (std::size_t i = n; i > 1; --i) std::swap(seeds[i - 1], seeds[rng.below(i)]);
  std::size_t seed_pos = 0;

  LabelMap map(w, h, spec.num_classes);
  std::vector<bool> assigned(n, false);
  std::vector<std::uint32_t> frontier_stamp(n, 0);
  std::vector<std::uint32_t> frontier;
  std::vector<double> weights(buckets);
  std::uint32_t stamp = 0;
  std::size_t done = 0;

  auto next_seed = [&]() -> std::uint32_t {
    while (assigned[seeds[seed_pos]]) ++seed_pos;
    return seeds[seed_pos];
  };

  while (done < n) {
    for (std::size_t b = 0; b < buckets; ++b) weights[b] = static_cast<double>(remaining[b]);
    const std::size_t bucket = rng.weighted(weights);
    const Label value = bucket == spec.num_classes ? kIgnore : static_cast<Label>(bucket);
    const double jitter = rng.uniform(0.5, 1.5);
    std::size_t target = std::max<std::size_t>(1, static_cast<std::size_t>(jitter * static_cast<double>(spec.blob_size)));
    target = std::min(target, remaining[bucket]);

    ++stamp;
    frontier.clear();
    std::size_t grown = 0;
    while (grown < target) {
      if (frontier.empty()) {
        const std::uint32_t s = next_seed();
        frontier.push_back(s);
        frontier_stamp[s] = stamp;
      }
      const std::size_t pick = rng.below(frontier.size());
      const std::uint32_t p = frontier[pick];
      frontier[pick] = frontier.back();
      frontier.pop_back();
      if (assigned[p]) continue;
      assigned[p] = true;
      map[p] = value;
      ++grown;
      const std::size_t x = p % w, y = p / w;
      auto push = [&](std::size_t q) {
        if (!assigned[q] && frontier_stamp[q] != stamp) {
          frontier_stamp[q] = stamp;
          frontier.push_back(static_cast<std::uint32_t>(q));
        }
      };
      if (x > 0) push(p - 1);
      if (x + 1 < w) push(p + 1);
      if (y > 0) push(p - w);
      if (y + 1 < h) push(p + w);
    }
    remaining[bucket] -= grown;
    done += grown;
  }
  return map;
}

// ---------------------------------------------------------------------------

PredictorSpec PredictorSpec::uniform(std::size_t num_classes, double accuracy, std::uint64_t seed) {
  PredictorSpec s;
  s.accuracy.assign(num_classes, accuracy);
  s.seed = seed;
  return s;
}

void PredictorSpec::check(std::size_t num_classes) const {
  if (accuracy.size() != num_classes)
    throw Error(ErrorCode::InvalidArgument, "accuracy needs one entry per class");
  for (double a : accuracy)
    if (!(a >= 0.0 && a <= 1.0)) throw Error(ErrorCode::InvalidArgument, "accuracy outside [0,1]");
  if (!confusion_bias.empty()) {
    if (confusion_bias.size() != num_classes)
      throw Error(ErrorCode::InvalidArgument, "confusion bias needs one weight per class");
    for (double b : confusion_bias)
      if (!(b >= 0.0) || !std::isfinite(b)) throw Error(ErrorCode::InvalidArgument, "confusion weights must be >= 0");
  }
  for (const auto& r : {correct_confidence, wrong_confidence})
    if (!(r.lo >= 0.0 && r.lo <= r.hi && r.hi <= 1.0))
      throw Error(ErrorCode::InvalidArgument, "confidence range must satisfy 0 <= lo <= hi <= 1");
}

ProbVolume mock_predict(const LabelMap& gt, const PredictorSpec& spec) {
  const std::size_t k_count = gt.num_classes();
  spec.check(k_count);
  const std::size_t n = gt.size();
  Rng rng(spec.seed);

  std::vector<double> bias = spec.confusion_bias.empty() ? std::vector<double>(k_count, 1.0) : spec.confusion_bias;
  const double floor_conf = k_count > 1 ? 1.0 / static_cast<double>(k_count) + 1e-4 : 1.0;

  std::vector<float> data(n * k_count);
  std::vector<double> wrong_weights(k_count);
  for (std::size_t p = 0; p < n; ++p) {
    const Label g = gt[p];
    std::size_t predicted;
    ConfidenceRange range;
    if (is_ignore(g)) {
      predicted = std::accumulate(bias.begin(), bias.end(), 0.0) > 0.0 ? rng.weighted(bias) : rng.below(k_count);
      range = spec.wrong_confidence;
    } else if (k_count == 1 || rng.bernoulli(spec.accuracy[g])) {
      predicted = g;
      range = spec.correct_confidence;
    } else {
      wrong_weights = bias;
      wrong_weights[g] = 0.0;
      if (std::accumulate(wrong_weights.begin(), wrong_weights.end(), 0.0) <= 0.0) {
        std::fill(wrong_weights.begin(), wrong_weights.end(), 1.0);
        wrong_weights[g] = 0.0;
      }
      predicted = rng.weighted(wrong_weights);
      range = spec.wrong_confidence;
    }
    const double conf = std::max(rng.uniform(range.lo, range.hi), floor_conf);
    const float top = static_cast<float>(std::min(conf, 1.0));
    const float rest = k_count > 1 ? static_cast<float>((1.0 - std::min(conf, 1.0)) / static_cast<double>(k_count - 1)) : 0.0f;
    for (std::size_t k = 0; k < k_count; ++k) data[k * n + p] = (k == predicted) ? top : rest;
  }
  return ProbVolume(gt.width(), gt.height(), k_count, std::move(data), true);
}

double class_entropy(const LabelMap& gt) {
  std::vector<std::int64_t> counts(gt.num_classes(), 0);
  std::int64_t total = 0;
  for (Label v : gt.data()) {
    if (is_ignore(v) || v >= counts.size()) continue;
    ++counts[v];
    ++total;
  }
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  return h;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::InvalidArgument, "spearman needs paired samples");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace sdss
