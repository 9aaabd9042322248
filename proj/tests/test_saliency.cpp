#include <doctest.h>

#include <sstream>

#include "bodem/oracle.hpp"
#include "bodem/saliency.hpp"
#include "test_util.hpp"

using namespace bodem;

namespace {

MaskSpec local_mask(int index, Rect r) { return {index, MaskKind::local, r, std::nullopt}; }

InquiryResult locals_only(std::vector<DetectionSet> sets) {
  InquiryResult res;
  res.local = std::move(sets);
  return res;
}

DetectionSet random_set(std::mt19937& rng, int w, int h) {
  DetectionSet s;
  const int n = std::uniform_int_distribution<int>(0, 3)(rng);
  for (int i = 0; i < n; ++i) s.emplace_back(testing::random_rect(w, h, rng));
  return s;
}

}  // namespace

TEST_CASE("similarity") {
  const BBox b(0, 0, 10, 10);
  CHECK(similarity(b, {b}) == 1.0);
  CHECK(similarity(b, {}) == 0.0);
  CHECK(similarity(b, {BBox(5, 0, 15, 10), BBox(20, 20, 30, 30)}) == 1.0 / 3.0);
}

TEST_CASE("difference") {
  const BBox b(0, 0, 10, 10);
  CHECK(difference(b, {BBox(0, 0, 10, 9)}, 0.8, 1120) == 0.0);   // similarity 0.9
  CHECK(difference(b, {BBox(0, 0, 10, 20)}, 0.8, 1120) == 2.0);  // similarity 0.5
  CHECK(difference(b, {}, 0.8, miss_penalty({640, 480})) == 1120.0);
  CHECK(difference(b, {BBox(50, 50, 60, 60)}, 0.8, 1120) == 1120.0);
  // Equality with the threshold counts as similar.
  CHECK(difference(b, {BBox(0, 0, 10, 8)}, 0.8, 1120) == 0.0);
  CHECK(difference(b, {b}, 1.0, 1120) == 0.0);
}

TEST_CASE("estimate worked examples") {
  const ImageDims dims{100, 100};
  const BBox b(0, 0, 10, 10);

  SUBCASE("all masks re-detect") {
    const std::vector<MaskSpec> masks{local_mask(0, Rect(0, 0, 50, 50)), local_mask(1, Rect(20, 20, 90, 90))};
    const auto sm = estimate(b, masks, locals_only({{b}, {b}}), dims, 0.8);
    CHECK(sm.all_zero());
  }
  SUBCASE("missed detection adds w+h") {
    const std::vector<MaskSpec> masks{local_mask(0, Rect(30, 30, 40, 40))};
    const auto sm = estimate(b, masks, locals_only({{}}), dims, 0.8);
    CHECK((sm.block(Rect(30, 30, 40, 40)) == 200.0).all());
    CHECK(sm.values.sum() == 200.0 * 100);
  }
  SUBCASE("overlapping masks add up") {
    const std::vector<MaskSpec> masks{local_mask(0, Rect(0, 0, 20, 20)), local_mask(1, Rect(10, 10, 30, 30))};
    const DetectionSet half{BBox(0, 0, 10, 20)};
    const auto sm = estimate(b, masks, locals_only({half, half}), dims, 0.8);
    CHECK(sm.at(15, 15) == 4.0);
    CHECK(sm.at(5, 5) == 2.0);
    CHECK(sm.at(25, 25) == 2.0);
    CHECK(sm.at(35, 35) == 0.0);
  }
  SUBCASE("missing entry") {
    const std::vector<MaskSpec> masks{local_mask(0, Rect(0, 0, 5, 5)), local_mask(1, Rect(0, 0, 5, 5))};
    CHECK_THROWS_AS(estimate(b, masks, locals_only({{}}), dims, 0.8), ConsistencyError);
  }
}

TEST_CASE("estimate equals the per-pixel brute-force sum") {
  std::mt19937 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const int w = std::uniform_int_distribution<int>(4, 40)(rng);
    const int h = std::uniform_int_distribution<int>(4, 40)(rng);
    const BBox b(testing::random_rect(w, h, rng));
    std::vector<MaskSpec> masks;
    InquiryResult res;
    std::vector<Rect> rects;
    std::vector<double> diffs;
    for (int i = 0; i < 15; ++i) {
      masks.push_back(local_mask(i, testing::random_rect(w, h, rng)));
      res.local.push_back(random_set(rng, w, h));
      rects.push_back(masks.back().area);
      diffs.push_back(difference(b, res.local.back(), 0.8, w + h));
    }
    masks.push_back({0, MaskKind::global, Rect(0, 0, w, h), 7});
    res.global[7].push_back({});
    rects.push_back(Rect(0, 0, w, h));
    diffs.push_back(w + h);

    const auto sm = estimate(b, masks, res, {w, h}, 0.8);
    const auto want = oracle::per_pixel_sum(rects, diffs, w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) CHECK(sm.at(x, y) == doctest::Approx(want[std::size_t(y) * w + x]).epsilon(1e-12));
    }
  }
}

TEST_CASE("saliency properties on random results") {
  std::mt19937 rng(44);
  const ThresholdSchedule sched;
  for (int trial = 0; trial < 60; ++trial) {
    const int w = 48, h = 40;
    const BBox b(testing::random_rect(w, h, rng));
    const auto masks = local_masks(b.rect, {w, h}, MaskGenConfig{5, 8, {}});
    InquiryResult res;
    for (std::size_t i = 0; i < masks.size(); ++i) {
      auto s = random_set(rng, w, h);
      if (i % 3 == 0) s.push_back(BBox(b.rect.x1, b.rect.y1, b.rect.x2, std::max(b.rect.y1 + 1, b.rect.y2 - 1)));
      res.local.push_back(s);
    }

    // Monotone in the threshold.
    const auto grid = sched.grid();
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
      CHECK((estimate(b, masks, res, {w, h}, grid[i + 1]).values >=
             estimate(b, masks, res, {w, h}, grid[i]).values).all());
    }

    // Support stays inside the masking area.
    const auto sm = estimate(b, masks, res, {w, h}, 0.9);
    const Rect ma = masking_area(b.rect, {w, h}, 5);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!ma.contains(x, y)) CHECK(sm.at(x, y) == 0.0);
      }
    }

    // Labels and scores are ignored.
    InquiryResult relabeled = res;
    for (auto& set : relabeled.local) {
      for (auto& box : set) {
        box.label = std::uniform_int_distribution<int>(0, 1)(rng) ? std::optional<std::string>("X") : std::nullopt;
        box.score = std::uniform_real_distribution<double>(0, 1)(rng);
      }
    }
    CHECK((estimate(b, masks, relabeled, {w, h}, 0.9).values == sm.values).all());
    CHECK(estimate(BBox(b.rect, "other", 0.1), masks, res, {w, h}, 0.9).values.isApprox(sm.values, 0.0));

    // Float maps agree with double maps.
    const auto smf = estimate<float>(b, masks, res, {w, h}, 0.9);
    CHECK(smf.values.cast<double>().isApprox(sm.values, 1e-6));
  }
}

TEST_CASE("normalize") {
  auto sm = SaliencyMap<double>::zero({3, 1});
  CHECK(normalize(sm).all_zero());
  CHECK(normalize(sm).normalized);

  sm.values << 0, 2, 4;
  const auto n = normalize(sm);
  CHECK(n.at(0, 0) == 0.0);
  CHECK(n.at(1, 0) == 0.5);
  CHECK(n.at(2, 0) == 1.0);

  auto single = SaliencyMap<double>::zero({4, 4});
  single.values(2, 1) = 17.25;
  CHECK(normalize(single).at(1, 2) == 1.0);
  CHECK(normalize(single).values.maxCoeff() == 1.0);
}

TEST_CASE("threshold schedule") {
  CHECK(ThresholdSchedule{}.grid() == std::vector<double>{0.8, 0.85, 0.9, 0.95, 1.0});
  CHECK(ThresholdSchedule{1.0, 0.05, 1.0}.grid() == std::vector<double>{1.0});
  CHECK(ThresholdSchedule{0.5, 0.3, 1.0}.grid() == std::vector<double>{0.5, 0.8, 1.0});
  CHECK_THROWS(ThresholdSchedule{0.0, 0.05, 1.0}.validate());
  CHECK_THROWS(ThresholdSchedule{0.9, 0.05, 0.8}.validate());
  CHECK_THROWS(ThresholdSchedule{0.8, 0.0, 1.0}.validate());
}

TEST_CASE("dynamic threshold") {
  const ImageDims dims{200, 200};
  const BBox b(0, 0, 100, 100);
  const std::vector<MaskSpec> masks{local_mask(0, Rect(0, 0, 50, 50)), local_mask(1, Rect(50, 50, 100, 100))};

  SUBCASE("nonzero at the base threshold") {
    const auto res = locals_only({{BBox(0, 0, 100, 50)}, {b}});
    const auto d = estimate_dynamic(b, masks, res, dims, ThresholdSchedule{});
    CHECK(d.threshold_used == 0.8);
    CHECK(d.map.at(10, 10) == 2.0);
  }
  SUBCASE("exact re-detection everywhere") {
    const auto d = estimate_dynamic(b, masks, locals_only({{b}, {b}}), dims, ThresholdSchedule{});
    CHECK(d.threshold_used == 1.0);
    CHECK(d.map.all_zero());
  }
  SUBCASE("zero at 0.8, nonzero at 0.85") {
    const auto res = locals_only({{BBox(0, 0, 100, 82)}, {b}});  // IOU 0.82
    const auto d = estimate_dynamic(b, masks, res, dims, ThresholdSchedule{});
    CHECK(d.threshold_used == 0.85);
    CHECK(d.map.at(10, 10) == 1.0 / 0.82);
    CHECK(d.map.at(60, 60) == 0.0);
  }
  SUBCASE("IOU exactly on a grid point stays similar") {
    const auto res = locals_only({{BBox(0, 0, 100, 85)}, {b}});  // IOU 0.85
    CHECK(estimate_dynamic(b, masks, res, dims, ThresholdSchedule{}).threshold_used == 0.9);
  }
}

TEST_CASE("csv serialization") {
  auto sm = SaliencyMap<double>::zero({3, 2});
  sm.values << 0, 0.5, 1, 0.1, 1.0 / 3.0, 2e-17;
  std::ostringstream out;
  write_csv(sm, out);
  CHECK(out.str() == "0,0.5,1\n0.1,0.3333333333333333,2e-17\n");
  std::istringstream in(out.str());
  CHECK((read_csv(in).values == sm.values).all());

  std::mt19937 rng(8);
  auto rnd = SaliencyMap<double>::zero({17, 9});
  for (Eigen::Index i = 0; i < rnd.values.size(); ++i) {
    rnd.values.data()[i] = std::uniform_real_distribution<double>(0, 1)(rng);
  }
  std::ostringstream out2;
  write_csv(rnd, out2);
  std::istringstream in2(out2.str());
  CHECK((read_csv(in2).values == rnd.values).all());
}
