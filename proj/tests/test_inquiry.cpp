#include <doctest.h>

#include <mutex>
#include <set>

#include "bodem/detector.hpp"
#include "bodem/inquiry.hpp"
#include "bodem/wire.hpp"
#include "test_util.hpp"
#include "wire_server.hpp"

using namespace bodem;
using namespace std::chrono_literals;

namespace {

constexpr Color kWhite{255, 255, 255};

/// Returns fixed raw boxes.
class FixedDetector final : public Detector {
 public:
  explicit FixedDetector(std::vector<RawBox> boxes) : boxes_(std::move(boxes)) {}
  std::vector<RawBox> detect_raw(const Image&) override {
    ++calls;
    return boxes_;
  }
  std::string describe() const override { return "fixed"; }
  std::atomic<int> calls{0};

 private:
  std::vector<RawBox> boxes_;
};

/// Synthetic detection that fails whenever the top-left pixel was masked.
class CornerFailDetector final : public Detector {
 public:
  explicit CornerFailDetector(Color corner) : corner_(corner) {}
  std::vector<RawBox> detect_raw(const Image& img) override {
    if (img.pixel(0, 0) != corner_) throw DetectorError(DetectorErrorKind::transport, "boom");
    return SyntheticDetector().detect_raw(img);
  }
  std::string describe() const override { return "corner-fail"; }

 private:
  Color corner_;
};

/// Records peak concurrency and declares itself single-flight.
class SerialDetector final : public Detector {
 public:
  std::vector<RawBox> detect_raw(const Image& img) override {
    const int now = ++active;
    peak = std::max(peak.load(), now);
    std::this_thread::sleep_for(1ms);
    --active;
    return SyntheticDetector().detect_raw(img);
  }
  bool single_flight() const override { return true; }
  std::string describe() const override { return "serial"; }
  std::atomic<int> active{0};
  std::atomic<int> peak{0};
};

Image two_rect_scene() {
  Image img(120, 80, kWhite);
  img.fill(Rect(10, 10, 50, 40), {200, 0, 0});
  img.fill(Rect(70, 30, 110, 70), {0, 0, 200});
  return img;
}

}  // namespace

TEST_CASE("synthetic detector examples") {
  CHECK(synthetic_detect(Image(50, 50, kWhite), SyntheticMode::plain).empty());

  Image img(50, 50, kWhite);
  img.fill(Rect(5, 5, 15, 15), {255, 0, 0});
  CHECK(synthetic_detect(img, SyntheticMode::plain) == DetectionSet{BBox(5, 5, 15, 15)});
  CHECK(synthetic_detect(img, SyntheticMode::strict) == DetectionSet{BBox(5, 5, 15, 15)});

  img.fill(Rect(5, 5, 10, 15), {0, 255, 0});
  CHECK(synthetic_detect(img, SyntheticMode::plain) == DetectionSet{BBox(5, 5, 15, 15)});
  CHECK(synthetic_detect(img, SyntheticMode::strict).empty());

  Image tiny(20, 20, kWhite);
  tiny.fill(Rect(2, 2, 6, 8), {0, 0, 0});  // 24 pixels
  CHECK(synthetic_detect(tiny, SyntheticMode::plain).size() == 1);
  CHECK(synthetic_detect(tiny, SyntheticMode::strict).empty());
}

TEST_CASE("synthetic detector components are 4-connected and sorted") {
  Image img(30, 30, kWhite);
  img.fill(Rect(20, 2, 25, 7), {1, 1, 1});
  img.fill(Rect(2, 2, 7, 7), {1, 1, 1});
  img.fill(Rect(7, 7, 12, 12), {1, 1, 1});  // touches the previous one only diagonally
  const auto found = synthetic_detect(img, SyntheticMode::plain);
  CHECK(found == DetectionSet{BBox(2, 2, 7, 7), BBox(20, 2, 25, 7), BBox(7, 7, 12, 12)});
}

TEST_CASE("synthetic soundness on disjoint solid rectangles") {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    Image img(64, 64, kWhite);
    std::vector<Rect> placed;
    for (int k = 0; k < 6; ++k) {
      const Rect r = testing::random_rect(64, 64, rng);
      if (r.x1 == 0 && r.y1 == 0) continue;  // (0,0) defines the background
      // Keep a 1-pixel gap so rectangles stay separate components.
      const Rect grown(std::max(r.x1 - 1, 0), std::max(r.y1 - 1, 0), std::min(r.x2 + 1, 64),
                       std::min(r.y2 + 1, 64));
      if (std::any_of(placed.begin(), placed.end(), [&](const Rect& p) { return p.intersects(grown); })) {
        continue;
      }
      placed.push_back(r);
      img.fill(r, {std::uint8_t(10 * k), 0, 0});
    }
    const auto found = synthetic_detect(img, SyntheticMode::plain);
    std::set<Rect> got, want(placed.begin(), placed.end());
    for (const auto& b : found) got.insert(b.rect);
    CHECK(got == want);
  }
}

TEST_CASE("detect clamps and drops boxes") {
  FixedDetector det({{-5, 0, 20, 10, "a", 0.5}, {20, 0, 30, 10, {}, {}}, {3, 3, 3, 9, {}, {}}});
  const auto out = detect(det, Image(16, 16));
  REQUIRE(out.size() == 1);
  CHECK(out[0].rect == Rect(0, 0, 16, 10));
  CHECK(out[0].label == "a");
  CHECK(out[0].score == 0.5);
}

TEST_CASE("run_inquiry probes each mask once") {
  FixedDetector det({{0, 0, 5, 5, {}, {}}});
  const Image img(100, 100);
  std::vector<MaskSpec> local, global;
  for (int i = 0; i < 44; ++i) local.push_back({i, MaskKind::local, Rect(i, 0, i + 2, 2), {}});
  for (int i = 0; i < 12; ++i) global.push_back({i, MaskKind::global, Rect(0, i, 2, i + 1), 20});
  const auto res = run_inquiry(det, img, local, global, 4);
  CHECK(res.query_count == 57);
  CHECK(det.calls == 57);
  CHECK(res.local.size() == 44);
  CHECK(res.global.at(20).size() == 12);
  CHECK(res.find(local[43]) != nullptr);
  CHECK(res.find(MaskSpec{44, MaskKind::local, Rect(0, 0, 1, 1), {}}) == nullptr);
  CHECK(res.find(MaskSpec{0, MaskKind::global, Rect(0, 0, 1, 1), 50}) == nullptr);
}

TEST_CASE("inquiry results do not depend on parallelism") {
  const Image img = two_rect_scene();
  SyntheticDetector det;
  const auto baseline = synthetic_detect(img, SyntheticMode::plain);
  const auto local = local_masks(baseline[0].rect, {120, 80}, MaskGenConfig{});
  auto global = global_masks({120, 80}, 20);
  const auto g50 = global_masks({120, 80}, 50);
  global.insert(global.end(), g50.begin(), g50.end());
  const auto serial = run_inquiry(det, img, local, global, 1);
  for (int p : {2, 8, 32}) {
    const auto par = run_inquiry(det, img, local, global, p);
    CHECK(par.local == serial.local);
    CHECK(par.global == serial.global);
    CHECK(par.query_count == serial.query_count);
  }
}

TEST_CASE("globals are shared across boxes of one image") {
  const Image img = two_rect_scene();
  FixedDetector det({{10, 10, 50, 40, {}, {}}, {70, 30, 110, 70, {}, {}}});
  ImageInquiry inquiry(det, img, {20, 50, 20}, 4);
  CHECK(inquiry.global_masks().size() == 6 * 4 + 3 * 2);
  const auto& baseline = inquiry.baseline();
  REQUIRE(baseline.size() == 2);
  const auto l0 = local_masks(baseline[0].rect, {120, 80}, MaskGenConfig{});
  const auto l1 = local_masks(baseline[1].rect, {120, 80}, MaskGenConfig{});
  const auto r0 = inquiry.for_box(l0);
  const auto r1 = inquiry.for_box(l1);
  CHECK(r0.query_count == long(30 + l0.size()));
  CHECK(r1.query_count == long(l1.size()));
  CHECK(r0.global == r1.global);
  CHECK(det.calls == int(1 + 30 + l0.size() + l1.size()));
  CHECK(inquiry.query_count() == det.calls);
}

TEST_CASE("probe failures carry the lowest failing mask index") {
  const Image img = two_rect_scene();
  CornerFailDetector det(kWhite);
  std::vector<MaskSpec> masks;
  masks.push_back({0, MaskKind::local, Rect(10, 10, 60, 40), {}});
  masks.push_back({1, MaskKind::local, Rect(40, 10, 60, 40), {}});
  masks.push_back({2, MaskKind::local, Rect(0, 0, 30, 30), {}});  // covers (0,0)
  masks.push_back({3, MaskKind::local, Rect(0, 0, 20, 20), {}});
  for (int p : {1, 4}) {
    try {
      run_inquiry(det, img, masks, {}, p);
      FAIL("expected an error");
    } catch (const InquiryError& e) {
      CHECK(e.mask_index() == 2);
      CHECK(e.mask_kind() == MaskKind::local);
      CHECK(e.kind() == DetectorErrorKind::transport);
    }
  }
}

TEST_CASE("single-flight adapters are probed serially") {
  const Image img = two_rect_scene();
  SerialDetector det;
  const auto local = local_masks(Rect(10, 10, 50, 40), {120, 80}, MaskGenConfig{});
  run_inquiry(det, img, local, {}, 8);
  CHECK(det.peak == 1);
}

TEST_CASE("detector spec parsing") {
  CHECK(make_detector("synthetic")->describe() == "synthetic");
  CHECK(make_detector("synthetic:strict")->describe() == "synthetic:strict");
  CHECK(make_detector("http://127.0.0.1:1/api")->describe() == "http://127.0.0.1:1/api");
  CHECK_THROWS_AS(make_detector("yolo"), std::invalid_argument);
  CHECK_THROWS_AS(make_detector("cmd:"), std::invalid_argument);
}

TEST_CASE("wire schema") {
  using nlohmann::json;
  const auto boxes = wire::parse_boxes(json::parse(
      R"({"boxes":[{"x1":1,"y1":2,"x2":3,"y2":4},{"x1":-1,"y1":0,"x2":9,"y2":9,"label":"LIST","score":0.75}]})"));
  REQUIRE(boxes.size() == 2);
  CHECK(boxes[1] == RawBox{-1, 0, 9, 9, "LIST", 0.75});
  CHECK(wire::parse_boxes(wire::boxes_to_json(boxes)) == boxes);
  for (const char* bad : {R"([])", R"({"boxes":{}})", R"({"boxes":[{"x1":1,"y1":2,"x2":3}]})",
                          R"({"boxes":[{"x1":1.5,"y1":2,"x2":3,"y2":4}]})",
                          R"({"boxes":[{"x1":1,"y1":2,"x2":3,"y2":4,"label":7}]})"}) {
    try {
      wire::parse_boxes(json::parse(bad));
      FAIL("accepted " << bad);
    } catch (const DetectorError& e) {
      CHECK(e.kind() == DetectorErrorKind::malformed);
    }
  }
}

TEST_CASE("base64 round trip") {
  std::mt19937 rng(1);
  for (std::size_t n = 0; n < 40; ++n) {
    std::vector<std::uint8_t> bytes(n);
    for (auto& b : bytes) b = std::uint8_t(rng());
    CHECK(wire::base64_decode(wire::base64_encode(bytes)) == bytes);
  }
  CHECK(wire::base64_encode(std::vector<std::uint8_t>{'h', 'i'}) == "aGk=");
}

namespace {

DetectorErrorKind error_kind_of(Detector& det, const Image& img) {
  try {
    det.detect_raw(img);
  } catch (const DetectorError& e) {
    return e.kind();
  }
  FAIL("expected a detector error");
  return DetectorErrorKind::transport;
}

}  // namespace

TEST_CASE("remote adapter round-trips fixture boxes bit-exactly") {
  const auto fixture = nlohmann::json::parse(
      R"([{"x1":1,"y1":2,"x2":3,"y2":4},{"x1":5,"y1":6,"x2":40,"y2":30,"label":"TABLE","score":0.8125}])");
  testing::WireServer server(testing::WireServer::Mode::echo, fixture);
  RemoteDetector det(server.url());
  CHECK(det.healthy());
  const auto boxes = det.detect_raw(Image(32, 32));
  CHECK(wire::boxes_to_json(boxes)["boxes"] == fixture);
  for (int i = 0; i < 50; ++i) CHECK(det.detect_raw(Image(8, 8)) == boxes);

  testing::WireServer empty(testing::WireServer::Mode::echo);
  CHECK(RemoteDetector(empty.url()).detect_raw(Image(4, 4)).empty());
}

TEST_CASE("remote adapter error kinds") {
  const Image img(16, 16);
  AdapterOptions fast;
  fast.backoff = 1ms;
  fast.timeout = 300ms;

  SUBCASE("500 is a transport error after the retry budget") {
    testing::WireServer server(testing::WireServer::Mode::fail500);
    RemoteDetector det(server.url(), fast);
    CHECK(error_kind_of(det, img) == DetectorErrorKind::transport);
    CHECK(server.requests == 3);
  }
  SUBCASE("400 is a rejection and is not retried") {
    testing::WireServer server(testing::WireServer::Mode::echo);
    // The adapter always sends valid PNG, so provoke a 400 through a raw client.
    httplib::Client raw("127.0.0.1", std::stoi(server.url().substr(server.url().rfind(':') + 1)));
    auto res = raw.Post("/detect", "not a png", "image/png");
    REQUIRE(res);
    CHECK(res->status == 400);
  }
  SUBCASE("malformed body") {
    testing::WireServer server(testing::WireServer::Mode::malformed);
    RemoteDetector det(server.url(), fast);
    CHECK(error_kind_of(det, img) == DetectorErrorKind::malformed);
  }
  SUBCASE("timeout") {
    testing::WireServer server(testing::WireServer::Mode::slow);
    fast.retries = 0;
    RemoteDetector det(server.url(), fast);
    CHECK(error_kind_of(det, img) == DetectorErrorKind::timeout);
  }
  SUBCASE("unreachable") {
    RemoteDetector det("http://127.0.0.1:1", fast);
    CHECK_FALSE(det.healthy());
    CHECK(error_kind_of(det, img) == DetectorErrorKind::transport);
  }
}

TEST_CASE("remote 4xx maps to the rejected kind") {
  // A server that refuses everything with 400.
  httplib::Server server;
  server.Post("/prefix/detect", [](const httplib::Request&, httplib::Response& res) {
    res.status = 400;
    res.set_content(R"({"error":"bad image"})", "application/json");
  });
  std::atomic<int> hits{0};
  server.set_pre_routing_handler([&](const httplib::Request&, httplib::Response&) {
    ++hits;
    return httplib::Server::HandlerResponse::Unhandled;
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  RemoteDetector det("http://127.0.0.1:" + std::to_string(port) + "/prefix/");
  CHECK(error_kind_of(det, Image(4, 4)) == DetectorErrorKind::rejected);
  CHECK(hits == 1);
  server.stop();
  t.join();
}

TEST_CASE("remote adapter under 8-way concurrent inquiry") {
  testing::WireServer server(testing::WireServer::Mode::synthetic);
  RemoteDetector det(server.url());
  const Image img = two_rect_scene();
  const auto local = local_masks(Rect(10, 10, 50, 40), {120, 80}, MaskGenConfig{});
  const auto global = global_masks({120, 80}, 20);
  const auto remote = run_inquiry(det, img, local, global, 8);
  SyntheticDetector reference;
  const auto inproc = run_inquiry(reference, img, local, global, 1);
  CHECK(remote.local == inproc.local);
  CHECK(remote.global == inproc.global);
  CHECK(server.requests == int(1 + local.size() + global.size()));
  CHECK(server.max_in_flight > 1);
}

TEST_CASE("subprocess adapter") {
  const std::string exe = FIXTURE_DETECTOR;
  const Image img = two_rect_scene();

  SUBCASE("echo") {
    SubprocessDetector det(exe + R"( echo '[{"x1":1,"y1":2,"x2":3,"y2":4,"label":"MENU"}]')");
    for (int i = 0; i < 3; ++i) {
      CHECK(det.detect_raw(img) == std::vector<RawBox>{{1, 2, 3, 4, "MENU", {}}});
    }
  }
  SUBCASE("synthetic over the pipe matches in-process") {
    auto det = make_detector("cmd:" + exe + " synthetic");
    const auto local = local_masks(Rect(10, 10, 50, 40), {120, 80}, MaskGenConfig{});
    SyntheticDetector reference;
    CHECK(run_inquiry(*det, img, local, {}, 8).local == run_inquiry(reference, img, local, {}, 1).local);
  }
  SUBCASE("id mismatch") {
    SubprocessDetector det(exe + " wrong-id");
    CHECK(error_kind_of(det, img) == DetectorErrorKind::malformed);
  }
  SUBCASE("non-json reply") {
    SubprocessDetector det(exe + " garbage");
    CHECK(error_kind_of(det, img) == DetectorErrorKind::malformed);
  }
  SUBCASE("child exits") {
    SubprocessDetector det(exe + " exit");
    CHECK(error_kind_of(det, img) == DetectorErrorKind::transport);
  }
  SUBCASE("timeout") {
    AdapterOptions opts;
    opts.timeout = 200ms;
    SubprocessDetector det("sleep 5", opts);
    CHECK(error_kind_of(det, img) == DetectorErrorKind::timeout);
  }
}
