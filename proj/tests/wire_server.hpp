#pragma once

// In-process server speaking the remote detector protocol, for adapter tests.

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <functional>
#include <thread>

#include "bodem/image_io.hpp"
#include "bodem/wire.hpp"

namespace bodem::testing {

class WireServer {
 public:
  enum class Mode { echo, synthetic, fail500, malformed, slow };

  explicit WireServer(Mode mode, nlohmann::json fixture = nlohmann::json::array())
      : mode_(mode), fixture_(std::move(fixture)) {
    server_.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("ok", "text/plain");
    });
    server_.Post("/detect", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests;
      const int now = ++in_flight;
      int seen = max_in_flight.load();
      while (now > seen && !max_in_flight.compare_exchange_weak(seen, now)) {
      }
      handle(req, res);
      --in_flight;
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~WireServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  std::atomic<int> requests{0};
  std::atomic<int> in_flight{0};
  std::atomic<int> max_in_flight{0};

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    Image img;
    try {
      img = decode_png(std::span(reinterpret_cast<const std::uint8_t*>(req.body.data()), req.body.size()));
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
      return;
    }
    switch (mode_) {
      case Mode::echo:
        res.set_content(nlohmann::json{{"boxes", fixture_}}.dump(), "application/json");
        return;
      case Mode::synthetic: {
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
        std::vector<RawBox> boxes;
        for (const auto& b : synthetic_detect(img, SyntheticMode::plain)) {
          boxes.push_back({b.rect.x1, b.rect.y1, b.rect.x2, b.rect.y2, std::nullopt, std::nullopt});
        }
        res.set_content(wire::boxes_to_json(boxes).dump(), "application/json");
        return;
      }
      case Mode::fail500:
        res.status = 500;
        res.set_content(R"({"error":"inference failed"})", "application/json");
        return;
      case Mode::malformed:
        res.set_content("{\"boxes\": [", "application/json");
        return;
      case Mode::slow:
        std::this_thread::sleep_for(std::chrono::milliseconds(600));
        res.set_content(R"({"boxes":[]})", "application/json");
        return;
    }
  }

  Mode mode_;
  nlohmann::json fixture_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace bodem::testing
