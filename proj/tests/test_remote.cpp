#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <thread>

#include "http_json.hpp"
#include "json.hpp"
#include "viunit/chat_client.hpp"
#include "viunit/errors.hpp"
#include "viunit/services.hpp"

using namespace viunit;

namespace {

// In-process HTTP server speaking the wire shapes the clients expect.
class TestServer {
 public:
  TestServer() {
    server_.Post("/v1/chat/completions",
                 [this](const httplib::Request& req, httplib::Response& res) {
                   ++chat_calls;
                   auto body = nlohmann::json::parse(req.body);
                   last_chat_request = body;
                   int n = body.value("n", 1);
                   nlohmann::json choices = nlohmann::json::array();
                   for (int i = 0; i < n; ++i)
                     choices.push_back(
                         {{"message",
                           {{"content", "completion " + std::to_string(i)}}}});
                   res.set_content(nlohmann::json{{"choices", choices}}.dump(),
                                   "application/json");
                 });
    server_.Post("/embed", [](const httplib::Request& req,
                              httplib::Response& res) {
      auto body = nlohmann::json::parse(req.body);
      std::vector<double> v(16, 0.0);
      v[0] = static_cast<double>(body["texts"][0].get<std::string>().size());
      res.set_content(
          nlohmann::json{{"vectors", nlohmann::json::array({v})}}.dump(),
          "application/json");
    });
    server_.Post("/generate", [this](const httplib::Request& req,
                                     httplib::Response& res) {
      auto body = nlohmann::json::parse(req.body);
      last_generate_request = body;
      res.set_content(nlohmann::json{{"image_b64", "aW1n"},
                                     {"nsfw_flag", false}}
                          .dump(),
                      "application/json");
    });
    server_.Post("/detect", [](const httplib::Request& req,
                               httplib::Response& res) {
      auto body = nlohmann::json::parse(req.body);
      nlohmann::json boxes = nlohmann::json::array();
      if (body["query"] == "cat")
        boxes.push_back(nlohmann::json::array({10, 20, 110, 120}));
      res.set_content(nlohmann::json{{"boxes", boxes},
                                     {"scores", nlohmann::json::array()}}
                          .dump(),
                      "application/json");
    });
    server_.Post("/vqa", [](const httplib::Request& req,
                            httplib::Response& res) {
      auto body = nlohmann::json::parse(req.body);
      std::string question = body["question"];
      std::string answer =
          question.find("Is the cat black?") != std::string::npos ? "Yes."
                                                                  : "blue";
      res.set_content(nlohmann::json{{"answer", answer}}.dump(),
                      "application/json");
    });
    server_.Post("/itm",
                 [](const httplib::Request& req, httplib::Response& res) {
                   res.set_content(nlohmann::json{{"score", 0.91}}.dump(),
                                   "application/json");
                 });
    server_.Post("/flaky", [this](const httplib::Request& req,
                                  httplib::Response& res) {
      if (++flaky_calls <= 2) {
        res.status = 503;
        return;
      }
      res.set_content(nlohmann::json{{"answer", "recovered"}}.dump(),
                      "application/json");
    });

    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~TestServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const {
    return "http://127.0.0.1:" + std::to_string(port_);
  }

  std::atomic<int> chat_calls{0};
  std::atomic<int> flaky_calls{0};
  nlohmann::json last_chat_request;
  nlohmann::json last_generate_request;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

ImageHandle opaque_image() {
  ImageHandle h;
  h.id = "file:/tmp/photo.png";
  h.image_b64 = "cGhvdG8=";
  return h;
}

}  // namespace

TEST_CASE("chat client posts the open completion shape") {
  TestServer server;
  HttpChatClient client({server.url(), 5.0, 1});
  ChatRequest request;
  request.model = "m1";
  request.n = 3;
  request.temperature = 0.4;
  request.messages.push_back({"system", "be terse"});
  request.messages.push_back({"user", "hello"});
  auto out = client.complete(request);
  REQUIRE(out.size() == 3);
  CHECK(out[0] == "completion 0");
  CHECK(out[2] == "completion 2");
  CHECK(server.last_chat_request["model"] == "m1");
  CHECK(server.last_chat_request["n"] == 3);
  CHECK(server.last_chat_request["messages"][1]["content"] == "hello");
}

TEST_CASE("remote embedder validates dimensions") {
  TestServer server;
  RemoteEmbedder good({server.url(), 5.0, 1}, 16);
  auto v = good.embed("four");
  REQUIRE(v.size() == 16);
  CHECK(v[0] == 4.0);
  RemoteEmbedder wrong({server.url(), 5.0, 1}, 32);
  CHECK_THROWS_AS(wrong.embed("four"), ServiceError);
}

TEST_CASE("image service forwards generation parameters") {
  TestServer server;
  HttpImageService service({server.url(), 5.0, 1});
  auto img = service.generate("a red barn", 42, 16.0, 50, "");
  CHECK(img.image_b64 == "aW1n");
  CHECK_FALSE(img.nsfw_flag);
  CHECK(server.last_generate_request["prompt"] == "a red barn");
  CHECK(server.last_generate_request["seed"] == 42);
  CHECK(server.last_generate_request["guidance"] == 16.0);
  CHECK(server.last_generate_request["steps"] == 50);
}

TEST_CASE("remote perception round trips all four capabilities") {
  TestServer server;
  BackendConfig cfg;
  RemoteBackend backend(cfg, server.url());
  auto img = opaque_image();

  auto cats = backend.detect(img, "cat");
  REQUIRE(cats.size() == 1);
  CHECK(cats[0].box == Box{10, 20, 110, 120});
  CHECK(backend.detect(img, "dog").empty());

  // verify_property rides on VQA and normalizes the yes answer.
  CHECK(backend.verify_property(img, {0, 0, 10, 10}, "cat", "black"));
  CHECK_FALSE(backend.verify_property(img, {0, 0, 10, 10}, "cat", "striped"));

  CHECK(backend.simple_query(img, {0, 0, 10, 10}, "What color?") == "blue");
  CHECK(backend.itm_score(img, {0, 0, 10, 10}, "a cat") ==
        doctest::Approx(0.91));
}

TEST_CASE("transient 5xx responses are retried") {
  TestServer server;
  auto res = http_post_json({server.url(), 5.0, 3}, "/flaky",
                            nlohmann::json{{"x", 1}});
  CHECK(res["answer"] == "recovered");
  CHECK(server.flaky_calls == 3);
}

TEST_CASE("unreachable services surface as BackendUnavailable") {
  // A port nothing listens on; retries are exhausted quickly.
  HttpChatClient client({"http://127.0.0.1:9", 0.2, 0});
  ChatRequest request;
  request.messages.push_back({"user", "hello"});
  CHECK_THROWS_AS(client.complete(request), BackendUnavailable);

  BackendConfig cfg;
  cfg.max_retries = 0;
  RemoteBackend backend(cfg, "http://127.0.0.1:9");
  CHECK_THROWS_AS(backend.detect(opaque_image(), "cat"), BackendUnavailable);
}

TEST_CASE("non-retryable errors surface as ServiceError") {
  TestServer server;
  CHECK_THROWS_AS(http_post_json({server.url(), 5.0, 1}, "/missing",
                                 nlohmann::json::object()),
                  ServiceError);
}
