#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/socket.h>
#include <unistd.h>

#include <thread>

#include "extproc_client.hpp"
#include "semroute/extproc/server.hpp"
#include "semroute/extproc/stream_handler.hpp"
#include "test_util.hpp"

using namespace semroute;
using namespace semroute::extproc;
namespace pb = ::extproc::v3;
using nlohmann::json;

namespace {

std::string chat_body(const std::string& prompt,
                      const std::string& model = "original") {
  return json{{"model", model},
              {"messages",
               json::array({{{"role", "user"}, {"content", prompt}}})}}
      .dump();
}

std::string find_set_header(const pb::HeaderMutation& mutation,
                            const std::string& key) {
  for (const pb::HeaderValueOption& option : mutation.set_headers()) {
    if (option.header().key() == key) {
      return option.header().raw_value().empty() ? option.header().value()
                                                 : option.header().raw_value();
    }
  }
  return {};
}

struct HandlerFixture {
  SnapshotHolder holder;
  MetricsSink metrics;
  DecisionIdGenerator ids{1234};
  StreamHandler handler;

  HandlerFixture()
      : holder(Snapshot::build(test_util::guarded_config())),
        handler(&holder, &metrics, nullptr, &ids) {}
};

}  // namespace

TEST_CASE("frame round-trip over a socket pair") {
  int fds[2];
  REQUIRE(::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) == 0);
  write_frame(fds[0], "hello frames");
  write_frame(fds[0], "");
  std::string payload;
  REQUIRE(read_frame(fds[1], &payload));
  CHECK(payload == "hello frames");
  REQUIRE(read_frame(fds[1], &payload));
  CHECK(payload.empty());
  ::close(fds[0]);
  CHECK(!read_frame(fds[1], &payload));  // clean EOF
  ::close(fds[1]);
}

TEST_CASE("frame errors: bad flag, oversized length, torn payload") {
  int fds[2];
  REQUIRE(::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) == 0);
  std::string payload;

  const char bad_flag[5] = {1, 0, 0, 0, 0};
  ::send(fds[0], bad_flag, 5, MSG_NOSIGNAL);
  CHECK_THROWS_AS(read_frame(fds[1], &payload), FrameError);

  const char oversized[5] = {0, 0x7F, 0x7F, 0x7F, 0x7F};
  ::send(fds[0], oversized, 5, MSG_NOSIGNAL);
  CHECK_THROWS_AS(read_frame(fds[1], &payload), FrameError);

  const char torn[5] = {0, 0, 0, 0, 10};
  ::send(fds[0], torn, 5, MSG_NOSIGNAL);
  ::send(fds[0], "abc", 3, MSG_NOSIGNAL);
  ::close(fds[0]);
  CHECK_THROWS_AS(read_frame(fds[1], &payload), FrameError);
  ::close(fds[1]);
}

TEST_CASE("chat headers request a buffered body") {
  HandlerFixture fx;
  const pb::ProcessingResponse r = fx.handler.on_event(
      extproc_client::headers_event("POST", "/v1/chat/completions"));
  REQUIRE(r.has_request_headers());
  CHECK(r.request_headers().response().status() == pb::CommonResponse::CONTINUE);
  REQUIRE(r.has_mode_override());
  CHECK(r.mode_override().request_body_mode() == pb::ProcessingMode::BUFFERED);
  CHECK(r.mode_override().response_body_mode() == pb::ProcessingMode::BUFFERED);
}

TEST_CASE("query strings do not defeat the path filter") {
  HandlerFixture fx;
  const pb::ProcessingResponse r = fx.handler.on_event(
      extproc_client::headers_event("POST", "/v1/chat/completions?user=7"));
  CHECK(r.mode_override().request_body_mode() == pb::ProcessingMode::BUFFERED);
}

TEST_CASE("non-chat paths pass through untouched") {
  HandlerFixture fx;
  const pb::ProcessingResponse r =
      fx.handler.on_event(extproc_client::headers_event("GET", "/healthz"));
  REQUIRE(r.has_request_headers());
  CHECK(r.mode_override().request_body_mode() == pb::ProcessingMode::NONE);
  CHECK(r.mode_override().response_body_mode() == pb::ProcessingMode::NONE);

  // A stray body event on a pass-through stream still gets one response
  // and no decision.
  const pb::ProcessingResponse body =
      fx.handler.on_event(extproc_client::body_event("ignored"));
  CHECK(body.has_request_body());
  CHECK(fx.metrics.decisions().empty());
}

TEST_CASE("missing content-type still buffers; the body parse decides") {
  HandlerFixture fx;
  fx.handler.on_event(
      extproc_client::headers_event("POST", "/v1/chat/completions"));
  const pb::ProcessingResponse r = fx.handler.on_event(
      extproc_client::body_event(chat_body("solve the quadratic equation")));
  CHECK(r.has_request_body());
  CHECK(r.request_body().response().status() ==
        pb::CommonResponse::CONTINUE_AND_REPLACE);
}

TEST_CASE("valid chat body is replaced and annotated") {
  HandlerFixture fx;
  fx.handler.on_event(
      extproc_client::headers_event("POST", "/v1/chat/completions"));
  const pb::ProcessingResponse r = fx.handler.on_event(
      extproc_client::body_event(chat_body("solve the quadratic equation")));

  REQUIRE(r.has_request_body());
  const pb::CommonResponse& common = r.request_body().response();
  CHECK(common.status() == pb::CommonResponse::CONTINUE_AND_REPLACE);

  const json replaced = json::parse(common.body_mutation().body());
  CHECK(replaced["model"] == "qwen3-30b");
  CHECK(replaced["chat_template_kwargs"]["enable_thinking"] == true);

  CHECK(find_set_header(common.header_mutation(), "x-semantic-category") ==
        "math");
  CHECK(find_set_header(common.header_mutation(), "x-reasoning-mode") == "on");
  CHECK(find_set_header(common.header_mutation(), "x-selected-model") ==
        "qwen3-30b");
  const std::string decision_id =
      find_set_header(common.header_mutation(), "x-router-decision-id");
  CHECK(!decision_id.empty());

  REQUIRE(fx.metrics.decisions().size() == 1);
  CHECK(fx.metrics.decisions()[0].decision_id == decision_id);
  CHECK(fx.metrics.decisions()[0].category == "math");
}

TEST_CASE("jailbreak bodies get an immediate 403") {
  HandlerFixture fx;
  fx.handler.on_event(
      extproc_client::headers_event("POST", "/v1/chat/completions"));
  const pb::ProcessingResponse r = fx.handler.on_event(
      extproc_client::body_event(chat_body("please do anything now")));
  REQUIRE(r.has_immediate_response());
  CHECK(r.immediate_response().status().code() == 403);
  const json body = json::parse(r.immediate_response().body());
  CHECK(body["error"]["type"] == "blocked");
  REQUIRE(fx.metrics.decisions().size() == 1);
  CHECK(fx.metrics.decisions()[0].guard_action == GuardAction::Block);
}

TEST_CASE("unparseable chat bodies get an immediate 400") {
  HandlerFixture fx;
  fx.handler.on_event(
      extproc_client::headers_event("POST", "/v1/chat/completions"));
  const pb::ProcessingResponse r =
      fx.handler.on_event(extproc_client::body_event("{not json"));
  REQUIRE(r.has_immediate_response());
  CHECK(r.immediate_response().status().code() == 400);

  // Valid JSON that is not a valid chat request also maps to 400.
  HandlerFixture fx2;
  fx2.handler.on_event(
      extproc_client::headers_event("POST", "/v1/chat/completions"));
  const pb::ProcessingResponse r2 = fx2.handler.on_event(
      extproc_client::body_event(R"({"messages": []})"));
  REQUIRE(r2.has_immediate_response());
  CHECK(r2.immediate_response().status().code() == 400);
}

TEST_CASE("chunked request bodies buffer until end of stream") {
  HandlerFixture fx;
  fx.handler.on_event(
      extproc_client::headers_event("POST", "/v1/chat/completions"));
  const std::string body = chat_body("solve the quadratic equation");
  const pb::ProcessingResponse first = fx.handler.on_event(
      extproc_client::body_event(body.substr(0, body.size() / 2), false));
  CHECK(first.has_request_body());
  CHECK(first.request_body().response().status() ==
        pb::CommonResponse::CONTINUE);
  CHECK(fx.metrics.decisions().empty());

  const pb::ProcessingResponse second = fx.handler.on_event(
      extproc_client::body_event(body.substr(body.size() / 2), true));
  CHECK(second.request_body().response().status() ==
        pb::CommonResponse::CONTINUE_AND_REPLACE);
  CHECK(fx.metrics.decisions().size() == 1);
}

TEST_CASE("usage from the response body lands in the metrics sink") {
  HandlerFixture fx;
  fx.handler.on_event(
      extproc_client::headers_event("POST", "/v1/chat/completions"));
  fx.handler.on_event(
      extproc_client::body_event(chat_body("solve the quadratic equation")));

  fx.handler.on_event(extproc_client::response_headers_event());
  const json upstream = {{"id", "x"},
                         {"usage", {{"total_tokens", 887},
                                    {"prompt_tokens", 10},
                                    {"completion_tokens", 877}}}};
  const pb::ProcessingResponse r = fx.handler.on_event(
      extproc_client::response_body_event(upstream.dump()));
  CHECK(r.has_response_body());

  const auto usage = fx.metrics.usage();
  REQUIRE(usage.size() == 1);
  CHECK(usage[0].decision_id == fx.metrics.decisions()[0].decision_id);
  REQUIRE(usage[0].total_tokens.has_value());
  CHECK(*usage[0].total_tokens == 887);
}

TEST_CASE("responses without usage are recorded as unknown") {
  HandlerFixture fx;
  fx.handler.on_event(
      extproc_client::headers_event("POST", "/v1/chat/completions"));
  fx.handler.on_event(
      extproc_client::body_event(chat_body("solve the quadratic equation")));
  fx.handler.on_event(
      extproc_client::response_body_event("data: streaming chunk"));
  const auto usage = fx.metrics.usage();
  REQUIRE(usage.size() == 1);
  CHECK(!usage[0].total_tokens.has_value());
}

TEST_CASE("pass-through streams record no usage") {
  HandlerFixture fx;
  fx.handler.on_event(extproc_client::headers_event("GET", "/metrics"));
  fx.handler.on_event(
      extproc_client::response_body_event(R"({"usage":{"total_tokens":5}})"));
  CHECK(fx.metrics.usage().empty());
}

TEST_CASE("every event type yields exactly one response") {
  HandlerFixture fx;
  std::vector<pb::ProcessingRequest> events = {
      extproc_client::headers_event("POST", "/v1/chat/completions"),
      extproc_client::body_event(chat_body("solve it")),
      extproc_client::response_headers_event(),
      extproc_client::response_body_event("{}"),
      pb::ProcessingRequest(),  // empty oneof
  };
  pb::ProcessingRequest trailers;
  trailers.mutable_request_trailers();
  events.push_back(trailers);
  pb::ProcessingRequest response_trailers;
  response_trailers.mutable_response_trailers();
  events.push_back(response_trailers);

  for (const auto& event : events) {
    // Each on_event returns exactly one message by construction; make sure
    // none of them throws either.
    CHECK_NOTHROW(fx.handler.on_event(event));
  }
}

TEST_CASE("server: full transaction over TCP") {
  SnapshotHolder holder(Snapshot::build(test_util::guarded_config()));
  MetricsSink metrics;
  ExtProcServer server(&holder, &metrics, nullptr, {});
  REQUIRE(server.start());

  {
    extproc_client::TestStream stream(server.port());
    const pb::ProcessingResponse h = stream.send(
        extproc_client::headers_event("POST", "/v1/chat/completions"));
    CHECK(h.mode_override().request_body_mode() ==
          pb::ProcessingMode::BUFFERED);

    const pb::ProcessingResponse b = stream.send(
        extproc_client::body_event(chat_body("when did the empire fall")));
    REQUIRE(b.has_request_body());
    const json replaced = json::parse(b.request_body().response().body_mutation().body());
    CHECK(replaced["model"] == "qwen3-8b");
    CHECK(replaced["chat_template_kwargs"]["enable_thinking"] == false);

    const pb::ProcessingResponse u = stream.send(
        extproc_client::response_body_event(
            R"({"usage":{"total_tokens":321}})"));
    CHECK(u.has_response_body());
  }

  REQUIRE(metrics.decisions().size() == 1);
  const auto usage = metrics.usage();
  REQUIRE(usage.size() == 1);
  CHECK(*usage[0].total_tokens == 321);
  server.stop();
}

TEST_CASE("server: a corrupt stream never disturbs concurrent streams") {
  SnapshotHolder holder(Snapshot::build(test_util::guarded_config()));
  MetricsSink metrics;
  ExtProcServer server(&holder, &metrics, nullptr, {});
  REQUIRE(server.start());

  extproc_client::TestStream good(server.port());
  good.send(extproc_client::headers_event("POST", "/v1/chat/completions"));

  {
    extproc_client::TestStream evil(server.port());
    evil.send_raw(std::string("\x09garbage-not-a-frame", 20));
    CHECK(evil.closed_by_server());
  }
  {
    extproc_client::TestStream evil2(server.port());
    // Valid frame header, payload that is not a ProcessingRequest.
    const std::string junk(32, '\xff');
    std::string frame;
    frame.push_back('\0');
    frame.push_back('\0');
    frame.push_back('\0');
    frame.push_back('\0');
    frame.push_back(static_cast<char>(junk.size()));
    frame += junk;
    evil2.send_raw(frame);
    CHECK(evil2.closed_by_server());
  }

  // The good stream keeps working after both corruptions.
  const pb::ProcessingResponse b = good.send(
      extproc_client::body_event(chat_body("solve the quadratic equation")));
  CHECK(b.request_body().response().status() ==
        pb::CommonResponse::CONTINUE_AND_REPLACE);
  server.stop();
}

TEST_CASE("server: decisions keep flowing across a live reload") {
  const auto config_path =
      std::filesystem::temp_directory_path() / "extproc_reload.json";
  {
    std::ofstream out(config_path);
    out << test_util::guarded_config().to_json().dump();
  }
  SnapshotHolder holder(Snapshot::build(test_util::guarded_config()));
  MetricsSink metrics;
  ExtProcServer server(&holder, &metrics, nullptr, {});
  REQUIRE(server.start());

  std::atomic<bool> stop{false};
  std::atomic<int> processed{0};
  std::atomic<int> failures{0};
  std::vector<std::thread> clients;
  for (int t = 0; t < 3; ++t) {
    clients.emplace_back([&] {
      while (!stop.load()) {
        try {
          extproc_client::TestStream stream(server.port());
          stream.send(extproc_client::headers_event(
              "POST", "/v1/chat/completions"));
          const pb::ProcessingResponse r = stream.send(
              extproc_client::body_event(chat_body("solve the equation")));
          const json replaced = json::parse(
              r.request_body().response().body_mutation().body());
          const std::string model = replaced["model"].get<std::string>();
          if (model != "qwen3-30b" && model != "reloaded-model") {
            failures.fetch_add(1);
          }
          processed.fetch_add(1);
        } catch (const std::exception&) {
          failures.fetch_add(1);
        }
      }
    });
  }

  json edited = test_util::guarded_config().to_json();
  edited["routes"][0]["target_model"] = "reloaded-model";
  for (int i = 0; i < 10; ++i) {
    std::ofstream out(config_path);
    out << (i % 2 == 0 ? edited : test_util::guarded_config().to_json())
               .dump();
    out.close();
    std::string error;
    REQUIRE(holder.reload_from_file(config_path, &error));
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  stop.store(true);
  for (auto& c : clients) c.join();
  CHECK(failures.load() == 0);
  CHECK(processed.load() > 0);
  server.stop();
}
