#include "semroute/sim/server.hpp"

#include <httplib.h>

#include <chrono>
#include <sstream>

#include "semroute/embedding.hpp"
#include "semroute/sim/simulator.hpp"

namespace semroute::sim {

namespace {

void send_error(httplib::Response& res, int status, const std::string& msg) {
  res.status = status;
  res.set_content(nlohmann::json({{"error", msg}}).dump(),
                  "application/json");
}

// x-reasoning-mode header wins; otherwise the reasoning flag in the body
// (the default field-toggle location) decides.
bool resolve_mode(const httplib::Request& req, const nlohmann::json& body,
                  ReasoningMode* mode) {
  if (req.has_header("x-reasoning-mode")) {
    const std::string v = req.get_header_value("x-reasoning-mode");
    if (v == "on") {
      *mode = ReasoningMode::On;
      return true;
    }
    if (v == "off") {
      *mode = ReasoningMode::Off;
      return true;
    }
    return false;
  }
  if (body.contains("chat_template_kwargs") &&
      body["chat_template_kwargs"].is_object() &&
      body["chat_template_kwargs"].contains("enable_thinking") &&
      body["chat_template_kwargs"]["enable_thinking"].is_boolean()) {
    *mode = body["chat_template_kwargs"]["enable_thinking"].get<bool>()
                ? ReasoningMode::On
                : ReasoningMode::Off;
    return true;
  }
  return false;
}

}  // namespace

struct SimServer::Impl {
  httplib::Server server;
};

SimServer::SimServer(CostModel model, SimServerOptions options)
    : impl_(std::make_unique<Impl>()),
      model_(std::move(model)),
      options_(std::move(options)) {}

SimServer::~SimServer() { stop(); }

bool SimServer::start() {
  httplib::Server& svr = impl_->server;
  svr.new_task_queue = [] { return new httplib::ThreadPool(32); };

  svr.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("ok", "text/plain");
  });

  svr.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                          httplib::Response& res) {
    if (!req.has_header("x-semantic-category")) {
      send_error(res, 400, "missing x-semantic-category header");
      return;
    }
    const std::string category = req.get_header_value("x-semantic-category");

    RequestEnvelope envelope;
    try {
      envelope = RequestEnvelope::parse(req.body);
    } catch (const RequestParseError& e) {
      send_error(res, 400, e.what());
      return;
    }

    ReasoningMode mode;
    if (!resolve_mode(req, envelope.doc, &mode)) {
      send_error(res, 400,
                 "missing x-reasoning-mode header and no reasoning flag in "
                 "body");
      return;
    }

    std::string request_id = req.get_header_value("x-router-decision-id");
    if (request_id.empty()) {
      std::ostringstream os;
      os << std::hex << fnv1a64(req.body);
      request_id = os.str();
    }

    SimResponse sim;
    try {
      sim = simulate(envelope, {category, mode, request_id}, model_);
    } catch (const SimError& e) {
      send_error(res, 400, e.what());
      return;
    }

    if (options_.time_scale > 0.0) {
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(
          sim.latency_ms * options_.time_scale));
    }
    res.set_content(sim.body.dump(), "application/json");
  });

  if (options_.port == 0) {
    port_ = svr.bind_to_any_port(options_.host);
    if (port_ < 0) return false;
  } else {
    if (!svr.bind_to_port(options_.host, options_.port)) return false;
    port_ = options_.port;
  }
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  svr.wait_until_ready();
  return true;
}

void SimServer::stop() {
  if (impl_ && impl_->server.is_running()) {
    impl_->server.stop();
  }
  if (thread_.joinable()) thread_.join();
}

}  // namespace semroute::sim
