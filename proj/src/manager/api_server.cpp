#include "mobagent/manager/api_server.hpp"

#include <httplib.h>

#include <charconv>

#include "mobagent/api/json_codec.hpp"

namespace mobagent::manager {

namespace {

using proto::ControlVerb;

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, Errc code, const std::string& message, const std::string& detail = {}) {
  json body{{"error", std::string(errc_name(code))}, {"message", message}};
  if (!detail.empty()) body["detail"] = detail;
  send_json(res, http_status(code), body);
}

// Wraps a handler so every failure becomes a JSON error body.
httplib::Server::Handler guarded(std::function<void(const httplib::Request&, httplib::Response&)> fn) {
  return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_error(res, e.code(), e.what(), e.detail());
    } catch (const json::exception& e) {
      send_error(res, Errc::kFieldRange, std::string("bad JSON: ") + e.what());
    } catch (const std::exception& e) {
      send_json(res, 500, {{"error", "INTERNAL"}, {"message", e.what()}});
    }
  };
}

std::int64_t int_param(const httplib::Request& req, const char* name) {
  const auto v = req.get_param_value(name);
  std::int64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw Error(Errc::kFieldRange, std::string(name) + " must be an integer (UTC ms)");
  }
  return out;
}

std::string sse_frame(const Event& e) {
  return "id: " + std::to_string(e.id) + "\nevent: " + e.type + "\ndata: " + e.data.dump() + "\n\n";
}

}  // namespace

int http_status(Errc code) {
  switch (code) {
    case Errc::kUnknownHost:
    case Errc::kUnknownId:
    case Errc::kUnknownTask:
    case Errc::kNoSuchTable:
      return 404;
    case Errc::kInvalidForm:
    case Errc::kFieldRange:
    case Errc::kInvalidProgram:
    case Errc::kEmptyTargets:
      return 400;
    case Errc::kHostInactive:
    case Errc::kBadState:
    case Errc::kStaleVersion:
    case Errc::kDuplicateId:
      return 409;
    case Errc::kIoError:
    case Errc::kKeyError:
      return 500;
    default:
      return 502;
  }
}

ApiServer::ApiServer(Manager& manager, std::string static_dir)
    : manager_(manager), static_dir_(std::move(static_dir)), server_(std::make_unique<httplib::Server>()) {
  routes();
}

ApiServer::~ApiServer() { stop(); }

std::string ApiServer::base_url() const { return "http://" + host_ + ":" + std::to_string(port_); }

void ApiServer::start(const std::string& host, std::uint16_t port) {
  host_ = host;
  if (port == 0) {
    const int p = server_->bind_to_any_port(host);
    if (p <= 0) throw Error(Errc::kNetwork, "cannot bind HTTP API on " + host);
    port_ = static_cast<std::uint16_t>(p);
  } else {
    if (!server_->bind_to_port(host, port)) {
      throw Error(Errc::kNetwork, "cannot bind HTTP API on " + host + ":" + std::to_string(port));
    }
    port_ = port;
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void ApiServer::stop() {
  if (stopping_.exchange(true)) return;
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

void ApiServer::routes() {
  auto& s = *server_;
  auto& m = manager_;

  s.Get("/hosts", guarded([&m](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, m.hosts_json());
  }));

  s.Get("/hosts/:host/agents", guarded([&m](const httplib::Request& req, httplib::Response& res) {
    const auto& host = req.path_params.at("host");
    const auto resp = m.control_proxy(host, ControlVerb::kListAgents);
    json agents = json::array();
    for (const auto& a : resp.agents) {
      auto j = api::to_json(a);
      j["host"] = host;
      agents.push_back(std::move(j));
    }
    send_json(res, 200, agents);
  }));

  s.Get("/hosts/:host/load", guarded([&m](const httplib::Request& req, httplib::Response& res) {
    const auto& host = req.path_params.at("host");
    const auto resp = m.control_proxy(host, ControlVerb::kGetLoad);
    json body = resp.load ? api::to_json(*resp.load) : json::object();
    body["host"] = host;
    send_json(res, 200, body);
  }));

  s.Post("/hosts/:host/agents/:id/:action", guarded([&m](const httplib::Request& req, httplib::Response& res) {
    const auto& host = req.path_params.at("host");
    const auto& id = req.path_params.at("id");
    const auto& action = req.path_params.at("action");
    ControlVerb verb;
    if (action == "suspend") {
      verb = ControlVerb::kSuspend;
    } else if (action == "resume") {
      verb = ControlVerb::kResume;
    } else if (action == "activate") {
      verb = ControlVerb::kActivate;
    } else {
      throw Error(Errc::kFieldRange, "unknown action " + action);
    }
    m.control_proxy(host, verb, id);
    // Answer with the row as the server now reports it.
    const auto listing = m.control_proxy(host, ControlVerb::kListAgents);
    for (const auto& a : listing.agents) {
      if (a.agent_id != id) continue;
      auto j = api::to_json(a);
      j["host"] = host;
      send_json(res, 200, j);
      return;
    }
    send_json(res, 200, {{"agent_id", id}, {"host", host}, {"status", "GONE"}});
  }));

  s.Get("/tasks", guarded([&m](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, m.tasks_json());
  }));

  s.Post("/tasks", guarded([&m](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception& e) {
      throw Error(Errc::kInvalidForm, std::string("body is not JSON: ") + e.what(), "form");
    }
    const auto created = m.create_task(api::form_from_json(body));
    json failed = json::object();
    for (const auto& [h, why] : created.failed) failed[h] = why;
    json out{{"name", created.class_id.name},
             {"version", created.class_id.version},
             {"distributed", created.distributed},
             {"failed", failed},
             {"task", m.task_json(created.class_id.name)}};
    if (!created.failed.empty()) out["warning"] = std::string(errc_name(Errc::kPartialDistribution));
    send_json(res, 201, out);
  }));

  s.Get("/tasks/:name", guarded([&m](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, m.task_json(req.path_params.at("name")));
  }));

  s.Post("/tasks/:name/run", guarded([&m](const httplib::Request& req, httplib::Response& res) {
    json out = json::array();
    for (const auto& d : m.run_round(req.path_params.at("name"))) out.push_back(to_json(d));
    send_json(res, 200, out);
  }));

  s.Get("/tasks/:name/dispatches", guarded([&m](const httplib::Request& req, httplib::Response& res) {
    json out = json::array();
    for (const auto& d : m.dispatches(req.path_params.at("name"))) out.push_back(to_json(d));
    send_json(res, 200, out);
  }));

  s.Patch("/tasks/:name/frequency", guarded([&m](const httplib::Request& req, httplib::Response& res) {
    const auto body = json::parse(req.body);
    if (!body.contains("seconds") || !body.at("seconds").is_number_integer()) {
      throw Error(Errc::kFieldRange, "body needs an integer \"seconds\"");
    }
    const auto seconds = body.at("seconds").get<std::int64_t>();
    if (seconds < 1 || seconds > 0xffffffffLL) throw Error(Errc::kFieldRange, "seconds must be >= 1");
    send_json(res, 200, m.set_frequency(req.path_params.at("name"), static_cast<std::uint32_t>(seconds)));
  }));

  s.Get("/tasks/:name/results", guarded([&m](const httplib::Request& req, httplib::Response& res) {
    const auto& name = req.path_params.at("name");
    m.task_json(name);  // 404 for unknown tasks
    ResultFilter f;
    f.task = name;
    if (req.has_param("host")) f.host = req.get_param_value("host");
    if (req.has_param("kind")) f.kind = req.get_param_value("kind");
    if (req.has_param("since")) f.since = int_param(req, "since");
    if (req.has_param("until")) f.until = int_param(req, "until");
    json out = json::array();
    for (const auto& r : m.query_results(f)) out.push_back(to_json(r));
    send_json(res, 200, out);
  }));

  s.Get("/topology", guarded([&m](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, m.topology_json());
  }));

  s.Get("/stream", [this](const httplib::Request&, httplib::Response& res) {
    auto sub = manager_.events().subscribe();
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream",
        [this, sub](std::size_t, httplib::DataSink& sink) {
          // The opening comment flushes headers so clients see the stream at once.
          if (!sink.write(": open\n\n", 8)) return false;
          int idle = 0;
          while (!stopping_ && !sub->closed()) {
            const auto e = sub->next(std::chrono::milliseconds(500));
            if (!e && ++idle < 30) continue;
            idle = 0;
            const std::string chunk = e ? sse_frame(*e) : std::string(": keepalive\n\n");
            if (!sink.is_writable() || !sink.write(chunk.data(), chunk.size())) return false;
          }
          sink.done();
          return true;
        },
        [this, sub](bool) { manager_.events().unsubscribe(sub); });
  });

  if (!static_dir_.empty()) s.set_mount_point("/", static_dir_);
}

}  // namespace mobagent::manager
