#include "mobagent/cli/cli.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <thread>

#include "mobagent/api/json_codec.hpp"
#include "mobagent/bench/migrate_compare.hpp"
#include "mobagent/manager/api_server.hpp"
#include "mobagent/manager/manager.hpp"
#include "mobagent/masd/masd.hpp"

namespace mobagent::cli {

namespace {

using nlohmann::json;

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

void wait_for_signal() {
  g_stop = false;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

// An error reported by the manager API, or a failure to reach it.
struct RemoteError : std::runtime_error {
  RemoteError(int status, std::string code, const std::string& message)
      : std::runtime_error(message), status(status), code(std::move(code)) {}
  int status;
  std::string code;
};

class Api {
 public:
  explicit Api(std::string base) : base_(std::move(base)) {}

  json get(const std::string& path) { return call("GET", path, nullptr); }
  json post(const std::string& path, const json& body = json::object()) { return call("POST", path, &body); }
  json patch(const std::string& path, const json& body) { return call("PATCH", path, &body); }

  // Reads server-sent events until the handler returns false or the stream ends.
  void stream(const std::string& path, const std::function<bool(const json&)>& on_event) {
    auto c = client();
    c.set_read_timeout(std::chrono::hours(24));
    std::string buffer;
    json current = json::object();
    bool stop = false;
    auto res = c.Get(path, [&](const char* data, std::size_t len) {
      buffer.append(data, len);
      std::size_t nl;
      while ((nl = buffer.find('\n')) != std::string::npos) {
        std::string line = buffer.substr(0, nl);
        buffer.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
          if (current.contains("event")) {
            if (!on_event(current)) {
              stop = true;
              return false;
            }
          }
          current = json::object();
        } else if (line.rfind("id: ", 0) == 0) {
          current["id"] = std::stoull(line.substr(4));
        } else if (line.rfind("event: ", 0) == 0) {
          current["event"] = line.substr(7);
        } else if (line.rfind("data: ", 0) == 0) {
          current["data"] = json::parse(line.substr(6), nullptr, false);
        }
      }
      return true;
    });
    if (!res && !stop) throw RemoteError(0, "NETWORK", "cannot reach " + base_ + ": " + httplib::to_string(res.error()));
  }

 private:
  httplib::Client client() const {
    httplib::Client c(base_);
    c.set_connection_timeout(std::chrono::seconds(3));
    c.set_read_timeout(std::chrono::seconds(60));
    return c;
  }

  json call(const std::string& method, const std::string& path, const json* body) {
    auto c = client();
    httplib::Result res{nullptr, httplib::Error::Unknown};
    const std::string payload = body ? body->dump() : std::string();
    if (method == "GET") {
      res = c.Get(path);
    } else if (method == "POST") {
      res = c.Post(path, payload, "application/json");
    } else {
      res = c.Patch(path, payload, "application/json");
    }
    if (!res) throw RemoteError(0, "NETWORK", "cannot reach " + base_ + ": " + httplib::to_string(res.error()));
    auto j = json::parse(res->body, nullptr, false);
    if (res->status >= 400) {
      const auto code = j.is_object() ? j.value("error", std::string("HTTP_") + std::to_string(res->status))
                                      : "HTTP_" + std::to_string(res->status);
      const auto msg = j.is_object() ? j.value("message", res->body) : res->body;
      throw RemoteError(res->status, code, msg);
    }
    return j;
  }

  std::string base_;
};

std::string url_encode(const std::string& s) { return httplib::detail::encode_url(s); }

std::string cell(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "-";
  return v.dump();
}

// Prints rows as aligned columns.
void print_table(std::ostream& out, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size() && i < width.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      out << std::left << std::setw(static_cast<int>(width[i]) + (i + 1 < r.size() ? 2 : 0)) << r[i];
    }
    out << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
}

void print_agents(std::ostream& out, const json& agents) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& a : agents) {
    rows.push_back({cell(a["agent_id"]), cell(a["class_name"]), cell(a["poll_mode"]), cell(a["frequency_s"]),
                    a.value("encrypt", false) ? "yes" : "no", cell(a["status"]), cell(a["priority"])});
  }
  print_table(out, {"ID", "CLASS", "POLL_MODE", "FREQ_S", "ENCRYPT", "STATUS", "PRIORITY"}, rows);
}

struct FormFlags {
  std::string name;
  std::string type = "scalar-poll";
  std::vector<std::string> oids;
  std::optional<int> filter_column;
  std::string filter_op = "EQ";
  std::string filter_value;
  std::string threshold_expr = "VALUE";
  std::string threshold_op = "GT";
  std::optional<double> threshold_limit;
  std::string mode = "periodic";
  std::uint32_t frequency = 60;
  bool encrypt = false;
  std::string device_class;
  int priority = 5;
};

json form_json(const FormFlags& f) {
  json j{{"name", f.name},
         {"service_type", f.type},
         {"oids", f.oids},
         {"poll_mode", f.mode},
         {"frequency_s", f.frequency},
         {"encrypt", f.encrypt},
         {"device_class", f.device_class},
         {"priority", f.priority}};
  if (f.filter_column) {
    json constant;
    try {
      std::size_t used = 0;
      const auto n = std::stoll(f.filter_value, &used);
      constant = used == f.filter_value.size() ? json(n) : json(f.filter_value);
    } catch (const std::exception&) {
      constant = f.filter_value;
    }
    j["filter"] = {{"column", *f.filter_column}, {"comparator", f.filter_op}, {"constant", constant}};
  }
  if (f.threshold_limit) {
    j["threshold"] = {{"expr", f.threshold_expr}, {"comparator", f.threshold_op}, {"limit", *f.threshold_limit}};
  }
  return j;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mobile-agent network monitoring: daemons, tasks and control", "mapctl"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string api_base;
  if (const char* env = std::getenv(kApiEnv)) api_base = env;
  if (api_base.empty()) api_base = kDefaultApi;
  bool as_json = false;
  app.add_option("--api", api_base, std::string("Manager API base URL (env ") + kApiEnv + ")");
  app.add_flag("--json", as_json, "Machine-readable output");

  std::function<int()> action;
  auto api = [&] { return Api(api_base); };
  auto emit = [&](const json& j, const std::function<void()>& human) {
    if (as_json) {
      out << j.dump(2) << '\n';
    } else {
      human();
    }
  };

  // manager start
  auto* manager_cmd = app.add_subcommand("manager", "Manager daemon");
  manager_cmd->require_subcommand(1);
  auto* manager_start = manager_cmd->add_subcommand("start", "Run the manager until interrupted");
  std::string m_config;
  manager::ManagerConfig mcfg;
  manager_start->add_option("--config", m_config, "JSON config file");
  auto* m_bind = manager_start->add_option("--bind", mcfg.bind_address, "Bind address");
  auto* m_fport = manager_start->add_option("--frame-port", mcfg.frame_port, "Frame port");
  auto* m_hport = manager_start->add_option("--http-port", mcfg.http_port, "HTTP API port");
  auto* m_key = manager_start->add_option("--key", mcfg.key_path, "Private key PEM");
  auto* m_data = manager_start->add_option("--data-dir", mcfg.data_dir, "Results, tasks and bundles");
  auto* m_topo = manager_start->add_option("--topology", mcfg.topology_file, "Topology file");
  auto* m_adv = manager_start->add_option("--advertise", mcfg.advertise_address, "Address agents return to");
  auto* m_static = manager_start->add_option("--static-dir", mcfg.static_dir, "Console files");
  manager_start->callback([&] {
    action = [&]() -> int {
      auto cfg = m_config.empty() ? manager::ManagerConfig{} : manager::ManagerConfig::load(m_config);
      if (m_bind->count()) cfg.bind_address = mcfg.bind_address;
      if (m_fport->count()) cfg.frame_port = mcfg.frame_port;
      if (m_hport->count()) cfg.http_port = mcfg.http_port;
      if (m_key->count()) cfg.key_path = mcfg.key_path;
      if (m_data->count()) cfg.data_dir = mcfg.data_dir;
      if (m_topo->count()) cfg.topology_file = mcfg.topology_file;
      if (m_adv->count()) cfg.advertise_address = mcfg.advertise_address;
      if (m_static->count()) cfg.static_dir = mcfg.static_dir;
      auto mgr = manager::Manager::from_config(cfg);
      mgr->start();
      manager::ApiServer http(*mgr, cfg.static_dir);
      http.start(cfg.bind_address, cfg.http_port);
      out << "manager frames=" << mgr->address() << " http=" << http.base_url() << std::endl;
      wait_for_signal();
      http.stop();
      mgr->stop();
      return kExitOk;
    };
  });

  // masd start
  auto* masd_cmd = app.add_subcommand("masd", "Agent server daemon");
  masd_cmd->require_subcommand(1);
  auto* masd_start = masd_cmd->add_subcommand("start", "Run an agent server until interrupted");
  std::string s_config;
  masd::MasdConfig scfg;
  masd_start->add_option("--config", s_config, "JSON config file");
  auto* s_id = masd_start->add_option("--host-id", scfg.host_id, "Host id");
  auto* s_bind = masd_start->add_option("--bind", scfg.bind_address, "Bind address");
  auto* s_port = masd_start->add_option("--port", scfg.port, "Agent port");
  auto* s_mgr = masd_start->add_option("--manager", scfg.manager_address, "Manager frame address host:port");
  auto* s_keys = masd_start->add_option("--trusted-key", scfg.trusted_keys, "Trusted public key PEM");
  auto* s_cache = masd_start->add_option("--cache-dir", scfg.cache_dir, "Code cache directory");
  auto* s_mib = masd_start->add_option("--mib", scfg.mib_script, "MIB script");
  auto* s_clock = masd_start->add_option("--mib-clock", scfg.mib_clock, "wall or logical")
                      ->check(CLI::IsMember({"wall", "logical"}));
  auto* s_ann = masd_start->add_option("--announce-interval-ms", scfg.announce_interval_ms, "Announce period");
  auto* s_workers = masd_start->add_option("--workers", scfg.workers, "Worker threads");
  auto* s_classes = masd_start->add_option("--device-class", scfg.device_classes, "Device class tag");
  masd_start->callback([&] {
    action = [&]() -> int {
      auto cfg = s_config.empty() ? masd::MasdConfig{} : masd::MasdConfig::load(s_config);
      if (s_id->count()) cfg.host_id = scfg.host_id;
      if (s_bind->count()) cfg.bind_address = scfg.bind_address;
      if (s_port->count()) cfg.port = scfg.port;
      if (s_mgr->count()) cfg.manager_address = scfg.manager_address;
      if (s_keys->count()) cfg.trusted_keys = scfg.trusted_keys;
      if (s_cache->count()) cfg.cache_dir = scfg.cache_dir;
      if (s_mib->count()) cfg.mib_script = scfg.mib_script;
      if (s_clock->count()) cfg.mib_clock = scfg.mib_clock;
      if (s_ann->count()) cfg.announce_interval_ms = scfg.announce_interval_ms;
      if (s_workers->count()) cfg.workers = scfg.workers;
      if (s_classes->count()) cfg.device_classes = scfg.device_classes;
      auto d = masd::Masd::from_config(cfg);
      d->start();
      out << "masd " << cfg.host_id << " listening on " << d->address() << std::endl;
      wait_for_signal();
      d->stop();
      return kExitOk;
    };
  });

  // keys generate
  auto* keys_cmd = app.add_subcommand("keys", "Key management");
  keys_cmd->require_subcommand(1);
  auto* keys_gen = keys_cmd->add_subcommand("generate", "Write a new RSA key pair");
  std::string key_dir = ".";
  std::string key_name = "manager";
  keys_gen->add_option("--out", key_dir, "Output directory");
  keys_gen->add_option("--name", key_name, "File stem");
  keys_gen->callback([&] {
    action = [&]() -> int {
      const auto kp = security::KeyPair::generate();
      kp.save(key_dir, key_name);
      const json j{{"private", key_dir + "/" + key_name + ".pem"},
                   {"public", key_dir + "/" + key_name + ".pub.pem"},
                   {"key_id", api::key_id_hex(kp.key_id())}};
      emit(j, [&] { out << "wrote " << cell(j["private"]) << " and " << cell(j["public"]) << " (key id "
                        << cell(j["key_id"]) << ")\n"; });
      return kExitOk;
    };
  });

  // task ...
  auto* task_cmd = app.add_subcommand("task", "Monitoring tasks");
  task_cmd->require_subcommand(1);

  auto* task_create = task_cmd->add_subcommand("create", "Define a task and distribute its code");
  FormFlags form;
  task_create->add_option("--name", form.name, "Class name")->required();
  task_create->add_option("--type", form.type, "scalar-poll | table-filter | threshold-monitor")
      ->check(CLI::IsMember({"scalar-poll", "table-filter", "threshold-monitor", "SCALAR_POLL", "TABLE_FILTER",
                             "THRESHOLD_MONITOR"}));
  task_create->add_option("--oid", form.oids, "OID (repeatable); the table OID for table-filter")->required();
  task_create->add_option("--filter-column", form.filter_column, "Row cell index for table-filter");
  task_create->add_option("--filter-op", form.filter_op, "EQ NE LT LE GT GE");
  task_create->add_option("--filter-value", form.filter_value, "Integer or string constant");
  task_create->add_option("--threshold-expr", form.threshold_expr, "VALUE or DELTA_PER_SECOND");
  task_create->add_option("--threshold-op", form.threshold_op, "EQ NE LT LE GT GE");
  task_create->add_option("--threshold-limit", form.threshold_limit, "Alarm limit");
  task_create->add_option("--mode", form.mode, "one-shot | periodic");
  task_create->add_option("--frequency", form.frequency, "Polling period in seconds");
  task_create->add_flag("--encrypt", form.encrypt, "Seal collected data");
  task_create->add_option("--device-class", form.device_class, "Only hosts with this tag");
  task_create->add_option("--priority", form.priority, "0..10")->check(CLI::Range(0, 10));
  task_create->callback([&] {
    action = [&]() -> int {
      const auto j = api().post("/tasks", form_json(form));
      emit(j, [&] {
        out << "created " << cell(j["name"]) << " v" << cell(j["version"]) << ", distributed to "
            << j["distributed"].size() << " server(s)\n";
        for (const auto& [h, why] : j["failed"].items()) out << "  not distributed to " << h << ": " << cell(why) << '\n';
      });
      if (j.contains("warning")) err << cell(j["warning"]) << '\n';
      return kExitOk;
    };
  });

  auto* task_list = task_cmd->add_subcommand("list", "List tasks");
  task_list->callback([&] {
    action = [&]() -> int {
      const auto j = api().get("/tasks");
      emit(j, [&] {
        std::vector<std::vector<std::string>> rows;
        for (const auto& t : j) {
          rows.push_back({cell(t["name"]), cell(t["class_version"]), cell(t["form"]["service_type"]),
                          cell(t["form"]["frequency_s"]), t.value("enabled", false) ? "yes" : "no", cell(t["round"]),
                          cell(t["in_flight"])});
        }
        print_table(out, {"NAME", "VERSION", "TYPE", "FREQ_S", "ENABLED", "ROUND", "IN_FLIGHT"}, rows);
      });
      return kExitOk;
    };
  });

  auto* task_show = task_cmd->add_subcommand("show", "Show one task and its plan");
  std::string show_name;
  task_show->add_option("name", show_name, "Task name")->required();
  task_show->callback([&] {
    action = [&]() -> int {
      const auto j = api().get("/tasks/" + url_encode(show_name));
      emit(j, [&] { out << j.dump(2) << '\n'; });
      return kExitOk;
    };
  });

  auto* task_freq = task_cmd->add_subcommand("set-frequency", "Change a task's polling period");
  std::string freq_name;
  std::int64_t freq_seconds = 0;
  task_freq->add_option("name", freq_name, "Task name")->required();
  task_freq->add_option("seconds", freq_seconds, "Seconds")->required()->check(CLI::PositiveNumber);
  task_freq->callback([&] {
    action = [&]() -> int {
      const auto j = api().patch("/tasks/" + url_encode(freq_name) + "/frequency", {{"seconds", freq_seconds}});
      emit(j, [&] {
        out << cell(j["task"]) << " frequency " << cell(j["frequency_s"]) << " s; "
            << j["resident_agents_updated"].size() << " resident agent(s) updated\n";
      });
      return kExitOk;
    };
  });

  auto* task_results = task_cmd->add_subcommand("results", "Query stored results");
  std::string res_name, res_host, res_kind;
  std::optional<std::int64_t> res_since, res_until;
  task_results->add_option("name", res_name, "Task name")->required();
  task_results->add_option("--host", res_host, "Host id");
  task_results->add_option("--kind", res_kind, "VALUES ROWS ALARM ERROR");
  task_results->add_option("--since", res_since, "UTC ms, inclusive");
  task_results->add_option("--until", res_until, "UTC ms, inclusive");
  task_results->callback([&] {
    action = [&]() -> int {
      std::string q;
      auto add = [&](const std::string& k, const std::string& v) { q += (q.empty() ? "?" : "&") + k + "=" + url_encode(v); };
      if (!res_host.empty()) add("host", res_host);
      if (!res_kind.empty()) add("kind", res_kind);
      if (res_since) add("since", std::to_string(*res_since));
      if (res_until) add("until", std::to_string(*res_until));
      const auto j = api().get("/tasks/" + url_encode(res_name) + "/results" + q);
      emit(j, [&] {
        std::vector<std::vector<std::string>> rows;
        for (const auto& r : j) {
          rows.push_back({cell(r["timestamp"]), cell(r["round"]), cell(r["host"]), cell(r["agent_id"]),
                          cell(r["kind"]), r["data"].dump()});
        }
        print_table(out, {"TIMESTAMP", "ROUND", "HOST", "AGENT", "KIND", "DATA"}, rows);
      });
      return kExitOk;
    };
  });

  auto* task_run = task_cmd->add_subcommand("run", "Dispatch one round now");
  std::string run_name;
  task_run->add_option("name", run_name, "Task name")->required();
  task_run->callback([&] {
    action = [&]() -> int {
      const auto j = api().post("/tasks/" + url_encode(run_name) + "/run");
      emit(j, [&] {
        for (const auto& d : j) {
          std::string route;
          for (const auto& h : d["route"]) route += (route.empty() ? "" : " -> ") + cell(h);
          out << cell(d["agent_id"]) << " round " << cell(d["round"]) << " [" << route << "] " << cell(d["fate"]) << '\n';
        }
      });
      return kExitOk;
    };
  });

  // agents list / agent <verb>
  auto* agents_cmd = app.add_subcommand("agents", "Resident agents");
  agents_cmd->require_subcommand(1);
  auto* agents_list = agents_cmd->add_subcommand("list", "Agents resident on a host");
  std::string agents_host;
  agents_list->add_option("--host", agents_host, "Host id")->required();
  agents_list->callback([&] {
    action = [&]() -> int {
      const auto j = api().get("/hosts/" + url_encode(agents_host) + "/agents");
      emit(j, [&] { print_agents(out, j); });
      return kExitOk;
    };
  });

  auto* agent_cmd = app.add_subcommand("agent", "Control one resident agent");
  agent_cmd->require_subcommand(1);
  std::string agent_host, agent_id;
  for (const char* verb : {"suspend", "resume", "activate"}) {
    auto* sub = agent_cmd->add_subcommand(verb, std::string(verb) + " an agent");
    sub->add_option("--host", agent_host, "Host id")->required();
    sub->add_option("--id", agent_id, "Agent id")->required();
    sub->callback([&, verb = std::string(verb)] {
      action = [&, verb]() -> int {
        const auto j = api().post("/hosts/" + url_encode(agent_host) + "/agents/" + url_encode(agent_id) + "/" + verb);
        emit(j, [&] { out << cell(j["agent_id"]) << " on " << cell(j["host"]) << ": " << cell(j["status"]) << '\n'; });
        return kExitOk;
      };
    });
  }

  // hosts list / host load
  auto* hosts_cmd = app.add_subcommand("hosts", "Discovered agent servers");
  hosts_cmd->require_subcommand(1);
  auto* hosts_list = hosts_cmd->add_subcommand("list", "Server directory");
  hosts_list->callback([&] {
    action = [&]() -> int {
      const auto j = api().get("/hosts");
      emit(j, [&] {
        std::vector<std::vector<std::string>> rows;
        for (const auto& h : j) {
          rows.push_back({cell(h["host_id"]), cell(h["address"]), cell(h["state"]), cell(h["last_announce"]),
                          std::to_string(h["bundles"].size())});
        }
        print_table(out, {"HOST", "ADDRESS", "STATE", "LAST_ANNOUNCE", "BUNDLES"}, rows);
      });
      return kExitOk;
    };
  });
  auto* host_cmd = app.add_subcommand("host", "One agent server");
  host_cmd->require_subcommand(1);
  auto* host_load = host_cmd->add_subcommand("load", "CPU and memory load");
  std::string load_host;
  host_load->add_option("--host", load_host, "Host id")->required();
  host_load->callback([&] {
    action = [&]() -> int {
      const auto j = api().get("/hosts/" + url_encode(load_host) + "/load");
      emit(j, [&] {
        out << cell(j["host"]) << ": cpu " << cell(j["cpu_percent"]) << "%, mem " << cell(j["mem_bytes_used"])
            << " bytes\n";
      });
      return kExitOk;
    };
  });

  // topo show
  auto* topo_cmd = app.add_subcommand("topo", "Topology and plans");
  topo_cmd->require_subcommand(1);
  auto* topo_show = topo_cmd->add_subcommand("show", "Managed topology and current itineraries");
  topo_show->callback([&] {
    action = [&]() -> int {
      const auto j = api().get("/topology");
      emit(j, [&] {
        out << "manager " << cell(j["manager"]) << " (" << cell(j["source"]) << ")\n";
        for (const auto& e : j["edges"]) out << "  " << cell(e["u"]) << " -- " << cell(e["v"]) << "  " << cell(e["cost"]) << '\n';
        for (const auto& [task, plan] : j["plans"].items()) {
          out << task << ":";
          if (plan.contains("routes")) {
            for (const auto& r : plan["routes"]) out << " " << r.dump();
            out << "  max=" << cell(plan["max_cost"]) << '\n';
          } else {
            out << " " << cell(plan["error"]) << '\n';
          }
        }
      });
      return kExitOk;
    };
  });

  // stream
  auto* stream_cmd = app.add_subcommand("stream", "Follow the event stream");
  std::size_t stream_count = 0;
  std::vector<std::string> stream_types;
  stream_cmd->add_option("--count", stream_count, "Stop after this many events (0: forever)");
  stream_cmd->add_option("--type", stream_types, "Only these event types");
  stream_cmd->callback([&] {
    action = [&]() -> int {
      std::size_t seen = 0;
      api().stream("/stream", [&](const json& e) {
        const auto type = e.value("event", std::string());
        if (!stream_types.empty() && std::find(stream_types.begin(), stream_types.end(), type) == stream_types.end()) {
          return true;
        }
        if (as_json) {
          out << e.dump() << std::endl;
        } else {
          out << type << " " << e.value("data", json()).dump() << std::endl;
        }
        return stream_count == 0 || ++seen < stream_count;
      });
      return kExitOk;
    };
  });

  // bench migrate-compare
  auto* bench_cmd = app.add_subcommand("bench", "Benchmarks");
  bench_cmd->require_subcommand(1);
  auto* bench_mc = bench_cmd->add_subcommand("migrate-compare", "Bytes moved: state-only vs code-and-state");
  std::size_t bench_rounds = 10;
  std::size_t bench_hosts = 5;
  bench_mc->add_option("--rounds", bench_rounds, "Rounds per template")->check(CLI::PositiveNumber);
  bench_mc->add_option("--hosts", bench_hosts, "Agent servers")->check(CLI::Range(1, 32));
  bench_mc->callback([&] {
    action = [&]() -> int {
      const auto reports = bench::migrate_compare_all(bench_rounds, bench_hosts);
      json j = json::array();
      for (const auto& r : reports) j.push_back(bench::to_json(r));
      emit(j, [&] { out << bench::render_table(reports); });
      return kExitOk;
    };
  });

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    // Help requests exit 0; everything else is a usage error.
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }
  if (!action) {
    err << "mapctl: nothing to do\n";
    return kExitUsage;
  }
  try {
    return action();
  } catch (const RemoteError& e) {
    err << "mapctl: " << e.code << ": " << e.what() << '\n';
    return kExitRemote;
  } catch (const Error& e) {
    err << "mapctl: " << errc_name(e.code()) << ": " << e.what() << '\n';
    return kExitRemote;
  } catch (const std::exception& e) {
    err << "mapctl: " << e.what() << '\n';
    return kExitRemote;
  }
}

}  // namespace mobagent::cli
