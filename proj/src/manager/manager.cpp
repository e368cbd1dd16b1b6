#include "mobagent/manager/manager.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mobagent/api/json_codec.hpp"

namespace mobagent::manager {

namespace fs = std::filesystem;
using proto::ControlVerb;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string task_of_agent(const std::string& agent_id) {
  const auto colon = agent_id.rfind(':');
  return colon == std::string::npos ? agent_id : agent_id.substr(0, colon);
}

json error_data(const std::string& code, const std::string& message) {
  return {{"code", code}, {"message", message}};
}

}  // namespace

ManagerConfig ManagerConfig::parse(std::string_view json_text) {
  ManagerConfig c;
  try {
    const auto j = json::parse(json_text);
    c.host_id = j.value("host_id", c.host_id);
    c.bind_address = j.value("bind_address", c.bind_address);
    c.frame_port = j.value("frame_port", c.frame_port);
    c.http_port = j.value("http_port", c.http_port);
    c.advertise_address = j.value("advertise_address", c.advertise_address);
    c.key_path = j.value("key_path", c.key_path);
    c.data_dir = j.value("data_dir", c.data_dir);
    c.topology_file = j.value("topology_file", c.topology_file);
    c.host_ttl_ms = j.value("host_ttl_ms", c.host_ttl_ms);
    c.lost_timeout_ms = j.value("lost_timeout_ms", c.lost_timeout_ms);
    c.k_max = j.value("k_max", c.k_max);
    c.cost.s0 = j.value("s0", c.cost.s0);
    c.cost.sd = j.value("sd", c.cost.sd);
    c.tick_interval_ms = j.value("tick_interval_ms", c.tick_interval_ms);
    c.static_dir = j.value("static_dir", c.static_dir);
  } catch (const json::exception& e) {
    throw Error(Errc::kFieldRange, std::string("manager config: ") + e.what());
  }
  if (!(c.cost.s0 > 0) || c.cost.sd < 0) throw Error(Errc::kFieldRange, "cost needs s0 > 0 and sd >= 0");
  return c;
}

ManagerConfig ManagerConfig::load(const std::string& path) { return parse(read_file(path)); }

std::string_view to_string(HostState s) { return s == HostState::kActive ? "ACTIVE" : "INACTIVE"; }

std::string_view to_string(AgentFate f) {
  switch (f) {
    case AgentFate::kInFlight: return "IN_FLIGHT";
    case AgentFate::kReturned: return "RETURNED";
    case AgentFate::kRejected: return "REJECTED";
    case AgentFate::kLost: return "LOST";
    case AgentFate::kDispatchFailed: return "DISPATCH_FAILED";
  }
  return "?";
}

json to_json(const DirectoryEntry& e) {
  json bundles = json::array();
  for (const auto& b : e.bundles) {
    bundles.push_back({{"name", b.name}, {"version", b.version}, {"digest", to_hex(b.digest.data(), b.digest.size())}});
  }
  return {{"host_id", e.host_id},
          {"address", e.address},
          {"state", std::string(to_string(e.state))},
          {"last_announce", e.last_announce},
          {"load", api::to_json(e.load)},
          {"bundles", bundles},
          {"device_classes", e.device_classes}};
}

json to_json(const DispatchRecord& d) {
  return {{"agent_id", d.agent_id},       {"round", d.round},
          {"class_version", d.class_version}, {"route", d.route},
          {"dispatched_at", d.dispatched_at}, {"fate", std::string(to_string(d.fate))},
          {"code", d.code}};
}

json to_json(const ResultRecord& r) {
  return {{"task", r.task},
          {"round", r.round},
          {"agent_id", r.agent_id},
          {"host", r.host},
          {"timestamp", r.timestamp},
          {"kind", r.kind},
          {"class_version", r.class_version},
          {"data", r.data}};
}

ResultRecord result_from_json(const json& j) {
  ResultRecord r;
  r.task = j.at("task").get<std::string>();
  r.round = j.at("round").get<std::uint64_t>();
  r.agent_id = j.at("agent_id").get<std::string>();
  r.host = j.at("host").get<std::string>();
  r.timestamp = j.at("timestamp").get<TimestampMs>();
  r.kind = j.at("kind").get<std::string>();
  r.class_version = j.value("class_version", 0u);
  r.data = j.value("data", json::object());
  return r;
}

bool ServerDirectory::upsert(const proto::Announce& a, TimestampMs now) {
  std::lock_guard lock(mu_);
  auto [it, inserted] = entries_.try_emplace(a.host_id);
  auto& e = it->second;
  const bool revived = !inserted && e.state == HostState::kInactive;
  e.host_id = a.host_id;
  e.address = a.address + ":" + std::to_string(a.listen_port);
  e.last_announce = now;
  e.load = a.load;
  e.bundles = a.bundles;
  e.device_classes = a.device_classes;
  e.state = HostState::kActive;
  return inserted || revived;
}

std::vector<std::string> ServerDirectory::expire(TimestampMs now) {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (auto& [id, e] : entries_) {
    if (e.state == HostState::kActive && now - e.last_announce > ttl_ms_) {
      e.state = HostState::kInactive;
      out.push_back(id);
    }
  }
  return out;
}

std::optional<DirectoryEntry> ServerDirectory::find(const std::string& host_id) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(host_id);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::string> ServerDirectory::host_for_address(const std::string& address) const {
  std::lock_guard lock(mu_);
  for (const auto& [id, e] : entries_) {
    if (e.address == address) return id;
  }
  return std::nullopt;
}

std::vector<DirectoryEntry> ServerDirectory::list() const {
  std::lock_guard lock(mu_);
  std::vector<DirectoryEntry> out;
  for (const auto& [_, e] : entries_) out.push_back(e);
  return out;
}

std::vector<DirectoryEntry> ServerDirectory::active() const {
  auto all = list();
  std::erase_if(all, [](const DirectoryEntry& e) { return e.state != HostState::kActive; });
  return all;
}

ResultStore::ResultStore(std::string path) : path_(std::move(path)) {
  const auto parent = fs::path(path_).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    fs::create_directories(parent, ec);
    if (ec) throw Error(Errc::kIoError, "cannot create " + parent.string());
  }
}

void ResultStore::append(const std::vector<ResultRecord>& records) {
  if (records.empty()) return;
  std::lock_guard lock(mu_);
  std::ofstream out(path_, std::ios::app);
  if (!out) throw Error(Errc::kIoError, "cannot open " + path_);
  for (const auto& r : records) out << to_json(r).dump() << '\n';
  out.flush();
  if (!out) throw Error(Errc::kIoError, "cannot append to " + path_);
}

std::vector<ResultRecord> ResultStore::query(const ResultFilter& f) const {
  std::lock_guard lock(mu_);
  std::vector<ResultRecord> out;
  std::ifstream in(path_);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ResultRecord r;
    try {
      r = result_from_json(json::parse(line));
    } catch (const std::exception&) {
      continue;  // a torn final line after a crash
    }
    if (f.task && r.task != *f.task) continue;
    if (f.host && r.host != *f.host) continue;
    if (f.kind && r.kind != *f.kind) continue;
    if (f.since && r.timestamp < *f.since) continue;
    if (f.until && r.timestamp > *f.until) continue;
    out.push_back(std::move(r));
  }
  return out;
}

std::optional<Event> EventBus::Subscription::next(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [this] { return closed_ || !queue_.empty(); });
  if (queue_.empty()) return std::nullopt;
  auto e = std::move(queue_.front());
  queue_.pop_front();
  return e;
}

bool EventBus::Subscription::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

std::shared_ptr<EventBus::Subscription> EventBus::subscribe() {
  auto s = std::make_shared<Subscription>();
  std::lock_guard lock(mu_);
  s->closed_ = closed_;
  subs_.push_back(s);
  return s;
}

void EventBus::unsubscribe(const std::shared_ptr<Subscription>& s) {
  std::lock_guard lock(mu_);
  std::erase(subs_, s);
}

void EventBus::publish(const std::string& type, json data) {
  std::lock_guard lock(mu_);
  Event e{++next_id_, type, std::move(data)};
  for (const auto& s : subs_) {
    {
      std::lock_guard sl(s->mu_);
      s->queue_.push_back(e);
    }
    s->cv_.notify_all();
  }
}

void EventBus::close() {
  std::lock_guard lock(mu_);
  closed_ = true;
  for (const auto& s : subs_) {
    {
      std::lock_guard sl(s->mu_);
      s->closed_ = true;
    }
    s->cv_.notify_all();
  }
}

std::uint64_t EventBus::published() const {
  std::lock_guard lock(mu_);
  return next_id_;
}

Manager::Manager(ManagerConfig config, security::KeyPair key, std::shared_ptr<net::Transport> transport,
                 std::shared_ptr<Clock> clock)
    : config_(std::move(config)),
      key_(std::move(key)),
      transport_(transport ? std::move(transport) : std::make_shared<net::TcpTransport>()),
      clock_(clock ? std::move(clock) : system_clock()),
      directory_(config_.host_ttl_ms),
      store_((fs::path(config_.data_dir) / "results.jsonl").string()),
      repo_((fs::path(config_.data_dir) / "bundles").string()) {
  if (config_.advertise_address.empty()) config_.advertise_address = config_.bind_address;
  self_trust_.add(key_.public_key());
  if (!config_.topology_file.empty()) file_topology_ = itinerary::Topology::load(config_.topology_file);
  load_tasks();
}

Manager::~Manager() { stop(); }

std::unique_ptr<Manager> Manager::from_config(const ManagerConfig& config, std::shared_ptr<net::Transport> transport) {
  if (config.key_path.empty()) throw Error(Errc::kKeyError, "manager needs key_path");
  return std::make_unique<Manager>(config, security::KeyPair::load(config.key_path), std::move(transport));
}

std::string Manager::address() const {
  const auto port = server_ ? server_->port() : config_.frame_port;
  return config_.advertise_address + ":" + std::to_string(port);
}

void Manager::start(bool housekeeping) {
  if (running_) return;
  server_ = std::make_unique<net::FrameServer>(config_.bind_address, config_.frame_port,
                                               [this](const proto::Frame& f) { return handle_frame(f); });
  server_->start();
  running_ = true;
  if (housekeeping) housekeeper_ = std::thread([this] { housekeeping_loop(); });
}

void Manager::stop() {
  if (!running_.exchange(false)) return;
  tick_cv_.notify_all();
  if (housekeeper_.joinable()) housekeeper_.join();
  if (server_) server_->stop();
  events_.close();
}

void Manager::housekeeping_loop() {
  while (running_) {
    try {
      tick();
    } catch (const std::exception&) {
      // Individual failures are already reported as events.
    }
    std::unique_lock lock(tick_mu_);
    tick_cv_.wait_for(lock, std::chrono::milliseconds(config_.tick_interval_ms), [this] { return !running_; });
  }
}

std::optional<Bytes> Manager::handle_frame(const proto::Frame& frame) {
  try {
    const auto payload = proto::unpack_payload(frame);
    switch (frame.type) {
      case proto::MsgType::kAnnounce:
        on_announce(proto::decode_announce(payload));
        break;
      case proto::MsgType::kAgentState:
        on_returning_agent(payload);
        break;
      case proto::MsgType::kResult:
        on_notice(proto::decode_result_notice(payload));
        break;
      default:
        break;
    }
  } catch (const Error& e) {
    events_.publish("dispatch", {{"event", "frame_rejected"}, {"code", std::string(errc_name(e.code()))},
                                 {"message", e.what()}});
  }
  return std::nullopt;
}

std::string Manager::host_name(const std::string& host_or_address) const {
  if (directory_.find(host_or_address)) return host_or_address;
  if (auto h = directory_.host_for_address(host_or_address)) return *h;
  return host_or_address;
}

void Manager::on_announce(const proto::Announce& a) {
  const bool joined = directory_.upsert(a, clock_->now_ms());
  if (joined) {
    events_.publish("directory", {{"host", a.host_id}, {"state", "ACTIVE"}});
    replan_all(a.host_id, true);
  }
  reconcile(a);
}

void Manager::reconcile(const proto::Announce& a) {
  std::vector<proto::CodeBundle> stale;
  {
    std::lock_guard lock(mu_);
    for (const auto& [name, run] : tasks_) {
      auto it = std::find_if(a.bundles.begin(), a.bundles.end(),
                             [&](const proto::BundleDigest& d) { return d.name == name; });
      if (it != a.bundles.end() && it->version >= run.class_id.version) continue;
      if (auto b = repo_.load(run.class_id)) stale.push_back(std::move(*b));
    }
  }
  if (stale.empty()) return;
  const auto entry = directory_.find(a.host_id);
  if (!entry) return;
  for (const auto& b : stale) {
    const auto failure = push_bundle(*entry, b);
    events_.publish("dispatch", {{"event", "bundle_repush"},
                                 {"host", a.host_id},
                                 {"class", b.class_id.name},
                                 {"version", b.class_id.version},
                                 {"ok", failure.empty()},
                                 {"message", failure}});
  }
}

std::string Manager::push_bundle(const DirectoryEntry& host, const proto::CodeBundle& bundle) {
  try {
    const auto frame = proto::pack(proto::MsgType::kCodeBundle, proto::encode(bundle), proto::flags::kSigned);
    const auto reply = transport_->request(net::Endpoint::parse(host.address), frame);
    const auto resp = proto::decode_control_response(proto::unpack_payload(reply));
    if (resp.status != "OK") return resp.status + ": " + resp.message;
    return {};
  } catch (const std::exception& e) {
    return std::string("NETWORK: ") + e.what();
  }
}

std::vector<std::string> Manager::targets_for(const taskmodel::MagForm& form) const {
  std::vector<std::string> out;
  for (const auto& e : directory_.active()) {
    if (!form.device_class.empty() &&
        std::find(e.device_classes.begin(), e.device_classes.end(), form.device_class) == e.device_classes.end()) {
      continue;
    }
    out.push_back(e.host_id);
  }
  return out;
}

itinerary::Topology Manager::topology_for(const std::vector<std::string>& targets) const {
  if (file_topology_) return *file_topology_;
  return itinerary::Topology::complete(config_.host_id, targets);
}

void Manager::replan_all(const std::string& host, bool joined) {
  std::lock_guard lock(mu_);
  for (auto& [name, run] : tasks_) {
    const auto targets = targets_for(run.form);
    try {
      const auto topo = topology_for(targets);
      if (run.plan && !targets.empty()) {
        const itinerary::TopologyEvent ev{
            joined ? itinerary::TopologyEvent::Kind::kHostJoined : itinerary::TopologyEvent::Kind::kHostLost, host};
        bool covered = false;
        for (const auto& r : run.plan->routes) covered |= std::find(r.begin(), r.end(), host) != r.end();
        const bool relevant = joined ? std::find(targets.begin(), targets.end(), host) != targets.end() : covered;
        if (relevant && joined != covered) {
          run.plan = itinerary::replan_on_change(*run.plan, ev, topo, config_.cost, config_.k_max);
        } else {
          run.plan = itinerary::plan(topo, targets, config_.cost, config_.k_max);
        }
      } else {
        run.plan = itinerary::plan(topo, targets, config_.cost, config_.k_max);
      }
      run.plan_error.clear();
    } catch (const Error& e) {
      run.plan.reset();
      run.plan_error = e.what();
    }
  }
}

CreateResult Manager::create_task(const taskmodel::MagForm& form) {
  const auto errors = taskmodel::form_errors(form);
  if (!errors.empty()) {
    std::string detail;
    for (const auto& e : errors) detail += (detail.empty() ? "" : ",") + e;
    throw Error(Errc::kInvalidForm, "invalid fields: " + detail, detail);
  }
  const auto now = clock_->now_ms();
  proto::CodeBundle bundle;
  {
    std::lock_guard lock(mu_);
    std::uint32_t version = 1;
    if (auto it = tasks_.find(form.name); it != tasks_.end()) version = it->second.class_id.version + 1;
    if (auto latest = repo_.latest(form.name)) version = std::max(version, latest->class_id.version + 1);
    bundle = taskmodel::generate_bundle(form, version, key_, now);
    repo_.store(bundle);
    repo_.prune(form.name, version);
    auto& run = tasks_[form.name];
    run.form = form;
    run.class_id = bundle.class_id;
    run.enabled = true;
    run.next_due = now;
    run.plan.reset();
    run.plan_error.clear();
  }
  CreateResult result;
  result.class_id = bundle.class_id;
  for (const auto& host : directory_.active()) {
    const auto failure = push_bundle(host, bundle);
    if (failure.empty()) {
      result.distributed.push_back(host.host_id);
    } else {
      result.failed[host.host_id] = failure;
    }
  }
  persist_tasks();
  replan_all("", true);
  json failed = json::object();
  for (const auto& [h, why] : result.failed) failed[h] = why;
  events_.publish("dispatch", {{"event", "bundle_multicast"},
                               {"class", bundle.class_id.name},
                               {"version", bundle.class_id.version},
                               {"distributed", result.distributed},
                               {"failed", failed}});
  return result;
}

std::vector<DispatchRecord> Manager::run_round(const std::string& task) {
  struct Outgoing {
    DispatchRecord record;
    std::string first_address;
    Bytes frame;
  };
  std::vector<Outgoing> outgoing;
  const auto now = clock_->now_ms();
  std::uint64_t round = 0;
  {
    std::lock_guard lock(mu_);
    auto it = tasks_.find(task);
    if (it == tasks_.end()) throw Error(Errc::kUnknownTask, task);
    auto& run = it->second;
    if (!run.enabled) return {};
    const auto targets = targets_for(run.form);
    try {
      run.plan = itinerary::plan(topology_for(targets), targets, config_.cost, config_.k_max);
      run.plan_error.clear();
    } catch (const Error& e) {
      run.plan.reset();
      run.plan_error = e.what();
      run.next_due = now + static_cast<TimestampMs>(run.form.frequency_s) * 1000;
      events_.publish("dispatch", {{"event", "plan_failed"}, {"task", task}, {"code", std::string(errc_name(e.code()))},
                                   {"message", e.what()}});
      return {};
    }
    round = ++run.round;
    if (run.form.poll_mode == proto::PollMode::kOneShot) {
      run.enabled = false;
    } else {
      run.next_due = now + static_cast<TimestampMs>(run.form.frequency_s) * 1000;
    }
    for (const auto& route : run.plan->routes) {
      runtime::AgentHeader h;
      h.agent_id = task + ":" + std::to_string(++run.agent_seq);
      h.class_id = run.class_id;
      h.origin = address();
      h.created_at = now;
      h.priority = run.form.priority;
      h.encrypt = run.form.encrypt;
      for (const auto& host : route) {
        const auto entry = directory_.find(host);
        h.itinerary.push_back(entry ? entry->address : host);
      }
      auto state = runtime::init_agent(h, key_, &hooks_);
      const auto first = runtime::advance_itinerary(state);
      const std::uint8_t flags = proto::flags::kSigned | (state.encrypt ? proto::flags::kSealed : 0);
      Outgoing o;
      o.record = {h.agent_id, round, run.class_id.version, route, now, AgentFate::kInFlight, "", false};
      o.first_address = first.address;
      o.frame = proto::pack(proto::MsgType::kAgentState, proto::encode(state), flags);
      run.agents[h.agent_id] = o.record;
      outgoing.push_back(std::move(o));
    }
  }

  std::vector<ResultRecord> failures;
  std::vector<DispatchRecord> out;
  for (auto& o : outgoing) {
    try {
      runtime::fire(hooks_.on_before_dispatch, proto::AgentState{});
      transport_->send(net::Endpoint::parse(o.first_address), o.frame);
    } catch (const Error& e) {
      o.record.fate = AgentFate::kDispatchFailed;
      o.record.code = std::string(errc_name(Errc::kDispatchFailed));
      for (const auto& host : o.record.route) {
        failures.push_back({task, round, o.record.agent_id, host, now, "ERROR", o.record.class_version,
                            error_data(o.record.code, e.what())});
      }
      std::lock_guard lock(mu_);
      if (auto it = tasks_.find(task); it != tasks_.end()) it->second.agents[o.record.agent_id] = o.record;
    }
    events_.publish("dispatch", {{"event", "agent"}, {"task", task}, {"agent", to_json(o.record)}});
    out.push_back(o.record);
  }
  record(std::move(failures));
  return out;
}

void Manager::record(std::vector<ResultRecord> records) {
  if (records.empty()) return;
  // Persist before anything is streamed.
  store_.append(records);
  for (const auto& r : records) events_.publish(r.kind == "ALARM" ? "alarm" : "result", to_json(r));
}

void Manager::on_returning_agent(const Bytes& canonical_state) {
  const auto state = proto::decode_agent_state(canonical_state);
  const auto now = clock_->now_ms();
  const auto task = state.class_id.name;
  if (!runtime::verify_header(state, self_trust_)) {
    record({{task, 0, state.agent_id, config_.host_id, now, "ERROR", state.class_id.version,
             error_data("AUTH_FAILED", "returning agent " + state.agent_id + " fails header verification")}});
    return;
  }
  std::uint64_t round = 0;
  {
    std::lock_guard lock(mu_);
    if (auto it = tasks_.find(task); it != tasks_.end()) {
      if (auto a = it->second.agents.find(state.agent_id); a != it->second.agents.end()) {
        round = a->second.round;
        a->second.fate = AgentFate::kReturned;
      }
    }
  }
  std::vector<ResultRecord> records;
  for (const auto& entry : state.data_folder) {
    ResultRecord r{task, round, state.agent_id, host_name(entry.host), entry.timestamp,
                   std::string(proto::to_string(entry.kind)), state.class_id.version, json::object()};
    try {
      r.data = api::payload_to_json(entry.kind, runtime::entry_payload(entry, &key_));
    } catch (const Error& e) {
      r.kind = "ERROR";
      r.data = error_data(std::string(errc_name(e.code() == Errc::kOpenFailed ? Errc::kOpenFailed : e.code())),
                          e.what());
    }
    records.push_back(std::move(r));
  }
  record(std::move(records));
  events_.publish("dispatch", {{"event", "returned"}, {"task", task}, {"agent_id", state.agent_id}, {"round", round}});
}

void Manager::on_notice(const proto::ResultNotice& n) {
  const auto now = clock_->now_ms();
  const auto task = n.class_id.name.empty() ? task_of_agent(n.agent_id) : n.class_id.name;

  if (n.code == errc_name(Errc::kAgentCodeMissing) && n.agent_state) {
    // Re-push the bundle and hand the agent back to the same host, once.
    std::optional<proto::CodeBundle> bundle;
    bool retry = false;
    {
      std::lock_guard lock(mu_);
      if (auto it = tasks_.find(task); it != tasks_.end() && it->second.class_id == n.class_id) {
        if (auto a = it->second.agents.find(n.agent_id); a != it->second.agents.end() && !a->second.redispatched) {
          a->second.redispatched = true;
          retry = true;
          bundle = repo_.load(n.class_id);
        }
      }
    }
    const auto host = directory_.find(n.host_id);
    if (retry && bundle && host && push_bundle(*host, *bundle).empty()) {
      try {
        const auto state = proto::decode_agent_state(*n.agent_state);
        const std::uint8_t flags = proto::flags::kSigned | (state.encrypt ? proto::flags::kSealed : 0);
        transport_->send(net::Endpoint::parse(host->address),
                         proto::pack(proto::MsgType::kAgentState, *n.agent_state, flags));
        events_.publish("dispatch", {{"event", "redispatch"}, {"task", task}, {"agent_id", n.agent_id},
                                     {"host", n.host_id}});
        return;
      } catch (const Error&) {
      }
    }
  }

  std::uint64_t round = 0;
  {
    std::lock_guard lock(mu_);
    if (auto it = tasks_.find(task); it != tasks_.end()) {
      if (auto a = it->second.agents.find(n.agent_id); a != it->second.agents.end()) {
        round = a->second.round;
        a->second.fate = AgentFate::kRejected;
        a->second.code = n.code;
      }
    }
  }
  record({{task, round, n.agent_id, n.host_id, now, "ERROR", n.class_id.version, error_data(n.code, n.message)}});
}

void Manager::tick() {
  const auto now = clock_->now_ms();
  for (const auto& host : directory_.expire(now)) {
    events_.publish("directory", {{"host", host}, {"state", "INACTIVE"}});
    replan_all(host, false);
  }

  std::vector<ResultRecord> lost;
  std::vector<std::string> due;
  {
    std::lock_guard lock(mu_);
    for (auto& [name, run] : tasks_) {
      for (auto& [id, a] : run.agents) {
        if (a.fate == AgentFate::kInFlight && now - a.dispatched_at > config_.lost_timeout_ms) {
          a.fate = AgentFate::kLost;
          a.code = std::string(errc_name(Errc::kLost));
          for (const auto& host : a.route) {
            lost.push_back({name, a.round, id, host, now, "ERROR", a.class_version,
                            error_data(a.code, "agent " + id + " did not return within " +
                                                   std::to_string(config_.lost_timeout_ms) + " ms")});
          }
        }
      }
      if (run.enabled && now >= run.next_due) due.push_back(name);
    }
  }
  record(std::move(lost));
  for (const auto& name : due) {
    try {
      run_round(name);
    } catch (const Error&) {
    }
  }
}

proto::ControlResponse Manager::control_proxy(const std::string& host_id, ControlVerb verb,
                                              const std::string& agent_id, std::uint32_t argument) {
  const auto host = directory_.find(host_id);
  if (!host) throw Error(Errc::kUnknownHost, host_id);
  if (host->state != HostState::kActive) throw Error(Errc::kHostInactive, host_id + " is inactive");
  proto::ControlRequest req;
  req.request_id = ++request_seq_;
  req.verb = verb;
  req.agent_id = agent_id;
  req.argument = argument;
  req.issued_at = clock_->now_ms();
  req.signature = security::sign(proto::encode_control_unsigned(req), key_);
  const auto reply = transport_->request(net::Endpoint::parse(host->address),
                                         proto::pack(proto::MsgType::kControlReq, proto::encode(req),
                                                     proto::flags::kSigned));
  auto resp = proto::decode_control_response(proto::unpack_payload(reply));
  if (resp.status != "OK") throw Error(errc_from_name(resp.status), resp.message);
  if (verb == ControlVerb::kSetFrequency) {
    std::lock_guard lock(mu_);
    if (auto it = tasks_.find(task_of_agent(agent_id)); it != tasks_.end()) it->second.form.frequency_s = argument;
  }
  if (verb == ControlVerb::kSetFrequency) persist_tasks();
  return resp;
}

json Manager::set_frequency(const std::string& task, std::uint32_t seconds) {
  if (seconds < 1) throw Error(Errc::kFieldRange, "frequency must be >= 1 s");
  {
    std::lock_guard lock(mu_);
    auto it = tasks_.find(task);
    if (it == tasks_.end()) throw Error(Errc::kUnknownTask, task);
    auto& run = it->second;
    run.form.frequency_s = seconds;
    const auto now = clock_->now_ms();
    run.next_due = std::min(run.next_due, now + static_cast<TimestampMs>(seconds) * 1000);
  }
  persist_tasks();
  json updated = json::array();
  for (const auto& host : directory_.active()) {
    try {
      const auto listing = control_proxy(host.host_id, ControlVerb::kListAgents);
      for (const auto& a : listing.agents) {
        if (a.class_name != task) continue;
        control_proxy(host.host_id, ControlVerb::kSetFrequency, a.agent_id, seconds);
        updated.push_back({{"host", host.host_id}, {"agent_id", a.agent_id}});
      }
    } catch (const Error&) {
    }
  }
  return {{"task", task}, {"frequency_s", seconds}, {"resident_agents_updated", updated}};
}

std::vector<ResultRecord> Manager::query_results(const ResultFilter& filter) const { return store_.query(filter); }

json Manager::task_json(const std::string& task) const {
  std::lock_guard lock(mu_);
  auto it = tasks_.find(task);
  if (it == tasks_.end()) throw Error(Errc::kUnknownTask, task);
  const auto& run = it->second;
  std::size_t in_flight = 0;
  for (const auto& [_, a] : run.agents) in_flight += a.fate == AgentFate::kInFlight;
  json plan = nullptr;
  if (run.plan) plan = {{"routes", run.plan->routes}, {"max_cost", run.plan->max_cost}, {"total_cost", run.plan->total_cost}};
  return {{"name", task},
          {"class_version", run.class_id.version},
          {"enabled", run.enabled},
          {"round", run.round},
          {"next_due", run.next_due},
          {"in_flight", in_flight},
          {"form", api::to_json(run.form)},
          {"plan", plan},
          {"plan_error", run.plan_error}};
}

json Manager::tasks_json() const {
  std::vector<std::string> names;
  {
    std::lock_guard lock(mu_);
    for (const auto& [n, _] : tasks_) names.push_back(n);
  }
  json out = json::array();
  for (const auto& n : names) out.push_back(task_json(n));
  return out;
}

json Manager::hosts_json() const {
  json out = json::array();
  for (const auto& e : directory_.list()) out.push_back(to_json(e));
  return out;
}

json Manager::topology_json() const {
  std::vector<std::string> hosts;
  for (const auto& e : directory_.active()) hosts.push_back(e.host_id);
  const auto topo = topology_for(hosts);
  json edges = json::array();
  for (const auto& e : topo.edges()) edges.push_back({{"u", e.u}, {"v", e.v}, {"cost", e.cost}});
  json plans = json::object();
  {
    std::lock_guard lock(mu_);
    for (const auto& [name, run] : tasks_) {
      if (run.plan) {
        plans[name] = {{"routes", run.plan->routes},
                       {"max_cost", run.plan->max_cost},
                       {"total_cost", run.plan->total_cost}};
      } else {
        plans[name] = {{"error", run.plan_error}};
      }
    }
  }
  return {{"manager", topo.manager()},
          {"source", file_topology_ ? "file" : "complete"},
          {"nodes", std::vector<std::string>(topo.nodes().begin(), topo.nodes().end())},
          {"edges", edges},
          {"cost", {{"s0", config_.cost.s0}, {"sd", config_.cost.sd}}},
          {"plans", plans}};
}

std::vector<DispatchRecord> Manager::dispatches(const std::string& task) const {
  std::lock_guard lock(mu_);
  auto it = tasks_.find(task);
  if (it == tasks_.end()) throw Error(Errc::kUnknownTask, task);
  std::vector<DispatchRecord> out;
  for (const auto& [_, a] : it->second.agents) out.push_back(a);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.round != b.round ? a.round < b.round : a.agent_id < b.agent_id;
  });
  return out;
}

std::size_t Manager::in_flight(const std::string& task) const {
  std::lock_guard lock(mu_);
  auto it = tasks_.find(task);
  if (it == tasks_.end()) return 0;
  std::size_t n = 0;
  for (const auto& [_, a] : it->second.agents) n += a.fate == AgentFate::kInFlight;
  return n;
}

std::uint64_t Manager::current_round(const std::string& task) const {
  std::lock_guard lock(mu_);
  auto it = tasks_.find(task);
  return it == tasks_.end() ? 0 : it->second.round;
}

std::optional<proto::CodeBundle> Manager::bundle(const std::string& task) const {
  proto::AgentClassId id;
  {
    std::lock_guard lock(mu_);
    auto it = tasks_.find(task);
    if (it == tasks_.end()) return std::nullopt;
    id = it->second.class_id;
  }
  return repo_.load(id);
}

void Manager::persist_tasks() const {
  json out = json::array();
  {
    std::lock_guard lock(mu_);
    for (const auto& [name, run] : tasks_) {
      out.push_back({{"name", name},
                     {"version", run.class_id.version},
                     {"enabled", run.enabled},
                     {"round", run.round},
                     {"agent_seq", run.agent_seq},
                     {"form", api::to_json(run.form)}});
    }
  }
  const auto path = fs::path(config_.data_dir) / "tasks.json";
  const auto tmp = fs::path(path).concat(".tmp");
  {
    std::ofstream f(tmp, std::ios::trunc);
    f << out.dump(2) << '\n';
    if (!f) throw Error(Errc::kIoError, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(Errc::kIoError, "cannot replace " + path.string());
}

void Manager::load_tasks() {
  const auto path = fs::path(config_.data_dir) / "tasks.json";
  if (!fs::exists(path)) return;
  const auto j = json::parse(read_file(path.string()));
  const auto now = clock_->now_ms();
  for (const auto& t : j) {
    TaskRun run;
    run.form = api::form_from_json(t.at("form"));
    run.class_id = {t.at("name").get<std::string>(), t.at("version").get<std::uint32_t>()};
    run.enabled = t.value("enabled", true);
    run.round = t.value("round", std::uint64_t{0});
    run.agent_seq = t.value("agent_seq", std::uint64_t{0});
    run.next_due = now;
    tasks_[run.class_id.name] = std::move(run);
  }
}

}  // namespace mobagent::manager
