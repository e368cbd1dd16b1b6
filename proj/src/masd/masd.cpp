#include "mobagent/masd/masd.hpp"

#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "mobagent/api/json_codec.hpp"
#include "mobagent/security/policy.hpp"
#include "mobagent/taskmodel/bundle.hpp"

namespace mobagent::masd {

using proto::ControlResponse;
using proto::ControlVerb;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// SF bound to one visiting agent: enforces suspension, keeps the MIB clock in
// step with the daemon and records every query in the audit log.
class HostFacilitator : public runtime::ServiceFacilitator {
 public:
  HostFacilitator(std::string agent_id, Registry& registry, AuditLog& audit, mibsim::Mib& mib,
                  std::function<void()> sync_clock)
      : agent_id_(std::move(agent_id)), registry_(registry), audit_(audit), mib_(mib), sync_(std::move(sync_clock)) {}

  void checkpoint() override {
    if (!registry_.wait_runnable(agent_id_)) throw Error(Errc::kUnknownId, agent_id_ + " left the registry");
  }

  std::vector<proto::QueryValue> get_scalar(const std::vector<std::string>& oids) override {
    audit_.record({agent_id_, proto::SfOp::kGetScalar, oids.size()});
    sync_();
    std::vector<proto::QueryValue> out;
    out.reserve(oids.size());
    for (const auto& oid : oids) out.push_back(mib_.get(oid));
    return out;
  }

  std::vector<proto::Row> get_table(const std::string& table_oid) override {
    audit_.record({agent_id_, proto::SfOp::kGetTable, 1});
    sync_();
    return mib_.get_table(table_oid);
  }

 private:
  std::string agent_id_;
  Registry& registry_;
  AuditLog& audit_;
  mibsim::Mib& mib_;
  std::function<void()> sync_;
};

}  // namespace

MasdConfig MasdConfig::parse(std::string_view json_text) {
  MasdConfig c;
  api::json j;
  try {
    j = api::json::parse(json_text);
    c.host_id = j.value("host_id", c.host_id);
    c.bind_address = j.value("bind_address", c.bind_address);
    c.port = j.value("port", c.port);
    c.advertise_address = j.value("advertise_address", c.advertise_address);
    c.manager_address = j.value("manager_address", c.manager_address);
    c.trusted_keys = j.value("trusted_keys", c.trusted_keys);
    c.seal_key = j.value("seal_key", c.seal_key);
    c.cache_dir = j.value("cache_dir", c.cache_dir);
    c.mib_script = j.value("mib_script", c.mib_script);
    c.mib_clock = j.value("mib_clock", c.mib_clock);
    c.device_classes = j.value("device_classes", c.device_classes);
    c.announce_interval_ms = j.value("announce_interval_ms", c.announce_interval_ms);
    c.workers = j.value("workers", c.workers);
  } catch (const api::json::exception& e) {
    throw Error(Errc::kFieldRange, std::string("masd config: ") + e.what());
  }
  if (j.contains("policy")) c.policy = api::policy_from_json(j.at("policy"));
  if (c.mib_clock != "wall" && c.mib_clock != "logical") {
    throw Error(Errc::kFieldRange, "mib_clock must be wall or logical");
  }
  return c;
}

MasdConfig MasdConfig::load(const std::string& path) { return parse(read_file(path)); }

void Registry::add(const MaInfo& info) {
  std::lock_guard lock(mu_);
  if (!agents_.emplace(info.agent_id, info).second) {
    throw Error(Errc::kDuplicateId, info.agent_id + " is already registered");
  }
}

void Registry::remove(const std::string& agent_id) {
  {
    std::lock_guard lock(mu_);
    if (agents_.erase(agent_id) == 0) throw Error(Errc::kUnknownId, agent_id);
  }
  cv_.notify_all();
}

std::optional<MaInfo> Registry::find(const std::string& agent_id) const {
  std::lock_guard lock(mu_);
  auto it = agents_.find(agent_id);
  if (it == agents_.end()) return std::nullopt;
  return it->second;
}

std::vector<MaInfo> Registry::list() const {
  std::vector<MaInfo> out;
  {
    std::lock_guard lock(mu_);
    for (const auto& [_, info] : agents_) out.push_back(info);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const MaInfo& a, const MaInfo& b) { return a.arrival_time < b.arrival_time; });
  return out;
}

std::size_t Registry::size() const {
  std::lock_guard lock(mu_);
  return agents_.size();
}

void Registry::set_status(const std::string& agent_id, AgentStatus status) {
  {
    std::lock_guard lock(mu_);
    auto it = agents_.find(agent_id);
    if (it == agents_.end()) throw Error(Errc::kUnknownId, agent_id);
    it->second.status = status;
  }
  cv_.notify_all();
}

void Registry::set_frequency(const std::string& agent_id, std::uint32_t seconds) {
  std::lock_guard lock(mu_);
  auto it = agents_.find(agent_id);
  if (it == agents_.end()) throw Error(Errc::kUnknownId, agent_id);
  it->second.frequency_s = seconds;
}

bool Registry::wait_runnable(const std::string& agent_id) {
  std::unique_lock lock(mu_);
  while (true) {
    auto it = agents_.find(agent_id);
    if (it == agents_.end() || released_) return it != agents_.end();
    if (it->second.status != AgentStatus::kSuspended) return true;
    cv_.wait(lock);
  }
}

void Registry::release_all() {
  {
    std::lock_guard lock(mu_);
    released_ = true;
  }
  cv_.notify_all();
}

CodeCache::CodeCache(std::string dir) : dir_(std::move(dir)) {}

void CodeCache::load(const security::TrustStore& trusted) {
  if (dir_.empty()) return;
  taskmodel::CodeRepository repo(dir_);
  std::lock_guard lock(mu_);
  for (const auto& id : repo.list()) {
    try {
      auto b = repo.load(id);
      if (!b) continue;
      taskmodel::validate_bundle(*b, trusted);
      auto it = bundles_.find(id.name);
      if (it == bundles_.end() || it->second.class_id.version < id.version) bundles_[id.name] = std::move(*b);
    } catch (const Error&) {
      // Unverifiable files are ignored; the manager re-pushes on announce.
    }
  }
}

void CodeCache::accept(const proto::CodeBundle& bundle, const security::TrustStore& trusted) {
  std::lock_guard lock(mu_);
  std::optional<std::uint32_t> latest;
  if (auto it = bundles_.find(bundle.class_id.name); it != bundles_.end()) latest = it->second.class_id.version;
  taskmodel::validate_bundle(bundle, trusted, latest);
  if (!dir_.empty()) {
    taskmodel::CodeRepository repo(dir_);
    repo.store(bundle);
    repo.prune(bundle.class_id.name, bundle.class_id.version);
  }
  bundles_[bundle.class_id.name] = bundle;
}

std::optional<proto::CodeBundle> CodeCache::get(const std::string& name) const {
  std::lock_guard lock(mu_);
  auto it = bundles_.find(name);
  if (it == bundles_.end()) return std::nullopt;
  return it->second;
}

std::vector<proto::BundleDigest> CodeCache::digests() const {
  std::lock_guard lock(mu_);
  std::vector<proto::BundleDigest> out;
  for (const auto& [name, b] : bundles_) out.push_back({name, b.class_id.version, taskmodel::bundle_digest(b)});
  return out;
}

std::size_t CodeCache::size() const {
  std::lock_guard lock(mu_);
  return bundles_.size();
}

void AuditLog::record(AuditEntry e) {
  std::lock_guard lock(mu_);
  entries_.push_back(std::move(e));
}

std::vector<AuditEntry> AuditLog::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

std::size_t AuditLog::count_for(const std::string& agent_id) const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(),
                                                [&](const AuditEntry& e) { return e.agent_id == agent_id; }));
}

proto::HostLoad LoadSampler::sample(TimestampMs now) {
  std::lock_guard lock(mu_);
  double cpu_s = 0;
  std::uint64_t rss = 0;
  {
    std::ifstream stat("/proc/self/stat");
    std::string content((std::istreambuf_iterator<char>(stat)), std::istreambuf_iterator<char>());
    // Fields after the parenthesised command name; utime and stime are the
    // 12th and 13th of those.
    const auto close = content.rfind(')');
    if (close != std::string::npos) {
      std::istringstream rest(content.substr(close + 2));
      std::string field;
      for (int i = 0; i < 11 && rest >> field; ++i) {
      }
      unsigned long long utime = 0, stime = 0;
      if (rest >> utime >> stime) cpu_s = static_cast<double>(utime + stime) / static_cast<double>(::sysconf(_SC_CLK_TCK));
    }
  }
  {
    std::ifstream statm("/proc/self/statm");
    std::uint64_t size = 0, resident = 0;
    if (statm >> size >> resident) rss = resident * static_cast<std::uint64_t>(::sysconf(_SC_PAGESIZE));
  }
  double percent = last_percent_;
  if (last_cpu_s_ >= 0 && now > last_wall_) {
    percent = (cpu_s - last_cpu_s_) / (static_cast<double>(now - last_wall_) / 1000.0) * 100.0;
  }
  percent = std::clamp(percent, 0.0, 100.0);
  if (last_cpu_s_ < 0 || now > last_wall_) {
    last_cpu_s_ = cpu_s;
    last_wall_ = now;
    last_percent_ = percent;
  }
  last_sampled_ = std::max(last_sampled_, now);
  return {percent, rss, last_sampled_};
}

Masd::Masd(MasdConfig config, security::TrustStore trusted, security::PublicKey seal_key,
           std::shared_ptr<mibsim::Mib> mib, std::shared_ptr<net::Transport> transport, std::shared_ptr<Clock> clock)
    : config_(std::move(config)),
      trusted_(std::move(trusted)),
      seal_key_(std::move(seal_key)),
      mib_(mib ? std::move(mib) : std::make_shared<mibsim::Mib>()),
      transport_(transport ? std::move(transport) : std::make_shared<net::TcpTransport>()),
      clock_(clock ? std::move(clock) : system_clock()),
      cache_(config_.cache_dir),
      scheduler_(config_.workers) {
  started_at_ = clock_->now_ms();
  if (config_.advertise_address.empty()) config_.advertise_address = config_.bind_address;
  cache_.load(trusted_);
}

Masd::~Masd() { stop(); }

std::unique_ptr<Masd> Masd::from_config(const MasdConfig& config, std::shared_ptr<net::Transport> transport) {
  security::TrustStore trusted;
  for (const auto& path : config.trusted_keys) trusted.add(security::PublicKey::load(path));
  if (trusted.empty()) throw Error(Errc::kKeyError, "masd needs at least one trusted key");
  security::PublicKey seal = config.seal_key.empty() ? security::PublicKey::load(config.trusted_keys.front())
                                                     : security::PublicKey::load(config.seal_key);
  auto mib = std::make_shared<mibsim::Mib>(config.mib_script.empty() ? mibsim::Mib()
                                                                      : mibsim::Mib::load(config.mib_script));
  return std::make_unique<Masd>(config, std::move(trusted), std::move(seal), std::move(mib), std::move(transport));
}

std::string Masd::address() const {
  const auto port = server_ ? server_->port() : config_.port;
  return config_.advertise_address + ":" + std::to_string(port);
}

void Masd::start() {
  if (running_) return;
  server_ = std::make_unique<net::FrameServer>(config_.bind_address, config_.port,
                                               [this](const proto::Frame& f) { return handle_frame(f); });
  server_->start();
  running_ = true;
  if (config_.announce_interval_ms > 0) announcer_ = std::thread([this] { announce_loop(); });
}

void Masd::stop() {
  if (!running_.exchange(false)) return;
  announce_cv_.notify_all();
  if (announcer_.joinable()) announcer_.join();
  if (server_) server_->stop();
  registry_.release_all();
  scheduler_.stop();
}

std::size_t Masd::parked_count() const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(
      std::count_if(agents_.begin(), agents_.end(), [](const auto& kv) { return kv.second.parked; }));
}

proto::AuthPolicy Masd::host_policy() const {
  auto p = config_.policy;
  p.trusted_signer_key_ids.clear();
  // The trust store defines which signers this host accepts at all.
  p.trusted_signer_key_ids = trusted_.ids();
  return p;
}

proto::ControlResponse Masd::reply(std::uint64_t id, Errc code, const std::string& message) const {
  ControlResponse r;
  r.request_id = id;
  r.status = std::string(errc_name(code));
  r.message = message;
  return r;
}

std::optional<Bytes> Masd::handle_frame(const proto::Frame& frame) {
  switch (frame.type) {
    case proto::MsgType::kAgentState:
      receive_agent(proto::unpack_payload(frame));
      return std::nullopt;
    case proto::MsgType::kCodeBundle: {
      ControlResponse r;
      try {
        r = accept_bundle(proto::decode_code_bundle(proto::unpack_payload(frame)));
      } catch (const Error& e) {
        r = reply(0, e.code(), e.what());
      }
      return proto::pack(proto::MsgType::kControlResp, proto::encode(r));
    }
    case proto::MsgType::kControlReq: {
      ControlResponse r;
      try {
        r = control(proto::decode_control_request(proto::unpack_payload(frame)));
      } catch (const Error& e) {
        r = reply(0, e.code(), e.what());
      }
      return proto::pack(proto::MsgType::kControlResp, proto::encode(r));
    }
    default:
      return std::nullopt;
  }
}

void Masd::notify(Errc code, const proto::AgentState* state, const std::string& agent_id,
                  const proto::AgentClassId& class_id, const std::string& origin, const std::string& message,
                  bool attach_state) {
  proto::ResultNotice n;
  n.code = std::string(errc_name(code));
  n.agent_id = agent_id;
  n.class_id = class_id;
  n.host_id = config_.host_id;
  n.message = message;
  if (attach_state && state) n.agent_state = proto::encode(*state);
  const auto frame = proto::pack(proto::MsgType::kResult, proto::encode(n));
  for (const auto& to : {origin, config_.manager_address}) {
    if (to.empty()) continue;
    try {
      transport_->send(net::Endpoint::parse(to), frame);
      return;
    } catch (const Error&) {
    }
  }
}

void Masd::receive_agent(const Bytes& canonical_state) {
  proto::AgentState state;
  try {
    state = proto::decode_agent_state(canonical_state);
  } catch (const Error& e) {
    notify(Errc::kDecodeFailed, nullptr, "", {}, "", e.what(), false);
    return;
  }
  const std::string id = state.agent_id;
  if (!runtime::verify_header(state, trusted_)) {
    notify(Errc::kAuthFailed, nullptr, id, state.class_id, state.origin,
           "header signature of " + id + " does not verify on " + config_.host_id, false);
    return;
  }
  const auto bundle = cache_.get(state.class_id.name);
  if (!bundle || bundle->class_id.version < state.class_id.version) {
    notify(Errc::kAgentCodeMissing, &state, id, state.class_id, state.origin,
           "no code for " + taskmodel::bundle_filename(state.class_id) + " on " + config_.host_id, true);
    return;
  }
  if (bundle->class_id.version > state.class_id.version) {
    notify(Errc::kVersionSuperseded, nullptr, id, state.class_id, state.origin,
           state.class_id.name + " v" + std::to_string(state.class_id.version) + " superseded by v" +
               std::to_string(bundle->class_id.version) + " on " + config_.host_id,
           false);
    return;
  }
  const auto policy = security::restrict_policy(bundle->policy, host_policy());
  if (!security::is_trusted_signer(policy, state.header_signature.signer_key_id)) {
    notify(Errc::kAuthFailed, nullptr, id, state.class_id, state.origin,
           "signer of " + id + " is not trusted by the policy of " + state.class_id.name, false);
    return;
  }

  MaInfo info;
  info.agent_id = id;
  info.class_name = state.class_id.name;
  info.class_version = state.class_id.version;
  info.poll_mode = bundle->program.poll_mode;
  info.frequency_s = bundle->program.frequency_s;
  info.encrypt = state.encrypt;
  info.arrival_time = clock_->now_ms();
  info.status = AgentStatus::kDeactivated;
  info.priority = state.priority;
  {
    std::lock_guard lock(mu_);
    if (auto it = frequency_overrides_.find(info.class_name); it != frequency_overrides_.end()) {
      info.frequency_s = it->second;
    }
  }
  try {
    registry_.add(info);
  } catch (const Error& e) {
    notify(e.code(), nullptr, id, state.class_id, state.origin, e.what(), false);
    return;
  }
  const auto priority = state.priority;
  {
    std::lock_guard lock(mu_);
    agents_[id] = Pending{std::move(state), false};
  }
  scheduler_.submit(priority, [this, id] { run_agent(id); });
}

proto::AgentState Masd::resident_state(const std::string& agent_id) const {
  std::lock_guard lock(mu_);
  auto it = agents_.find(agent_id);
  return it == agents_.end() ? proto::AgentState{} : it->second.state;
}

void Masd::finish(const std::string& agent_id) {
  {
    std::lock_guard lock(mu_);
    agents_.erase(agent_id);
  }
  try {
    registry_.remove(agent_id);
  } catch (const Error&) {
  }
}

void Masd::run_agent(const std::string& agent_id) {
  proto::AgentState state;
  {
    std::lock_guard lock(mu_);
    auto it = agents_.find(agent_id);
    if (it == agents_.end()) return;
    state = it->second.state;
  }
  // Version safety: a newer bundle may have arrived while the agent queued.
  const auto bundle = cache_.get(state.class_id.name);
  if (!bundle || bundle->class_id.version != state.class_id.version) {
    finish(agent_id);
    notify(Errc::kVersionSuperseded, nullptr, agent_id, state.class_id, state.origin,
           state.class_id.name + " v" + std::to_string(state.class_id.version) + " superseded on " +
               config_.host_id,
           false);
    return;
  }
  const auto info = registry_.find(agent_id);
  if (!info) return;
  if (info->status == AgentStatus::kDeactivated) registry_.set_status(agent_id, AgentStatus::kActive);
  runtime::fire(hooks_.on_arrival, state);

  const auto policy = security::restrict_policy(bundle->policy, host_policy());
  HostFacilitator sf(agent_id, registry_, audit_, *mib_, [this] {
    if (config_.mib_clock == "wall") {
      mib_->set_clock(static_cast<double>(clock_->now_ms() - started_at_) / 1000.0);
    }
  });
  runtime::ExecContext ctx;
  ctx.host_id = config_.host_id;
  ctx.clock = clock_.get();
  ctx.memory = &samples_;
  ctx.seal_key = &seal_key_;
  ctx.hooks = &hooks_;
  // The program copy taken above keeps running even if a newer version is
  // accepted mid-execution.
  runtime::execute_on_host(state, bundle->program, sf, policy, ctx);
  // A suspension requested during the last query still holds the agent here.
  registry_.wait_runnable(agent_id);
  dispatch(state, policy);
}

DispatchResult Masd::dispatch(proto::AgentState& state, const proto::AuthPolicy& policy) {
  const auto id = state.agent_id;
  runtime::fire(hooks_.on_before_dispatch, state);
  while (true) {
    const auto hop = runtime::advance_itinerary(state);
    const std::uint8_t extra = state.encrypt ? proto::flags::kSealed : 0;
    try {
      const auto frame = proto::pack(proto::MsgType::kAgentState, proto::encode(state),
                                     static_cast<std::uint8_t>(extra | proto::flags::kSigned));
      transport_->send(net::Endpoint::parse(hop.address), frame);
      finish(id);
      return hop.home ? DispatchResult::kReturnedHome : DispatchResult::kSent;
    } catch (const Error& e) {
      runtime::fire(hooks_.on_migration_failure, state, hop.address);
      if (hop.home) {
        {
          std::lock_guard lock(mu_);
          agents_[id] = Pending{state, true};
        }
        try {
          registry_.set_status(id, AgentStatus::kSuspended);
        } catch (const Error&) {
        }
        return DispatchResult::kParked;
      }
      const proto::ErrorPayload err{std::string(errc_name(Errc::kDispatchFailed)),
                                    "unreachable " + hop.address + ": " + e.what()};
      try {
        runtime::append_entry(state, proto::EntryKind::kError, proto::encode(err), hop.address, clock_->now_ms(),
                              &seal_key_, policy.max_data_folder_bytes);
      } catch (const Error&) {
      }
    }
  }
}

ControlResponse Masd::accept_bundle(const proto::CodeBundle& bundle) {
  try {
    cache_.accept(bundle, trusted_);
  } catch (const Error& e) {
    return reply(0, e.code(), e.what());
  }
  ControlResponse r;
  r.message = "cached " + taskmodel::bundle_filename(bundle.class_id);
  return r;
}

ControlResponse Masd::control(const proto::ControlRequest& req) {
  if (!security::verify(proto::encode_control_unsigned(req), req.signature, trusted_)) {
    return reply(req.request_id, Errc::kAuthFailed, "control request signature does not verify");
  }
  ControlResponse r;
  r.request_id = req.request_id;
  try {
    switch (req.verb) {
      case ControlVerb::kListAgents:
        r.agents = registry_.list();
        break;
      case ControlVerb::kGetLoad:
        r.load = load_.sample(clock_->now_ms());
        break;
      case ControlVerb::kSuspend: {
        const auto info = registry_.find(req.agent_id);
        if (!info) throw Error(Errc::kUnknownId, req.agent_id);
        if (info->status == AgentStatus::kSuspended) throw Error(Errc::kBadState, req.agent_id + " is already suspended");
        registry_.set_status(req.agent_id, AgentStatus::kSuspended);
        if (hooks_.on_suspend) hooks_.on_suspend(resident_state(req.agent_id));
        break;
      }
      case ControlVerb::kResume:
      case ControlVerb::kActivate: {
        const auto info = registry_.find(req.agent_id);
        if (!info) throw Error(Errc::kUnknownId, req.agent_id);
        const bool ok = info->status == AgentStatus::kSuspended ||
                        (req.verb == ControlVerb::kActivate && info->status == AgentStatus::kDeactivated);
        if (!ok) {
          throw Error(Errc::kBadState, req.agent_id + " is " + std::string(proto::to_string(info->status)));
        }
        bool parked = false;
        std::uint8_t priority = info->priority;
        {
          std::lock_guard lock(mu_);
          if (auto it = agents_.find(req.agent_id); it != agents_.end() && it->second.parked) {
            parked = true;
            it->second.parked = false;
          }
        }
        registry_.set_status(req.agent_id, AgentStatus::kActive);
        if (hooks_.on_resume) hooks_.on_resume(resident_state(req.agent_id));
        if (parked) {
          // Retry the journey home from a fresh scheduling slot.
          scheduler_.submit(priority, [this, id = req.agent_id] {
            proto::AgentState state;
            {
              std::lock_guard lock(mu_);
              auto it = agents_.find(id);
              if (it == agents_.end()) return;
              state = it->second.state;
            }
            auto policy = host_policy();
            if (auto b = cache_.get(state.class_id.name)) policy = security::restrict_policy(b->policy, policy);
            dispatch(state, policy);
          });
        }
        break;
      }
      case ControlVerb::kSetFrequency: {
        if (req.argument < 1) throw Error(Errc::kFieldRange, "frequency must be >= 1 s");
        const auto info = registry_.find(req.agent_id);
        if (!info) throw Error(Errc::kUnknownId, req.agent_id);
        registry_.set_frequency(req.agent_id, req.argument);
        std::lock_guard lock(mu_);
        frequency_overrides_[info->class_name] = req.argument;
        break;
      }
    }
  } catch (const Error& e) {
    return reply(req.request_id, e.code(), e.what());
  }
  return r;
}

proto::Announce Masd::make_announce() {
  proto::Announce a;
  a.host_id = config_.host_id;
  a.address = config_.advertise_address;
  a.listen_port = server_ ? server_->port() : config_.port;
  const auto now = clock_->now_ms();
  a.load = load_.sample(now);
  a.bundles = cache_.digests();
  a.device_classes = config_.device_classes;
  std::sort(a.device_classes.begin(), a.device_classes.end());
  a.device_classes.erase(std::unique(a.device_classes.begin(), a.device_classes.end()), a.device_classes.end());
  a.sent_at = now;
  return a;
}

void Masd::announce_now() {
  transport_->send(net::Endpoint::parse(config_.manager_address),
                   proto::pack(proto::MsgType::kAnnounce, proto::encode(make_announce())));
}

void Masd::announce_loop() {
  const auto interval = std::chrono::milliseconds(config_.announce_interval_ms);
  auto backoff = std::chrono::milliseconds(250);
  while (running_) {
    auto wait = interval;
    try {
      announce_now();
      backoff = std::chrono::milliseconds(250);
    } catch (const std::exception&) {
      wait = std::min(backoff, interval);
      backoff = std::min(backoff * 2, interval);
    }
    std::unique_lock lock(announce_mu_);
    announce_cv_.wait_for(lock, wait, [this] { return !running_; });
  }
}

}  // namespace mobagent::masd
