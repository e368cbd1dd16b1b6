#include "mobagent/bench/cluster.hpp"

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <thread>

namespace mobagent::bench {

namespace fs = std::filesystem;

const char* const kDefaultMibScript = R"(# sysUpTime, sysName, ipInDiscards, ipOutRequests
1.3.6.1.2.1.1.3.0 linear 0 100
1.3.6.1.2.1.1.5.0 string "router"
1.3.6.1.2.1.4.8.0 linear 10 2
1.3.6.1.2.1.4.10.0 linear 1000 50
table 1.3.6.1.2.1.2.2
row 1 "lo" 0
row 2 "eth0" linear(100,20)
row 3 "eth1" linear(0,1)
)";

std::string make_temp_dir(const std::string& prefix) {
  auto templ = (fs::temp_directory_path() / (prefix + "-XXXXXX")).string();
  if (!mkdtemp(templ.data())) throw Error(Errc::kIoError, "cannot create temporary directory");
  return templ;
}

LocalCluster::LocalCluster(ClusterOptions options)
    : options_(std::move(options)),
      dir_(options_.dir),
      key_(security::KeyPair::generate()),
      capture_(std::make_shared<net::CapturingTransport>(std::make_shared<net::TcpTransport>())) {
  if (dir_.empty()) {
    dir_ = make_temp_dir("mobagent-cluster");
    owns_dir_ = true;
  }
  if (!options_.clock) options_.clock = system_clock();

  manager::ManagerConfig mc;
  mc.frame_port = 0;
  mc.data_dir = (fs::path(dir_) / "manager").string();
  mc.host_ttl_ms = options_.host_ttl_ms;
  mc.lost_timeout_ms = options_.lost_timeout_ms;
  mc.cost = options_.cost;
  mc.k_max = options_.k_max;
  mc.topology_file = options_.topology_file;
  manager_ = std::make_unique<manager::Manager>(mc, key_, capture_, options_.clock);
  manager_->start(false);

  const auto mib = mibsim::Mib::parse_script(options_.mib_script);
  security::TrustStore trust;
  trust.add(key_.public_key());
  for (std::size_t i = 0; i < options_.hosts; ++i) {
    masd::MasdConfig c;
    c.host_id = "h" + std::to_string(i + 1);
    c.port = 0;
    c.manager_address = manager_->address();
    c.cache_dir = (fs::path(dir_) / c.host_id / "cache").string();
    c.mib_clock = "logical";
    c.announce_interval_ms = 0;
    c.workers = options_.masd_workers;
    auto d = std::make_unique<masd::Masd>(c, trust, key_.public_key(), std::make_shared<mibsim::Mib>(mib), capture_,
                                          options_.clock);
    d->start();
    hosts_.push_back(std::move(d));
  }
}

LocalCluster::~LocalCluster() {
  for (auto& h : hosts_) h->stop();
  manager_->stop();
  hosts_.clear();
  manager_.reset();
  if (owns_dir_) {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }
}

void LocalCluster::announce_all() {
  for (auto& h : hosts_) {
    if (h->running()) h->announce_now();
  }
}

void LocalCluster::kill(std::size_t i) { hosts_.at(i)->stop(); }

bool LocalCluster::wait_returned(const std::string& task, std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (std::chrono::steady_clock::now() < deadline) {
    if (manager_->in_flight(task) == 0) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  return manager_->in_flight(task) == 0;
}

}  // namespace mobagent::bench
