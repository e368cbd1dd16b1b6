#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include "mobagent/manager/manager.hpp"
#include "mobagent/masd/masd.hpp"

namespace mobagent::bench {

// MIB used when no script is given: two scalars, a ramp and a table.
extern const char* const kDefaultMibScript;

struct ClusterOptions {
  std::size_t hosts = 5;
  // Working directory; a fresh temporary directory when empty.
  std::string dir;
  std::string mib_script = kDefaultMibScript;
  itinerary::CostParams cost;
  std::size_t k_max = itinerary::kDefaultMaxAgents;
  unsigned masd_workers = 1;
  TimestampMs host_ttl_ms = 30000;
  TimestampMs lost_timeout_ms = 60000;
  // Shared by the manager and every daemon; system clock when null.
  std::shared_ptr<Clock> clock;
  // Manager topology file; complete unit graph when empty.
  std::string topology_file;
};

// One manager and N agent servers in this process, talking over loopback
// TCP through a shared capturing transport.
class LocalCluster {
 public:
  explicit LocalCluster(ClusterOptions options = {});
  ~LocalCluster();
  LocalCluster(const LocalCluster&) = delete;
  LocalCluster& operator=(const LocalCluster&) = delete;

  manager::Manager& manager() { return *manager_; }
  masd::Masd& host(std::size_t i) { return *hosts_.at(i); }
  std::size_t size() const { return hosts_.size(); }
  net::CapturingTransport& capture() { return *capture_; }
  const security::KeyPair& key() const { return key_; }
  const std::string& dir() const { return dir_; }

  // Every running daemon announces once.
  void announce_all();
  // Stops daemon i; its port refuses connections afterwards.
  void kill(std::size_t i);
  // Waits until no agent of the task is in flight.
  bool wait_returned(const std::string& task, std::chrono::milliseconds timeout = std::chrono::seconds(20));

 private:
  ClusterOptions options_;
  std::string dir_;
  bool owns_dir_ = false;
  security::KeyPair key_;
  std::shared_ptr<net::CapturingTransport> capture_;
  std::unique_ptr<manager::Manager> manager_;
  std::vector<std::unique_ptr<masd::Masd>> hosts_;
};

std::string make_temp_dir(const std::string& prefix);

}  // namespace mobagent::bench
