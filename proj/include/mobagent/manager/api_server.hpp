#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include "mobagent/manager/manager.hpp"

namespace httplib {
class Server;
}

namespace mobagent::manager {

// HTTP status used for an error code on the control API.
int http_status(Errc code);

// JSON control API and event stream in front of a Manager.
//
//   GET   /hosts                         GET  /hosts/{h}/load
//   GET   /hosts/{h}/agents              POST /hosts/{h}/agents/{id}/{suspend|resume|activate}
//   GET   /tasks                         POST /tasks
//   GET   /tasks/{name}                  POST /tasks/{name}/run
//   PATCH /tasks/{name}/frequency        GET  /tasks/{name}/results
//   GET   /tasks/{name}/dispatches       GET  /topology
//   GET   /stream   (text/event-stream: result, alarm, directory, dispatch)
//
// Errors are {"error": CODE, "message": text}.
class ApiServer {
 public:
  explicit ApiServer(Manager& manager, std::string static_dir = {});
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // port 0 picks a free port. Throws NETWORK when the bind fails.
  void start(const std::string& host, std::uint16_t port);
  void stop();
  std::uint16_t port() const { return port_; }
  std::string base_url() const;

 private:
  void routes();

  Manager& manager_;
  std::string static_dir_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::string host_;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
};

}  // namespace mobagent::manager
