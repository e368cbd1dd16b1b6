#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <queue>
#include <thread>
#include <vector>

namespace mobagent::masd {

// Ready queue ordered by priority (higher first) then arrival (FIFO). With
// zero workers nothing runs until run_pending() is called, which makes the
// order observable in tests.
class PriorityScheduler {
 public:
  using Job = std::function<void()>;

  explicit PriorityScheduler(unsigned workers);
  ~PriorityScheduler();
  PriorityScheduler(const PriorityScheduler&) = delete;
  PriorityScheduler& operator=(const PriorityScheduler&) = delete;

  void submit(std::uint8_t priority, Job job);
  // Runs queued jobs on the calling thread; returns how many ran.
  std::size_t run_pending();
  std::size_t pending() const;
  // Blocks until the queue is empty and no job is running.
  void drain();
  void stop();
  unsigned workers() const { return static_cast<unsigned>(threads_.size()); }

 private:
  struct Item {
    std::uint8_t priority;
    std::uint64_t seq;
    Job job;
    bool operator<(const Item& o) const {
      if (priority != o.priority) return priority < o.priority;
      return seq > o.seq;
    }
  };

  bool pop(Item& out);
  void run(Item& item);
  void worker();

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::priority_queue<Item> queue_;
  std::uint64_t next_seq_ = 0;
  unsigned running_ = 0;
  bool stopping_ = false;
  std::vector<std::thread> threads_;
};

}  // namespace mobagent::masd
