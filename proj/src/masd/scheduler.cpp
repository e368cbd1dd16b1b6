#include "mobagent/masd/scheduler.hpp"

namespace mobagent::masd {

PriorityScheduler::PriorityScheduler(unsigned workers) {
  for (unsigned i = 0; i < workers; ++i) threads_.emplace_back([this] { worker(); });
}

PriorityScheduler::~PriorityScheduler() { stop(); }

void PriorityScheduler::submit(std::uint8_t priority, Job job) {
  {
    std::lock_guard lock(mu_);
    queue_.push({priority, next_seq_++, std::move(job)});
  }
  cv_.notify_one();
}

bool PriorityScheduler::pop(Item& out) {
  if (queue_.empty()) return false;
  out = queue_.top();
  queue_.pop();
  ++running_;
  return true;
}

void PriorityScheduler::run(Item& item) {
  try {
    item.job();
  } catch (...) {
    // Jobs report their own failures.
  }
  std::lock_guard lock(mu_);
  --running_;
  idle_cv_.notify_all();
}

std::size_t PriorityScheduler::run_pending() {
  std::size_t n = 0;
  while (true) {
    Item item;
    {
      std::lock_guard lock(mu_);
      if (!pop(item)) break;
    }
    run(item);
    ++n;
  }
  return n;
}

std::size_t PriorityScheduler::pending() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

void PriorityScheduler::drain() {
  std::unique_lock lock(mu_);
  idle_cv_.wait(lock, [this] { return (queue_.empty() || threads_.empty()) && running_ == 0; });
}

void PriorityScheduler::stop() {
  {
    std::lock_guard lock(mu_);
    if (stopping_) return;
    stopping_ = true;
  }
  cv_.notify_all();
  for (auto& t : threads_) t.join();
}

void PriorityScheduler::worker() {
  while (true) {
    Item item;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      pop(item);
    }
    run(item);
  }
}

}  // namespace mobagent::masd
