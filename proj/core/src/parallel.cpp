#include "photon_da/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace photon_da {

namespace {

int resolve_worker_count() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("PHOTON_DA_THREADS")) {
    char* end = nullptr;
    long cap = std::strtol(env, &end, 10);
    if (end != env && cap > 0) n = std::min<long>(n, cap) > 0 ? static_cast<int>(std::min<long>(n, cap)) : 1;
  }
  return n;
}

// Persistent pool: workers sleep on a condition variable between calls and
// pull fixed-size chunks off an atomic cursor while a job is live. Chunk
// assignment order is scheduling-dependent, results are not: chunks are
// disjoint and the body may only write inside its range.
class Pool {
 public:
  explicit Pool(int workers) : stop_(false), job_id_(0) {
    for (int i = 0; i < workers - 1; ++i) {
      threads_.emplace_back([this] { worker_loop(); });
    }
  }

  ~Pool() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  void run(std::int64_t n, std::int64_t chunk,
           const std::function<void(std::int64_t, std::int64_t)>& body) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      body_ = &body;
      total_ = n;
      chunk_ = chunk;
      cursor_.store(0, std::memory_order_relaxed);
      pending_.store(static_cast<int>(threads_.size()), std::memory_order_relaxed);
      ++job_id_;
    }
    cv_.notify_all();
    drain(body);  // caller participates
    // Wait until every worker has left the job before returning.
    std::unique_lock<std::mutex> lock(mu_);
    done_cv_.wait(lock, [this] { return pending_.load(std::memory_order_acquire) == 0; });
    body_ = nullptr;
  }

 private:
  void drain(const std::function<void(std::int64_t, std::int64_t)>& body) {
    for (;;) {
      std::int64_t begin = cursor_.fetch_add(chunk_, std::memory_order_relaxed);
      if (begin >= total_) break;
      body(begin, std::min<std::int64_t>(begin + chunk_, total_));
    }
  }

  void worker_loop() {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(std::int64_t, std::int64_t)>* body = nullptr;
      {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [this, seen] { return stop_ || job_id_ != seen; });
        if (stop_) return;
        seen = job_id_;
        body = body_;
      }
      if (body) drain(*body);
      if (pending_.fetch_sub(1, std::memory_order_acq_rel) == 1) {
        std::lock_guard<std::mutex> lock(mu_);
        done_cv_.notify_all();
      }
    }
  }

  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  bool stop_;
  std::uint64_t job_id_;
  const std::function<void(std::int64_t, std::int64_t)>* body_ = nullptr;
  std::int64_t total_ = 0;
  std::int64_t chunk_ = 1;
  std::atomic<std::int64_t> cursor_{0};
  std::atomic<int> pending_{0};
};

}  // namespace

int worker_count() {
  static const int n = resolve_worker_count();
  return n;
}

void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& body) {
  if (n <= 0) return;
  const int workers = worker_count();
  if (workers == 1 || n < 2 * workers) {
    body(0, n);
    return;
  }
  static Pool pool(worker_count());
  const std::int64_t chunk = std::max<std::int64_t>(1, n / (4 * workers));
  pool.run(n, chunk, body);
}

}  // namespace photon_da
