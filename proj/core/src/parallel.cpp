#include "patchprint/parallel.hpp"

#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace patchprint {
namespace {

int default_threads() {
  if (const char* env = std::getenv("PATCHPRINT_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

int g_threads = 0;  // 0 = uninitialized

// Persistent workers; the dispatching thread always runs chunk 0 itself.
// Chunks are contiguous index ranges, so output placement is independent of
// the worker count.
class Pool {
 public:
  explicit Pool(int workers) : workers_(workers) {
    for (int i = 0; i < workers_; ++i)
      threads_.emplace_back([this, i] { run(i); });
  }

  ~Pool() {
    {
      std::lock_guard<std::mutex> lk(m_);
      stop_ = true;
      ++generation_;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  void dispatch(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
    const int total = workers_ + 1;
    const std::int64_t chunk = (n + total - 1) / total;
    {
      std::lock_guard<std::mutex> lk(m_);
      job_ = &fn;
      job_n_ = n;
      job_chunk_ = chunk;
      pending_ = workers_;
      ++generation_;
    }
    cv_.notify_all();
    fn(0, chunk < n ? chunk : n);
    std::unique_lock<std::mutex> lk(m_);
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    job_ = nullptr;
  }

  int workers() const { return workers_; }

 private:
  void run(int index) {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(std::int64_t, std::int64_t)>* fn = nullptr;
      std::int64_t n = 0, chunk = 0;
      {
        std::unique_lock<std::mutex> lk(m_);
        cv_.wait(lk, [&] { return generation_ != seen; });
        seen = generation_;
        if (stop_) return;
        fn = job_;
        n = job_n_;
        chunk = job_chunk_;
      }
      if (fn) {
        std::int64_t lo = chunk * (index + 1);
        std::int64_t hi = lo + chunk < n ? lo + chunk : n;
        if (lo < hi) (*fn)(lo, hi);
        std::lock_guard<std::mutex> lk(m_);
        if (--pending_ == 0) done_cv_.notify_all();
      }
    }
  }

  int workers_;
  std::vector<std::thread> threads_;
  std::mutex m_;
  std::condition_variable cv_, done_cv_;
  const std::function<void(std::int64_t, std::int64_t)>* job_ = nullptr;
  std::int64_t job_n_ = 0;
  std::int64_t job_chunk_ = 0;
  std::uint64_t generation_ = 0;
  int pending_ = 0;
  bool stop_ = false;
};

Pool* g_pool = nullptr;

}  // namespace

int thread_count() {
  if (g_threads == 0) g_threads = default_threads();
  return g_threads;
}

void set_thread_count(int n) {
  delete g_pool;
  g_pool = nullptr;
  g_threads = n > 0 ? n : default_threads();
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
  if (n <= 0) return;
  int tc = thread_count();
  if (tc <= 1 || n == 1) {
    fn(0, n);
    return;
  }
  if (!g_pool || g_pool->workers() != tc - 1) {
    delete g_pool;
    g_pool = new Pool(tc - 1);
  }
  g_pool->dispatch(n, fn);
}

}  // namespace patchprint
