#include "neon/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace neon {

namespace {
int g_threads = 0;

int hardware_threads() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

constexpr int kMaxChunks = 16;
}  // namespace

void set_thread_count(int n) { g_threads = n < 0 ? 0 : n; }

int thread_count() { return g_threads > 0 ? g_threads : hardware_threads(); }

int chunk_count(std::int64_t n) {
  if (n <= 0) return 0;
  return static_cast<int>(std::min<std::int64_t>(n, kMaxChunks));
}

void parallel_for_chunks(
    std::int64_t n,
    const std::function<void(int, std::int64_t, std::int64_t)>& fn) {
  const int chunks = chunk_count(n);
  if (chunks == 0) return;

  const std::int64_t chunk_size = (n + chunks - 1) / chunks;
  auto run_chunk = [&](int c) {
    const std::int64_t begin = c * chunk_size;
    const std::int64_t end = std::min<std::int64_t>(begin + chunk_size, n);
    if (begin < end) fn(c, begin, end);
  };

  const int workers = std::min(thread_count(), chunks);
  if (workers <= 1) {
    for (int c = 0; c < chunks; ++c) run_chunk(c);
    return;
  }

  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int c = next.fetch_add(1); c < chunks; c = next.fetch_add(1)) run_chunk(c);
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers - 1));
  for (int i = 1; i < workers; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

}  // namespace neon
