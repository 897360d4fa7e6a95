#include "ghostsr/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace ghostsr {

namespace {
std::atomic<int> g_threads{1};
}

void set_num_threads(int n) {
  if (n < 1) throw std::invalid_argument("thread count must be >= 1, got " + std::to_string(n));
  g_threads.store(n);
}

int num_threads() { return g_threads.load(); }

void init_threads_from_env() {
  const char* env = std::getenv("GHOSTSR_THREADS");
  if (env == nullptr || *env == '\0') return;
  try {
    set_num_threads(std::stoi(env));
  } catch (const std::exception&) {
    throw std::invalid_argument(std::string("GHOSTSR_THREADS must be a positive integer, got '") + env + "'");
  }
}

}  // namespace ghostsr
