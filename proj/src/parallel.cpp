#include "knockoffs/parallel.hpp"

#include <cstdlib>
#include <string>

namespace knockoffs {

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("KNOCKOFF_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace knockoffs
