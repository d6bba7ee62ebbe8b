#include "posestar/parallel.hpp"

#include <cstdlib>
#include <string>

namespace posestar {

unsigned thread_count() {
  if (const char* env = std::getenv("POSESTAR_THREADS")) {
    try {
      long v = std::stol(env);
      if (v >= 1) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

}  // namespace posestar
