#include "retina/parallel.hpp"

#include <cstdlib>
#include <string>

#include "retina/errors.hpp"

namespace retina {

int worker_threads() {
  if (const char* env = std::getenv("RETINA_KIT_THREADS"); env && *env) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw InvalidInput(std::string("RETINA_KIT_THREADS must be a positive integer, got '") + env +
                       "'");
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace retina
