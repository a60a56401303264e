#include "ruad/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace ruad::log {

namespace {
std::atomic<Level> g_level{Level::info};
std::mutex g_mutex;

const char* tag(Level l) {
  switch (l) {
    case Level::debug:
      return "debug";
    case Level::info:
      return "info";
    case Level::warn:
      return "warn";
    case Level::error:
      break;
  }
  return "error";
}
}  // namespace

void set_level(Level level) { g_level = level; }

void write(Level level, std::string_view message) {
  if (level < g_level.load()) return;
  std::lock_guard lock(g_mutex);
  std::clog << "[" << tag(level) << "] " << message << '\n';
}

}  // namespace ruad::log
