#include "cwlab/log.hpp"

#include <cstdlib>
#include <string_view>

#include <spdlog/sinks/stdout_sinks.h>

namespace cwlab {
namespace {

spdlog::level::level_enum level_from_env() {
  const char* value = std::getenv("CW_LOG");
  if (value == nullptr) return spdlog::level::err;
  const std::string_view v(value);
  if (v == "debug") return spdlog::level::debug;
  if (v == "info") return spdlog::level::info;
  return spdlog::level::err;
}

}  // namespace

std::shared_ptr<spdlog::logger> logger() {
  static const std::shared_ptr<spdlog::logger> instance = [] {
    auto sink = std::make_shared<spdlog::sinks::stderr_sink_st>();
    auto log = std::make_shared<spdlog::logger>("cwlab", sink);
    log->set_level(level_from_env());
    log->set_pattern("[%l] %v");
    return log;
  }();
  return instance;
}

}  // namespace cwlab
