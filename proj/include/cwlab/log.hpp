#pragma once

#include <memory>

#include <spdlog/logger.h>

namespace cwlab {

/// Library logger writing to stderr. Its level comes from CW_LOG
/// (error | info | debug; default error).
std::shared_ptr<spdlog::logger> logger();

}  // namespace cwlab
