#include "qpnls/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <mutex>

namespace qpnls::log {

namespace {

spdlog::level::level_enum to_spd(Level l) {
    switch (l) {
        case Level::Trace: return spdlog::level::trace;
        case Level::Debug: return spdlog::level::debug;
        case Level::Info: return spdlog::level::info;
        case Level::Warn: return spdlog::level::warn;
        case Level::Error: return spdlog::level::err;
        case Level::Off: return spdlog::level::off;
    }
    return spdlog::level::warn;
}

std::shared_ptr<spdlog::logger>& logger() {
    static std::shared_ptr<spdlog::logger> lg = [] {
        auto l = spdlog::stderr_color_mt("qpnls");
        l->set_pattern("[%H:%M:%S.%e] [%l] %v");
        return l;
    }();
    return lg;
}

std::once_flag init_flag;

void apply_env() {
    const char* env = std::getenv("QPNLS_LOG");
    auto lvl = env ? spdlog::level::from_str(env) : spdlog::level::warn;
    // from_str maps unknown names to off; keep warnings in that case
    if (env && lvl == spdlog::level::off && std::string(env) != "off") lvl = spdlog::level::warn;
    logger()->set_level(lvl);
}

}  // namespace

void reload_from_env() { apply_env(); }

bool enabled(Level lvl) {
    std::call_once(init_flag, apply_env);
    return logger()->should_log(to_spd(lvl));
}

void write(Level lvl, const std::string& tag, const std::string& msg) {
    logger()->log(to_spd(lvl), "{}: {}", tag, msg);
}

}  // namespace qpnls::log
