#pragma once

// Thin wrapper over spdlog. Verbosity comes from QPNLS_LOG
// (trace, debug, info, warn, error, off; default warn). Messages are built
// lazily so disabled levels cost a level check only.

#include <string>

namespace qpnls::log {

enum class Level { Trace, Debug, Info, Warn, Error, Off };

bool enabled(Level lvl);
void write(Level lvl, const std::string& tag, const std::string& msg);
/// Re-read QPNLS_LOG; mainly for tests.
void reload_from_env();

template <class Fn>
void at(Level lvl, const char* tag, Fn&& make) {
    if (enabled(lvl)) write(lvl, tag, make());
}
template <class Fn>
void debug(const char* tag, Fn&& make) { at(Level::Debug, tag, make); }
template <class Fn>
void info(const char* tag, Fn&& make) { at(Level::Info, tag, make); }
template <class Fn>
void warn(const char* tag, Fn&& make) { at(Level::Warn, tag, make); }

}  // namespace qpnls::log
