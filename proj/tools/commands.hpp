#pragma once

#include <functional>
#include <map>

#include "emit.hpp"
#include "qpnls/config.hpp"
#include "qpnls/errors.hpp"

namespace qpnls::tools {

enum Exit : int { kOk = 0, kOther = 1, kExcision = 2, kConvergence = 3, kEnvelope = 4 };

int cmd_solve(const RunConfig& cfg, Emitter& out);
int cmd_residual(const RunConfig& cfg, Emitter& out);
int cmd_resonance(const RunConfig& cfg, Emitter& out);
int cmd_excise(const RunConfig& cfg, Emitter& out);
int cmd_linflow(const RunConfig& cfg, Emitter& out);
int cmd_match(const RunConfig& cfg, Emitter& out);
int cmd_validate(const RunConfig& cfg, Emitter& out);
int cmd_oracle(const RunConfig& cfg, Emitter& out);

using Command = std::function<int(const RunConfig&, Emitter&)>;
const std::map<std::string, Command>& commands();
const std::map<std::string, std::string>& command_help();

int exit_code(const Error& e);

}  // namespace qpnls::tools
