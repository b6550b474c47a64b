#pragma once

// Run configuration: one JSON document, every level checked for unknown keys,
// canonicalized so that equal settings hash equally.

#include <cstdint>
#include <string>

#include "qpnls/cauchy.hpp"
#include "qpnls/resonance.hpp"

namespace qpnls {

struct RunConfig {
    ProblemSpec problem;
    ModeSet modes;
    ModeData mode_data;
    TruncationSpec trunc;  // Jx = 0 and K = 0 are filled with defaults
    NewtonOptions newton;

    struct Resonance {
        VarietyScope scope = VarietyScope::Full;
        bool enforce = true;
        std::vector<double> eps_grid{1e-1, 1e-2, 1e-3};
        std::size_t samples = 10000;
    } resonance;

    struct Linflow {
        int radius = 3;
        double floor = 0.5;
        double T = 10.0;
        int trials = 20;
        int samples = 50;
        double h = 1e-4;
    } linflow;

    struct Cauchy {
        SpatialField data;            // defaults to the ansatz at t = 0
        std::vector<IntVec> generic;  // defaults to the generic modes
        CauchyOptions options;
    } cauchy;

    std::uint64_t seed = 0;
    int threads = 1;
    std::string out_dir = "out";
    std::string format = "json";

    std::string canonical;  // normalized settings that determine the results
    std::string hash;       // 16 hex digits of FNV-1a over `canonical`

    LatticePtr lattice() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
/// Recompute canonical text and hash, e.g. after a command-line seed override.
void rehash(RunConfig& cfg);

/// 64-bit FNV-1a as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace qpnls
