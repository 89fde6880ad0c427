#pragma once

// Multiple API-sequence extraction: depth-first traversal of the CFG with a
// backtracking stack. Blocks are globally visited-once (which is what makes
// cyclic graphs terminate), deferred branch arms carry a snapshot of the
// path length and call stack, and Call/Ret pair through a call stack so a
// return resumes at the matching continuation.

#include "apiseq/cfg.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace apiseq::paths {

enum class Terminal : uint8_t {
    Return,    // Ret with no pending continuation
    Halt,
    Indirect,  // CallIndirect: target unknowable statically
    Exhausted, // every successor already visited
    LimitHit,
};

const char* terminal_name(Terminal t);

struct ApiPath {
    std::vector<std::string> apis;
    std::vector<int> blocks;
    Terminal terminal = Terminal::Halt;

    friend bool operator==(const ApiPath&, const ApiPath&) = default;
};

struct TraversalLimits {
    size_t max_paths = 4096;
    size_t max_path_blocks = 10000;
};

struct ExtractResult {
    std::vector<ApiPath> paths;
    bool truncated = false;
};

ExtractResult extract_paths(const cfg::Cfg& graph, const TraversalLimits& limits = {});

} // namespace apiseq::paths
