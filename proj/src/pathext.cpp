#include "apiseq/pathext.hpp"

#include <optional>

namespace apiseq::paths {

const char* terminal_name(Terminal t) {
    switch (t) {
    case Terminal::Return: return "return";
    case Terminal::Halt: return "halt";
    case Terminal::Indirect: return "indirect";
    case Terminal::Exhausted: return "exhausted";
    case Terminal::LimitHit: return "limit";
    }
    return "?";
}

namespace {

constexpr int kNoContinuation = -1;

struct Successors {
    std::optional<int> taken;        // Taken or CallTarget
    std::optional<int> fall;         // FallThrough or CallContinuation
};

// Deferred branch arm: where to resume plus everything needed to restore
// the traversal state at the branch point.
struct Pending {
    int block;
    size_t apis_len;
    size_t blocks_len;
    std::vector<int> call_stack;
};

} // namespace

ExtractResult extract_paths(const cfg::Cfg& graph, const TraversalLimits& limits) {
    ExtractResult result;
    if (graph.blocks.empty()) return result;

    std::vector<Successors> succ(graph.blocks.size());
    for (const cfg::Edge& e : graph.edges) {
        auto& s = succ[static_cast<size_t>(e.from)];
        if (e.kind == cfg::EdgeKind::Taken || e.kind == cfg::EdgeKind::CallTarget)
            s.taken = e.to;
        else
            s.fall = e.to;
    }

    std::vector<char> visited(graph.blocks.size(), 0);
    std::vector<Pending> pending;
    std::vector<int> call_stack;
    std::vector<std::string> apis;
    std::vector<int> blocks;

    auto unvisited = [&](const std::optional<int>& b) { return b && !visited[static_cast<size_t>(*b)]; };
    auto emit = [&](Terminal t) { result.paths.push_back({apis, blocks, t}); };

    int current = graph.entry_block;
    for (;;) {
        visited[static_cast<size_t>(current)] = 1;
        blocks.push_back(current);
        const cfg::BasicBlock& block = graph.block(current);
        apis.insert(apis.end(), block.api_calls.begin(), block.api_calls.end());

        const Successors& s = succ[static_cast<size_t>(current)];
        std::optional<int> next;
        std::optional<Terminal> terminal;

        switch (block.terminator) {
        case isa::OpKind::Halt:
            terminal = Terminal::Halt;
            break;
        case isa::OpKind::CallIndirect:
            terminal = Terminal::Indirect;
            break;
        case isa::OpKind::Ret:
            if (call_stack.empty()) {
                terminal = Terminal::Return;
            } else {
                int cont = call_stack.back();
                call_stack.pop_back();
                if (cont == kNoContinuation)
                    terminal = Terminal::Return;
                else if (!visited[static_cast<size_t>(cont)])
                    next = cont;
                else
                    terminal = Terminal::Exhausted;
            }
            break;
        case isa::OpKind::Jcc:
            if (unvisited(s.taken) && unvisited(s.fall)) {
                pending.push_back({*s.fall, apis.size(), blocks.size(), call_stack});
                next = s.taken;
            } else if (unvisited(s.taken)) {
                next = s.taken;
            } else if (unvisited(s.fall)) {
                next = s.fall;
            } else {
                terminal = Terminal::Exhausted;
            }
            break;
        case isa::OpKind::Jmp:
            if (unvisited(s.taken))
                next = s.taken;
            else
                terminal = Terminal::Exhausted;
            break;
        case isa::OpKind::Call:
            if (unvisited(s.taken)) {
                call_stack.push_back(s.fall ? *s.fall : kNoContinuation);
                next = s.taken;
            } else if (unvisited(s.fall)) {
                next = s.fall;
            } else {
                terminal = Terminal::Exhausted;
            }
            break;
        default: // block cut short by a leader or a decode gap
            if (unvisited(s.fall))
                next = s.fall;
            else
                terminal = Terminal::Exhausted;
            break;
        }

        if (next && blocks.size() >= limits.max_path_blocks) {
            terminal = Terminal::LimitHit;
            result.truncated = true;
            next.reset();
        }
        if (next) {
            current = *next;
            continue;
        }

        emit(*terminal);

        // Backtrack: drop arms whose block got visited via another route.
        while (!pending.empty() && visited[static_cast<size_t>(pending.back().block)])
            pending.pop_back();
        if (pending.empty()) break;
        if (result.paths.size() >= limits.max_paths) {
            result.truncated = true;
            break;
        }
        Pending p = std::move(pending.back());
        pending.pop_back();
        apis.resize(p.apis_len);
        blocks.resize(p.blocks_len);
        call_stack = std::move(p.call_stack);
        current = p.block;
    }
    return result;
}

} // namespace apiseq::paths
