#pragma once

// Control-flow graph of basic blocks over a listing. Leaders are the entry,
// every branch/call target, and every Jcc/Call fall-through; blocks are the
// maximal straight-line runs between leaders. Edge rules per terminator:
//   Jcc   -> one Taken + one FallThrough (each only when its target is listed)
//   Jmp   -> at most one Taken
//   Call  -> one CallTarget + one CallContinuation (same caveat)
//   Ret/Halt/CallIndirect -> none
// A block cut short by a leader keeps a FallThrough edge into it.

#include "apiseq/disasm.hpp"

#include <map>
#include <string>
#include <vector>

namespace apiseq::cfg {

enum class EdgeKind : uint8_t { Taken, FallThrough, CallTarget, CallContinuation };

const char* edge_kind_name(EdgeKind kind);

struct BasicBlock {
    int id = 0;
    uint32_t start = 0;
    std::vector<uint32_t> instr_addrs;
    std::vector<std::string> api_calls; // resolved names, in block order
    isa::OpKind terminator = isa::OpKind::Halt;
};

struct Edge {
    int from = 0;
    int to = 0;
    EdgeKind kind = EdgeKind::Taken;

    friend bool operator==(const Edge&, const Edge&) = default;
};

struct Cfg {
    std::vector<BasicBlock> blocks; // ids dense, in start-address order
    std::vector<Edge> edges;        // grouped by from-block, Taken/CallTarget first
    int entry_block = 0;
    std::map<uint32_t, int> block_at; // start address -> block id

    const BasicBlock& block(int id) const { return blocks[static_cast<size_t>(id)]; }

    // Out-edges of one block, in deterministic emission order.
    std::vector<Edge> out_edges(int id) const;
};

// Errors: EntryNotListed.
Cfg build_cfg(const disasm::Listing& listing);

// Graphviz export; node labels carry the API calls, edge labels the kind.
// Errors: EmptyGraph.
std::string to_dot(const Cfg& graph);

} // namespace apiseq::cfg
