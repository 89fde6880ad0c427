#include "apiseq/cfg.hpp"

#include "apiseq/error.hpp"

#include <cstdio>
#include <set>

namespace apiseq::cfg {

const char* edge_kind_name(EdgeKind kind) {
    switch (kind) {
    case EdgeKind::Taken: return "taken";
    case EdgeKind::FallThrough: return "fall_through";
    case EdgeKind::CallTarget: return "call_target";
    case EdgeKind::CallContinuation: return "call_continuation";
    }
    return "?";
}

std::vector<Edge> Cfg::out_edges(int id) const {
    std::vector<Edge> out;
    for (const Edge& e : edges)
        if (e.from == id) out.push_back(e);
    return out;
}

Cfg build_cfg(const disasm::Listing& listing) {
    if (!listing.contains(listing.entry))
        fail("EntryNotListed", "entry address not present in the listing");

    // Leaders: entry, every listed branch/call target, every listed
    // fall-through of a Jcc/Call.
    std::set<uint32_t> leaders{listing.entry};
    for (const auto& [addr, li] : listing.instructions) {
        isa::OpKind kind = li.instr.kind;
        if (kind == isa::OpKind::Jmp || kind == isa::OpKind::Jcc ||
            kind == isa::OpKind::Call) {
            if (listing.contains(li.instr.operand)) leaders.insert(li.instr.operand);
        }
        if (kind == isa::OpKind::Jcc || kind == isa::OpKind::Call) {
            if (auto ft = listing.fall_through_of(addr); ft && listing.contains(*ft))
                leaders.insert(*ft);
        }
    }

    Cfg graph;
    auto begin_block = [&](uint32_t start) {
        BasicBlock block;
        block.id = static_cast<int>(graph.blocks.size());
        block.start = start;
        graph.block_at.emplace(start, block.id);
        graph.blocks.push_back(std::move(block));
        return &graph.blocks.back();
    };

    BasicBlock* current = nullptr;
    for (auto it = listing.instructions.begin(); it != listing.instructions.end(); ++it) {
        const auto& [addr, li] = *it;
        if (!current || leaders.count(addr)) current = begin_block(addr);
        current->instr_addrs.push_back(addr);
        if (li.instr.kind == isa::OpKind::ApiCall && li.api)
            current->api_calls.push_back(*li.api);
        current->terminator = li.instr.kind;

        if (isa::is_control_transfer(li.instr.kind)) {
            current = nullptr;
            continue;
        }
        auto next = std::next(it);
        auto ft = listing.fall_through_of(addr);
        bool continues = next != listing.instructions.end() && ft && next->first == *ft &&
                         !leaders.count(*ft);
        if (!continues) current = nullptr;
    }

    for (const BasicBlock& block : graph.blocks) {
        uint32_t last = block.instr_addrs.back();
        const disasm::ListedInstruction& li = listing.instructions.at(last);
        auto ft = listing.fall_through_of(last);
        auto add = [&](uint32_t to, EdgeKind kind) {
            auto hit = graph.block_at.find(to);
            if (hit != graph.block_at.end())
                graph.edges.push_back({block.id, hit->second, kind});
        };
        switch (li.instr.kind) {
        case isa::OpKind::Jmp:
            add(li.instr.operand, EdgeKind::Taken);
            break;
        case isa::OpKind::Jcc:
            add(li.instr.operand, EdgeKind::Taken);
            if (ft) add(*ft, EdgeKind::FallThrough);
            break;
        case isa::OpKind::Call:
            add(li.instr.operand, EdgeKind::CallTarget);
            if (ft) add(*ft, EdgeKind::CallContinuation);
            break;
        case isa::OpKind::Ret:
        case isa::OpKind::Halt:
        case isa::OpKind::CallIndirect:
            break;
        default:
            // Block cut short by a leader (or ended at a gap): execution
            // falls straight into whatever follows, when listed.
            if (ft) add(*ft, EdgeKind::FallThrough);
            break;
        }
    }

    graph.entry_block = graph.block_at.at(listing.entry);
    return graph;
}

std::string to_dot(const Cfg& graph) {
    if (graph.blocks.empty()) fail("EmptyGraph", "cfg has no blocks");
    std::string out = "digraph cfg {\n  node [shape=box, fontname=\"monospace\"];\n";
    char buf[64];
    for (const BasicBlock& block : graph.blocks) {
        std::snprintf(buf, sizeof buf, "  b%d [label=\"B%d @%04X", block.id, block.id,
                      block.start);
        out += buf;
        for (const std::string& api : block.api_calls) {
            out += "\\n";
            out += api;
        }
        out += "\"];\n";
    }
    for (const Edge& e : graph.edges) {
        std::snprintf(buf, sizeof buf, "  b%d -> b%d [label=\"%s\"];\n", e.from, e.to,
                      edge_kind_name(e.kind));
        out += buf;
    }
    out += "}\n";
    return out;
}

} // namespace apiseq::cfg
