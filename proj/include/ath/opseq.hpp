#pragma once

#include "ath/errors.hpp"
#include "ath/registry.hpp"

#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace ath {

// One step of an operation sequence: "<kind[ qualifier]>: <arg,arg,...>".
// Dependencies index earlier operations whose results this one consumes.
struct Operation {
    std::string kind;
    std::string qualifier;
    std::vector<std::string> args;
    std::vector<std::size_t> dependencies;

    std::string full_op() const {
        return qualifier.empty() ? kind : kind + " " + qualifier;
    }

    bool operator==(const Operation&) const = default;
};

struct OpSeq {
    std::vector<Operation> ops;
    std::string question_id;
    std::string raw_text; // original serialized form when ingested

    bool empty() const { return ops.empty(); }
    std::size_t size() const { return ops.size(); }

    // Equality is over the operations; raw_text and question_id are carriers.
    bool operator==(const OpSeq& o) const { return ops == o.ops; }
};

// A dependency-linear chain (or two) plus an optional combining final
// operation. Indices refer into the original OpSeq.
struct BranchPlan {
    std::vector<std::vector<std::size_t>> branches; // one or two
    std::optional<std::size_t> combiner;            // index of the final combining op

    bool operator==(const BranchPlan&) const = default;
};

namespace detail {

inline std::string join(const std::vector<std::string>& parts, const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

// Splits an argument string on commas; pieces keep their inner spaces and
// functional symbols ("_", "|", "not(...)") untouched.
inline std::vector<std::string> split_args(std::string_view text) {
    std::vector<std::string> args;
    std::string current;
    for (char c : text) {
        if (c == ',') {
            args.push_back(trim(current));
            current.clear();
        } else {
            current += c;
        }
    }
    std::string tail = trim(current);
    if (!tail.empty() || !args.empty()) {
        // "a," keeps a trailing empty argument only when a comma demands it;
        // a bare empty string yields no arguments at all.
        if (!tail.empty() || !text.empty()) args.push_back(tail);
    }
    if (args.size() == 1 && args[0].empty()) args.clear();
    return args;
}

// Parses a trailing "[i,j]" dependency group, if present. Returns the text
// with the group removed.
inline std::string strip_dependencies(std::string_view text, std::vector<std::size_t>& deps) {
    std::string t = trim(text);
    if (t.empty() || t.back() != ']') return t;
    auto open = t.rfind('[');
    if (open == std::string::npos) return t;
    std::string inner = t.substr(open + 1, t.size() - open - 2);
    std::vector<std::size_t> parsed;
    std::string num;
    for (char c : inner + ",") {
        if (c == ',') {
            std::string n = trim(num);
            num.clear();
            if (n.empty()) continue;
            for (char d : n)
                if (d < '0' || d > '9') return t; // not a dependency group
            parsed.push_back(static_cast<std::size_t>(std::stoull(n)));
        } else {
            num += c;
        }
    }
    deps = std::move(parsed);
    return trim(t.substr(0, open));
}

} // namespace detail

// Parses the line format: one operation per line,
//   <kind[ qualifier]>: <argument[,argument...]> [i,j]
// The head before ':' must resolve in the registry (longest whole-word
// prefix, nothing left over); the trailing bracket group is optional.
inline OpSeq parse_opseq(std::string_view text, const OperationRegistry& registry,
                         std::string question_id = {}) {
    OpSeq seq;
    seq.question_id = std::move(question_id);
    seq.raw_text = std::string(text);
    std::istringstream in{seq.raw_text};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = detail::trim(line);
        if (t.empty()) continue;
        auto colon = t.find(':');
        if (colon == std::string::npos)
            throw ParseError("op-seq line " + std::to_string(lineno) + ": missing ':' in \"" + t + "\"");
        std::string head = detail::trim(t.substr(0, colon));
        const RegistryEntry* entry = registry.longest_prefix(head);
        if (entry == nullptr || entry->full != head)
            throw UnknownOperation("op-seq line " + std::to_string(lineno) + ": unknown operation \"" +
                                   head + "\"");
        Operation op;
        op.kind = entry->kind;
        op.qualifier = entry->qualifier;
        std::string rest = detail::strip_dependencies(t.substr(colon + 1), op.dependencies);
        op.args = detail::split_args(rest);
        const int argc = static_cast<int>(op.args.size());
        if (argc < entry->min_args || (entry->max_args >= 0 && argc > entry->max_args))
            throw ParseError("op-seq line " + std::to_string(lineno) + ": operation \"" + entry->full +
                             "\" takes " + std::to_string(entry->min_args) + ".." +
                             (entry->max_args < 0 ? std::string("*") : std::to_string(entry->max_args)) +
                             " arguments, got " + std::to_string(argc));
        for (std::size_t d : op.dependencies)
            if (d >= seq.ops.size())
                throw ParseError("op-seq line " + std::to_string(lineno) +
                                 ": dependency on later operation " + std::to_string(d));
        seq.ops.push_back(std::move(op));
    }
    return seq;
}

inline std::string serialize_operation(const Operation& op) {
    std::string line = op.full_op() + ":";
    if (!op.args.empty()) line += " " + detail::join(op.args, ",");
    if (!op.dependencies.empty()) {
        line += " [";
        for (std::size_t i = 0; i < op.dependencies.size(); ++i) {
            if (i) line += ",";
            line += std::to_string(op.dependencies[i]);
        }
        line += "]";
    }
    return line;
}

// Inverse of parse_opseq: parse_opseq(serialize_opseq(s)) == s.
inline std::string serialize_opseq(const OpSeq& seq) {
    std::string out;
    for (const auto& op : seq.ops) {
        out += serialize_operation(op);
        out += '\n';
    }
    return out;
}

namespace detail {

inline bool combiner_capable(OpSemantics s) {
    switch (s) {
        case OpSemantics::And:
        case OpSemantics::Or:
        case OpSemantics::Same:
        case OpSemantics::Different:
        case OpSemantics::Common:
            return true;
        default:
            return false;
    }
}

// Chain of ops ending at `root` following single dependencies backwards.
inline std::vector<std::size_t> chain_to(const OpSeq& seq, std::size_t tail) {
    std::vector<std::size_t> chain;
    std::size_t cur = tail;
    while (true) {
        chain.insert(chain.begin(), cur);
        const auto& deps = seq.ops[cur].dependencies;
        if (deps.empty()) break;
        if (deps.size() > 1)
            throw UnsupportedStructure("op " + std::to_string(cur) +
                                       " has multiple dependencies inside a branch");
        if (deps[0] >= cur)
            throw UnsupportedStructure("dependency does not point backwards");
        cur = deps[0];
    }
    return chain;
}

} // namespace detail

// Splits an op-seq into one linear branch, or two branches plus a final
// combining operation. Explicit dependency indices drive the split when
// present; otherwise a second root "select" starts branch two. More than two
// roots is unsupported and counts as a system failure.
inline BranchPlan split_branches(const OpSeq& seq, const OperationRegistry& registry) {
    BranchPlan plan;
    if (seq.ops.empty()) {
        plan.branches.push_back({});
        return plan;
    }

    bool any_deps = false;
    for (const auto& op : seq.ops)
        if (!op.dependencies.empty()) any_deps = true;

    const std::size_t last = seq.ops.size() - 1;

    if (any_deps) {
        const auto& final_deps = seq.ops[last].dependencies;
        for (std::size_t i = 0; i + 1 < seq.ops.size(); ++i)
            if (seq.ops[i].dependencies.size() > 1)
                throw UnsupportedStructure("only the final operation may combine branches");
        if (final_deps.size() <= 1) {
            plan.branches.push_back(detail::chain_to(seq, last));
            if (plan.branches[0].size() != seq.ops.size())
                throw UnsupportedStructure("operations outside the dependency chain");
            return plan;
        }
        if (final_deps.size() > 2)
            throw UnsupportedStructure("more than two branches");
        plan.combiner = last;
        for (std::size_t d : final_deps) {
            if (d >= last) throw UnsupportedStructure("combiner depends on itself");
            plan.branches.push_back(detail::chain_to(seq, d));
        }
        std::size_t covered = 1; // the combiner
        for (const auto& b : plan.branches) covered += b.size();
        if (covered != seq.ops.size())
            throw UnsupportedStructure("operations lost in branch split");
        return plan;
    }

    // No dependency info: roots are "select" operations.
    std::vector<std::size_t> roots;
    for (std::size_t i = 0; i < seq.ops.size(); ++i)
        if (seq.ops[i].kind == "select") roots.push_back(i);
    if (roots.size() > 2) throw UnsupportedStructure("more than two roots");

    const RegistryEntry* final_entry = registry.find(seq.ops[last].full_op());
    const bool final_combines =
        final_entry != nullptr && detail::combiner_capable(final_entry->semantics);

    if (roots.size() == 2 && final_combines) {
        plan.combiner = last;
        std::vector<std::size_t> b1, b2;
        for (std::size_t i = roots[0]; i < roots[1]; ++i) b1.push_back(i);
        for (std::size_t i = roots[1]; i < last; ++i) b2.push_back(i);
        if (roots[0] != 0) throw UnsupportedStructure("operations before the first root");
        plan.branches.push_back(std::move(b1));
        plan.branches.push_back(std::move(b2));
        return plan;
    }
    if (roots.size() == 2)
        throw UnsupportedStructure("two roots without a combining final operation");

    std::vector<std::size_t> all(seq.ops.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    plan.branches.push_back(std::move(all));
    return plan;
}

// Round-trip equality for processed op-seqs: the operations must match on
// kind/qualifier/args and both sequences must split into the same branch
// structure. Dependency indices themselves are not part of the tokenized
// representation, so they are compared through the split.
inline bool roundtrip_equal(const OpSeq& a, const OpSeq& b, const OperationRegistry& registry) {
    if (a.ops.size() != b.ops.size()) return false;
    for (std::size_t i = 0; i < a.ops.size(); ++i) {
        const auto& x = a.ops[i];
        const auto& y = b.ops[i];
        if (x.kind != y.kind || x.qualifier != y.qualifier || x.args != y.args) return false;
    }
    try {
        return split_branches(a, registry) == split_branches(b, registry);
    } catch (const UnsupportedStructure&) {
        return false;
    }
}

} // namespace ath
