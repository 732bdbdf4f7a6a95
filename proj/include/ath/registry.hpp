#pragma once

#include "ath/errors.hpp"
#include "ath/vocab.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ath {

// How the executor maps an operation onto graph traversal. Unmapped entries
// parse fine but raise UnsupportedOperation when executed, which evaluation
// counts rather than crashes on.
enum class OpSemantics : std::uint8_t {
    Select,
    FilterAttr,
    Relate,
    VerifyAttr,
    VerifyRel,
    Exist,
    Query,
    And,
    Or,
    Choose,
    ChooseRel,
    Same,
    Different,
    Common,
    Unmapped,
};

inline const char* to_string(OpSemantics s) {
    switch (s) {
        case OpSemantics::Select: return "select";
        case OpSemantics::FilterAttr: return "filter_attr";
        case OpSemantics::Relate: return "relate";
        case OpSemantics::VerifyAttr: return "verify_attr";
        case OpSemantics::VerifyRel: return "verify_rel";
        case OpSemantics::Exist: return "exist";
        case OpSemantics::Query: return "query";
        case OpSemantics::And: return "and";
        case OpSemantics::Or: return "or";
        case OpSemantics::Choose: return "choose";
        case OpSemantics::ChooseRel: return "choose_rel";
        case OpSemantics::Same: return "same";
        case OpSemantics::Different: return "different";
        case OpSemantics::Common: return "common";
        case OpSemantics::Unmapped: return "unmapped";
    }
    return "?";
}

inline std::optional<OpSemantics> semantics_from_string(std::string_view s) {
    static const std::unordered_map<std::string_view, OpSemantics> table = {
        {"select", OpSemantics::Select},       {"filter_attr", OpSemantics::FilterAttr},
        {"relate", OpSemantics::Relate},       {"verify_attr", OpSemantics::VerifyAttr},
        {"verify_rel", OpSemantics::VerifyRel},{"exist", OpSemantics::Exist},
        {"query", OpSemantics::Query},         {"and", OpSemantics::And},
        {"or", OpSemantics::Or},               {"choose", OpSemantics::Choose},
        {"choose_rel", OpSemantics::ChooseRel},{"same", OpSemantics::Same},
        {"different", OpSemantics::Different}, {"common", OpSemantics::Common},
        {"unmapped", OpSemantics::Unmapped},
    };
    auto it = table.find(s);
    if (it == table.end()) return std::nullopt;
    return it->second;
}

// Default semantics for a full operation string, split into base keyword and
// qualifier. Covers the core operation families; anything else is Unmapped.
inline OpSemantics derive_semantics(std::string_view kind, std::string_view qualifier) {
    if (kind == "select") return OpSemantics::Select;
    if (kind == "filter") return OpSemantics::FilterAttr;
    if (kind == "relate") return OpSemantics::Relate;
    if (kind == "verify")
        return (qualifier == "rel" || qualifier == "rels") ? OpSemantics::VerifyRel
                                                           : OpSemantics::VerifyAttr;
    if (kind == "exist") return OpSemantics::Exist;
    if (kind == "query") return OpSemantics::Query;
    if (kind == "and") return OpSemantics::And;
    if (kind == "or") return OpSemantics::Or;
    if (kind == "choose")
        return (qualifier == "rel" || qualifier == "rels") ? OpSemantics::ChooseRel
                                                           : OpSemantics::Choose;
    if (kind == "same") return OpSemantics::Same;
    if (kind == "different") return OpSemantics::Different;
    if (kind == "common") return OpSemantics::Common;
    return OpSemantics::Unmapped;
}

struct RegistryEntry {
    std::string full;      // e.g. "filter color"
    std::string kind;      // first word
    std::string qualifier; // remainder, may be empty
    OpSemantics semantics = OpSemantics::Unmapped;
    int min_args = 0;
    int max_args = -1; // -1 = unbounded
    bool enabled = true;
};

namespace detail {

inline std::pair<int, int> default_arity(OpSemantics s) {
    switch (s) {
        case OpSemantics::Select: return {1, 1};
        case OpSemantics::FilterAttr: return {1, 1};
        case OpSemantics::Relate: return {1, 3};
        case OpSemantics::VerifyAttr: return {1, 1};
        case OpSemantics::VerifyRel: return {1, 3};
        case OpSemantics::Exist: return {0, 1};
        case OpSemantics::Query: return {1, 1};
        case OpSemantics::And: return {0, 1};
        case OpSemantics::Or: return {0, 1};
        case OpSemantics::Choose: return {1, 2};
        case OpSemantics::ChooseRel: return {1, 3};
        case OpSemantics::Same: return {0, 1};
        case OpSemantics::Different: return {0, 1};
        case OpSemantics::Common: return {0, 1};
        case OpSemantics::Unmapped: return {0, -1};
    }
    return {0, -1};
}

inline std::string trim(std::string_view s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

} // namespace detail

// The closed inventory of operation strings an op-seq may use. GQA's corpus
// has 136 of them; the set is loaded from a versioned configuration file
// built by a corpus scan, never hard-coded into the executor.
class OperationRegistry {
public:
    OperationRegistry() = default;

    explicit OperationRegistry(std::vector<RegistryEntry> entries) : entries_(std::move(entries)) {
        for (std::uint32_t i = 0; i < entries_.size(); ++i) {
            auto& e = entries_[i];
            if (e.kind.empty()) {
                auto sp = e.full.find(' ');
                e.kind = e.full.substr(0, sp);
                e.qualifier = sp == std::string::npos ? "" : e.full.substr(sp + 1);
            }
            if (!by_full_.emplace(e.full, i).second)
                throw Error("operation registry: duplicate entry '" + e.full + "'");
        }
    }

    const std::vector<RegistryEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    const RegistryEntry* find(std::string_view full) const {
        auto it = by_full_.find(std::string(full));
        if (it == by_full_.end()) return nullptr;
        return &entries_[it->second];
    }

    std::optional<std::uint32_t> index_of(std::string_view full) const {
        auto it = by_full_.find(std::string(full));
        if (it == by_full_.end()) return std::nullopt;
        return it->second;
    }

    const RegistryEntry& entry(std::uint32_t i) const { return entries_.at(i); }

    // Longest registry entry matching a whole-word prefix of `head`; the
    // remainder after the match must be empty for the head to resolve.
    const RegistryEntry* longest_prefix(std::string_view head) const {
        // Heads are short (one or two words); try progressively shorter
        // whole-word prefixes, longest first.
        std::string candidate(head);
        while (true) {
            if (const RegistryEntry* e = find(candidate)) return e;
            auto sp = candidate.rfind(' ');
            if (sp == std::string::npos) return nullptr;
            candidate.resize(sp);
        }
    }

    // The standard core family instantiated for a concrete vocabulary:
    // select / filter [cat] / relate / verify [cat] / verify rel / exist /
    // query / and / or / choose [cat] / choose rel / same [cat] / different
    // [cat] / common.
    static OperationRegistry standard(const Vocabulary& vocab) {
        std::vector<RegistryEntry> entries;
        auto add = [&entries](std::string full, OpSemantics s) {
            auto [lo, hi] = detail::default_arity(s);
            entries.push_back({std::move(full), "", "", s, lo, hi, true});
        };
        add("select", OpSemantics::Select);
        add("filter", OpSemantics::FilterAttr);
        for (const auto& c : vocab.attribute_categories())
            add("filter " + c.name, OpSemantics::FilterAttr);
        add("relate", OpSemantics::Relate);
        add("verify", OpSemantics::VerifyAttr);
        for (const auto& c : vocab.attribute_categories())
            add("verify " + c.name, OpSemantics::VerifyAttr);
        add("verify rel", OpSemantics::VerifyRel);
        add("exist", OpSemantics::Exist);
        add("query", OpSemantics::Query);
        add("and", OpSemantics::And);
        add("or", OpSemantics::Or);
        add("choose", OpSemantics::Choose);
        for (const auto& c : vocab.attribute_categories())
            add("choose " + c.name, OpSemantics::Choose);
        add("choose rel", OpSemantics::ChooseRel);
        add("same", OpSemantics::Same);
        for (const auto& c : vocab.attribute_categories())
            add("same " + c.name, OpSemantics::Same);
        add("different", OpSemantics::Different);
        for (const auto& c : vocab.attribute_categories())
            add("different " + c.name, OpSemantics::Different);
        add("common", OpSemantics::Common);
        return OperationRegistry(std::move(entries));
    }

    // File format: key-value lines. "version = 1" then one "op = <full>"
    // line per entry with optional ";"-separated overrides:
    //   op = verify rel ; semantics = verify_rel ; min_args = 1 ; enabled = true
    static OperationRegistry load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IngestError("operation registry: cannot open " + path.string());
        std::vector<RegistryEntry> entries;
        std::string line;
        bool version_seen = false;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::string t = detail::trim(line);
            if (t.empty() || t[0] == '#') continue;
            auto eq = t.find('=');
            if (eq == std::string::npos)
                throw IngestError("operation registry: " + path.string() + ":" +
                                  std::to_string(lineno) + ": expected key = value");
            std::string key = detail::trim(t.substr(0, eq));
            std::string value = detail::trim(t.substr(eq + 1));
            if (key == "version") {
                version_seen = true;
                continue;
            }
            if (key != "op")
                throw IngestError("operation registry: unknown key '" + key + "'");
            RegistryEntry e;
            std::optional<OpSemantics> semantics;
            std::optional<int> min_args, max_args;
            std::stringstream fields(value);
            std::string field;
            bool first = true;
            while (std::getline(fields, field, ';')) {
                field = detail::trim(field);
                if (first) {
                    e.full = field;
                    first = false;
                    continue;
                }
                auto feq = field.find('=');
                if (feq == std::string::npos)
                    throw IngestError("operation registry: bad field '" + field + "'");
                std::string fkey = detail::trim(field.substr(0, feq));
                std::string fval = detail::trim(field.substr(feq + 1));
                if (fkey == "semantics") {
                    auto s = semantics_from_string(fval);
                    if (!s) throw IngestError("operation registry: unknown semantics '" + fval + "'");
                    semantics = *s;
                } else if (fkey == "min_args") {
                    min_args = std::stoi(fval);
                } else if (fkey == "max_args") {
                    max_args = std::stoi(fval);
                } else if (fkey == "enabled") {
                    e.enabled = fval == "true" || fval == "1";
                } else {
                    throw IngestError("operation registry: unknown field '" + fkey + "'");
                }
            }
            if (e.full.empty())
                throw IngestError("operation registry: empty op name at line " + std::to_string(lineno));
            auto sp = e.full.find(' ');
            e.kind = e.full.substr(0, sp);
            e.qualifier = sp == std::string::npos ? "" : e.full.substr(sp + 1);
            e.semantics = semantics ? *semantics : derive_semantics(e.kind, e.qualifier);
            auto [lo, hi] = detail::default_arity(e.semantics);
            e.min_args = min_args.value_or(lo);
            e.max_args = max_args.value_or(hi);
            entries.push_back(std::move(e));
        }
        if (!version_seen)
            throw IngestError("operation registry: " + path.string() + " missing version field");
        return OperationRegistry(std::move(entries));
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path);
        if (!out) throw IngestError("operation registry: cannot write " + path.string());
        out << "# ath operation registry\n";
        out << "version = 1\n";
        for (const auto& e : entries_) {
            out << "op = " << e.full;
            if (e.semantics != derive_semantics(e.kind, e.qualifier))
                out << " ; semantics = " << to_string(e.semantics);
            auto [lo, hi] = detail::default_arity(e.semantics);
            if (e.min_args != lo) out << " ; min_args = " << e.min_args;
            if (e.max_args != hi) out << " ; max_args = " << e.max_args;
            if (!e.enabled) out << " ; enabled = false";
            out << '\n';
        }
    }

private:
    std::vector<RegistryEntry> entries_;
    std::unordered_map<std::string, std::uint32_t> by_full_;
};

} // namespace ath
