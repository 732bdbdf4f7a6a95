#pragma once

#include "ath/errors.hpp"
#include "ath/opseq.hpp"
#include "ath/registry.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ath {

// The token class budget of the sequence model this pipeline feeds: a fixed
// number of pointer classes for copying question words, one empty class, one
// class per registered operation, and explicit classes for functional tokens
// and the most frequent argument (multi-)words. The GQA reference inventory
// totals 193 classes. Functional tokens ("_", "|", "not(", ...) can never be
// copied from the question.
class ClassInventory {
public:
    ClassInventory() = default;

    ClassInventory(std::uint32_t pointer_budget, std::vector<std::string> functional,
                   std::vector<std::string> words)
        : pointer_budget_(pointer_budget), functional_(std::move(functional)),
          words_(std::move(words)) {}

    std::uint32_t pointer_budget() const { return pointer_budget_; }
    const std::vector<std::string>& functional() const { return functional_; }
    const std::vector<std::string>& words() const { return words_; }

    std::optional<std::uint32_t> functional_index(std::string_view lexeme) const {
        for (std::uint32_t i = 0; i < functional_.size(); ++i)
            if (functional_[i] == lexeme) return i;
        return std::nullopt;
    }

    std::optional<std::uint32_t> word_index(std::string_view lexeme) const {
        for (std::uint32_t i = 0; i < words_.size(); ++i)
            if (words_[i] == lexeme) return i;
        return std::nullopt;
    }

    static ClassInventory load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IngestError("class inventory: cannot open " + path.string());
        std::uint32_t budget = 20;
        std::vector<std::string> functional, words;
        bool version_seen = false;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::string t = detail::trim(line);
            if (t.empty() || t[0] == '#') continue;
            auto eq = t.find('=');
            if (eq == std::string::npos)
                throw IngestError("class inventory: " + path.string() + ":" +
                                  std::to_string(lineno) + ": expected key = value");
            std::string key = detail::trim(t.substr(0, eq));
            std::string value = detail::trim(t.substr(eq + 1));
            if (key == "version") version_seen = true;
            else if (key == "pointer_budget") budget = static_cast<std::uint32_t>(std::stoul(value));
            else if (key == "functional") functional.push_back(value);
            else if (key == "word") words.push_back(value);
            else throw IngestError("class inventory: unknown key '" + key + "'");
        }
        if (!version_seen)
            throw IngestError("class inventory: " + path.string() + " missing version field");
        return ClassInventory(budget, std::move(functional), std::move(words));
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path);
        if (!out) throw IngestError("class inventory: cannot write " + path.string());
        out << "# ath token class inventory\n";
        out << "version = 1\n";
        out << "pointer_budget = " << pointer_budget_ << '\n';
        for (const auto& f : functional_) out << "functional = " << f << '\n';
        for (const auto& w : words_) out << "word = " << w << '\n';
    }

private:
    std::uint32_t pointer_budget_ = 20;
    std::vector<std::string> functional_;
    std::vector<std::string> words_;
};

struct EmptyToken {
    bool operator==(const EmptyToken&) const = default;
};
struct PointerToken {
    std::uint32_t word_index = 0; // index into the question word list
    bool operator==(const PointerToken&) const = default;
};
struct ClassToken {
    std::uint32_t id = 0; // global class id (operation, functional or word class)
    bool operator==(const ClassToken&) const = default;
};

using Token = std::variant<EmptyToken, PointerToken, ClassToken>;

struct TokenizedOpSeq {
    std::vector<Token> tokens;

    bool operator==(const TokenizedOpSeq&) const = default;
};

// Assigns the flat class-id space: [0] empty, [1 .. P] pointers,
// then operations, then functional tokens, then frequent words.
class TokenCodec {
public:
    TokenCodec(const OperationRegistry& registry, const ClassInventory& inventory)
        : registry_(&registry), inventory_(&inventory) {}

    enum class IdKind : std::uint8_t { Empty, Pointer, Op, Functional, Word };

    std::uint32_t empty_id() const { return 0; }
    std::uint32_t pointer_id(std::uint32_t word_index) const { return 1 + word_index; }
    std::uint32_t op_id(std::uint32_t op_index) const { return op_base() + op_index; }
    std::uint32_t functional_id(std::uint32_t i) const { return functional_base() + i; }
    std::uint32_t word_id(std::uint32_t i) const { return word_base() + i; }

    std::size_t total_classes() const {
        return word_base() + inventory_->words().size();
    }

    std::pair<IdKind, std::uint32_t> classify(std::uint32_t id) const {
        if (id == 0) return {IdKind::Empty, 0};
        if (id < op_base()) return {IdKind::Pointer, id - 1};
        if (id < functional_base()) return {IdKind::Op, id - op_base()};
        if (id < word_base()) return {IdKind::Functional, id - functional_base()};
        if (id < total_classes()) return {IdKind::Word, id - word_base()};
        throw DetokenizeError("class id " + std::to_string(id) + " outside the inventory");
    }

    const OperationRegistry& registry() const { return *registry_; }
    const ClassInventory& inventory() const { return *inventory_; }

private:
    std::uint32_t op_base() const { return 1 + inventory_->pointer_budget(); }
    std::uint32_t functional_base() const {
        return op_base() + static_cast<std::uint32_t>(registry_->size());
    }
    std::uint32_t word_base() const {
        return functional_base() + static_cast<std::uint32_t>(inventory_->functional().size());
    }

    const OperationRegistry* registry_;
    const ClassInventory* inventory_;
};

// One recorded processing conflict. Lossy issues change the reconstructed
// op-seq; AmbiguousPointer only notes that the first of several matching
// question positions was taken.
struct TokenizeIssue {
    enum class Kind : std::uint8_t {
        DroppedWord,        // word neither in the question nor in the inventory
        CaseFoldedPointer,  // pointer resolves to a differently-cased question word
        NormalizedArgument, // argument spelling not reproducible from its lexemes
        AmbiguousPointer,   // several question positions match; first taken
        StructureLoss,      // branch structure not recoverable after processing
    };

    Kind kind;
    std::size_t op_index = 0;
    std::string word;

    bool lossy() const { return kind != Kind::AmbiguousPointer; }
};

inline const char* to_string(TokenizeIssue::Kind k) {
    switch (k) {
        case TokenizeIssue::Kind::DroppedWord: return "dropped_word";
        case TokenizeIssue::Kind::CaseFoldedPointer: return "case_folded_pointer";
        case TokenizeIssue::Kind::NormalizedArgument: return "normalized_argument";
        case TokenizeIssue::Kind::AmbiguousPointer: return "ambiguous_pointer";
        case TokenizeIssue::Kind::StructureLoss: return "structure_loss";
    }
    return "?";
}

struct TokenizeResult {
    TokenizedOpSeq tokens;
    std::vector<TokenizeIssue> issues;

    bool any_lossy() const {
        return std::any_of(issues.begin(), issues.end(),
                           [](const TokenizeIssue& i) { return i.lossy(); });
    }
};

namespace detail {

inline std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// Splits an argument into lexemes: words on spaces, '|' stands alone,
// "word(" (e.g. "not(") and ")" are their own lexemes.
inline std::vector<std::string> lex_argument(std::string_view arg) {
    std::vector<std::string> lexemes;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            lexemes.push_back(cur);
            cur.clear();
        }
    };
    for (char c : arg) {
        switch (c) {
            case ' ': flush(); break;
            case '|':
                flush();
                lexemes.emplace_back("|");
                break;
            case '(':
                cur += c;
                flush();
                break;
            case ')':
                flush();
                lexemes.emplace_back(")");
                break;
            default: cur += c;
        }
    }
    flush();
    return lexemes;
}

// Rebuilds an argument string from lexemes: single spaces between words, no
// space after "(", none around "|" or before ")".
inline std::string join_lexemes(const std::vector<std::string>& lexemes) {
    std::string out;
    for (const auto& lex : lexemes) {
        if (lex == "|" || lex == ")") {
            out += lex;
            continue;
        }
        if (!out.empty() && out.back() != '(' && out.back() != '|') out += ' ';
        out += lex;
    }
    return out;
}

} // namespace detail

// Pre-processing: encode an op-seq into the model's token space. Argument
// words that appear in the question (exact match on lowercased words, first
// occurrence wins, scanning at most pointer_budget words) become pointer
// tokens; functional tokens and inventory words become class tokens. In
// strict mode anything else throws UntokenizableArgument; in lenient mode the
// word is dropped and the conflict recorded — that drop is exactly the error
// class the processed-gold evaluation condition measures.
inline TokenizeResult tokenize_ex(const OpSeq& seq, const std::vector<std::string>& question_words,
                                  const TokenCodec& codec, bool lenient) {
    TokenizeResult result;
    const auto& registry = codec.registry();
    const auto& inventory = codec.inventory();

    const std::size_t window =
        std::min<std::size_t>(question_words.size(), inventory.pointer_budget());
    std::vector<std::string> lowered(window);
    for (std::size_t i = 0; i < window; ++i) lowered[i] = detail::lower(question_words[i]);

    if (seq.ops.empty()) {
        result.tokens.tokens.push_back(EmptyToken{});
        return result;
    }

    auto resolve = [&](const std::string& lexeme, std::size_t op_index) -> std::optional<Token> {
        if (auto f = inventory.functional_index(lexeme))
            return Token{ClassToken{codec.functional_id(*f)}};
        const std::string needle = detail::lower(lexeme);
        std::size_t matches = 0;
        std::optional<std::uint32_t> first;
        for (std::uint32_t i = 0; i < window; ++i) {
            if (lowered[i] == needle) {
                if (!first) first = i;
                ++matches;
            }
        }
        if (first) {
            if (question_words[*first] != lexeme)
                result.issues.push_back(
                    {TokenizeIssue::Kind::CaseFoldedPointer, op_index, lexeme});
            if (matches > 1)
                result.issues.push_back(
                    {TokenizeIssue::Kind::AmbiguousPointer, op_index, lexeme});
            return Token{PointerToken{*first}};
        }
        if (auto w = inventory.word_index(lexeme))
            return Token{ClassToken{codec.word_id(*w)}};
        if (!lenient)
            throw UntokenizableArgument("'" + lexeme + "' neither in the question nor in the class inventory");
        result.issues.push_back({TokenizeIssue::Kind::DroppedWord, op_index, lexeme});
        return std::nullopt;
    };

    for (std::size_t oi = 0; oi < seq.ops.size(); ++oi) {
        const auto& op = seq.ops[oi];
        auto op_index = registry.index_of(op.full_op());
        if (!op_index)
            throw UnknownOperation("tokenize: operation '" + op.full_op() + "' not in registry");
        result.tokens.tokens.push_back(ClassToken{codec.op_id(*op_index)});
        for (std::size_t ai = 0; ai < op.args.size(); ++ai) {
            if (ai > 0) {
                if (auto t = resolve(",", oi)) result.tokens.tokens.push_back(*t);
            }
            auto lexemes = detail::lex_argument(op.args[ai]);
            if (detail::join_lexemes(lexemes) != op.args[ai])
                result.issues.push_back(
                    {TokenizeIssue::Kind::NormalizedArgument, oi, op.args[ai]});
            for (const auto& lexeme : lexemes)
                if (auto t = resolve(lexeme, oi)) result.tokens.tokens.push_back(*t);
        }
    }
    return result;
}

inline TokenizedOpSeq tokenize(const OpSeq& seq, const std::vector<std::string>& question_words,
                               const TokenCodec& codec) {
    return tokenize_ex(seq, question_words, codec, /*lenient=*/false).tokens;
}

// Post-processing: decode a token stream back into the op-seq line format.
// Pointers are replaced with the question word they point at, verbatim.
// Dependency indices are not representable in the token space, so the result
// carries none; downstream branch splitting falls back to its heuristic.
inline OpSeq detokenize(const TokenizedOpSeq& tok, const std::vector<std::string>& question_words,
                        const TokenCodec& codec) {
    OpSeq seq;
    const auto& registry = codec.registry();
    const auto& inventory = codec.inventory();

    struct Builder {
        Operation op;
        std::vector<std::string> args;
        std::string cur;
        bool comma_seen = false;
        bool active = false;
    } b;

    auto append_word = [](std::string& cur, std::string_view w) {
        if (w == "|" || w == ")") {
            cur += w;
            return;
        }
        if (!cur.empty() && cur.back() != '(' && cur.back() != '|') cur += ' ';
        cur += w;
    };

    auto flush_op = [&] {
        if (!b.active) return;
        if (!b.cur.empty() || b.comma_seen) b.args.push_back(b.cur);
        b.op.args = std::move(b.args);
        seq.ops.push_back(std::move(b.op));
        b = Builder{};
    };

    for (const auto& token : tok.tokens) {
        if (std::holds_alternative<EmptyToken>(token)) continue;
        if (const auto* p = std::get_if<PointerToken>(&token)) {
            if (p->word_index >= question_words.size())
                throw DetokenizeError("pointer to question word " + std::to_string(p->word_index) +
                                      " beyond question length " +
                                      std::to_string(question_words.size()));
            if (!b.active) throw DetokenizeError("argument token before any operation");
            append_word(b.cur, question_words[p->word_index]);
            continue;
        }
        const auto& c = std::get<ClassToken>(token);
        auto [kind, index] = codec.classify(c.id);
        switch (kind) {
            case TokenCodec::IdKind::Empty:
                break;
            case TokenCodec::IdKind::Pointer:
                throw DetokenizeError("pointer encoded as class token");
            case TokenCodec::IdKind::Op: {
                flush_op();
                const auto& entry = registry.entry(index);
                b.op.kind = entry.kind;
                b.op.qualifier = entry.qualifier;
                b.active = true;
                break;
            }
            case TokenCodec::IdKind::Functional: {
                if (!b.active) throw DetokenizeError("argument token before any operation");
                const std::string& f = inventory.functional()[index];
                if (f == ",") {
                    b.args.push_back(b.cur);
                    b.cur.clear();
                    b.comma_seen = true;
                } else {
                    append_word(b.cur, f);
                }
                break;
            }
            case TokenCodec::IdKind::Word: {
                if (!b.active) throw DetokenizeError("argument token before any operation");
                append_word(b.cur, inventory.words()[index]);
                break;
            }
        }
    }
    flush_op();
    seq.raw_text = serialize_opseq(seq);
    return seq;
}

// The processed-gold condition: run an op-seq through tokenize/detokenize and
// report exactly what survived. Every non-identity outcome carries at least
// one lossy issue; nothing is ever corrupted silently.
struct RoundTrip {
    OpSeq processed;
    std::vector<TokenizeIssue> issues;
    bool identical = false;

    bool lossy() const {
        return std::any_of(issues.begin(), issues.end(),
                           [](const TokenizeIssue& i) { return i.lossy(); });
    }
};

inline RoundTrip process_roundtrip(const OpSeq& seq, const std::vector<std::string>& question_words,
                                   const TokenCodec& codec) {
    RoundTrip rt;
    TokenizeResult tok = tokenize_ex(seq, question_words, codec, /*lenient=*/true);
    rt.issues = std::move(tok.issues);
    rt.processed = detokenize(tok.tokens, question_words, codec);
    rt.processed.question_id = seq.question_id;
    rt.identical = roundtrip_equal(seq, rt.processed, codec.registry());
    if (!rt.identical && !rt.lossy())
        rt.issues.push_back({TokenizeIssue::Kind::StructureLoss, 0, ""});
    return rt;
}

} // namespace ath
