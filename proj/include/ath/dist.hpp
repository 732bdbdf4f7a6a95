#pragma once

#include "ath/errors.hpp"
#include "ath/vocab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ath {

// Which vocabulary list a distribution indexes into.
struct VocabSlice {
    enum class Kind : std::uint8_t { Objects, AttributeCategory, Relationships };

    Kind kind = Kind::Objects;
    std::uint32_t category = 0; // meaningful only for AttributeCategory

    static VocabSlice objects() { return {Kind::Objects, 0}; }
    static VocabSlice attributes(std::uint32_t category) { return {Kind::AttributeCategory, category}; }
    static VocabSlice relationships() { return {Kind::Relationships, 0}; }

    std::size_t size(const Vocabulary& v) const {
        switch (kind) {
            case Kind::Objects: return v.object_count();
            case Kind::AttributeCategory: return v.category(category).members.size();
            case Kind::Relationships: return v.relationship_count();
        }
        return 0;
    }

    std::optional<std::uint32_t> index_of(const Vocabulary& v, std::string_view name) const {
        switch (kind) {
            case Kind::Objects: return v.object_index(name);
            case Kind::AttributeCategory: return v.member_index(category, name);
            case Kind::Relationships: return v.relationship_index(name);
        }
        return std::nullopt;
    }

    const std::string& name_of(const Vocabulary& v, std::uint32_t i) const {
        switch (kind) {
            case Kind::Objects: return v.object_name(i);
            case Kind::AttributeCategory: return v.category(category).members.at(i);
            case Kind::Relationships: return v.relationship_name(i);
        }
        throw Error("vocab slice: bad kind");
    }

    std::string describe() const {
        switch (kind) {
            case Kind::Objects: return "objects";
            case Kind::AttributeCategory: return "attribute category #" + std::to_string(category);
            case Kind::Relationships: return "relationships";
        }
        return "?";
    }

    bool operator==(const VocabSlice&) const = default;
};

// A categorical distribution over one vocabulary slice, stored sparsely:
// an absent index carries probability zero. Producers that top-k truncate a
// model output must set the truncated flag and account for the clipped mass
// in other_mass so the total still reaches one.
class CategoricalDist {
public:
    using Entry = std::pair<std::uint32_t, double>;

    static constexpr double kSumTolerance = 1e-6;

    CategoricalDist() = default;

    CategoricalDist(VocabSlice slice, std::vector<Entry> entries,
                    bool truncated = false, double other_mass = 0.0)
        : slice_(slice), entries_(std::move(entries)),
          other_mass_(other_mass), truncated_(truncated) {
        std::sort(entries_.begin(), entries_.end(),
                  [](const Entry& a, const Entry& b) { return a.first < b.first; });
        validate();
    }

    static CategoricalDist one_hot(VocabSlice slice, std::uint32_t index) {
        return CategoricalDist(slice, {{index, 1.0}});
    }

    // Uniform mass over the given indices (used for multi-label oracle
    // annotations within one category).
    static CategoricalDist uniform(VocabSlice slice, const std::vector<std::uint32_t>& indices) {
        if (indices.empty()) throw DegenerateDistribution("uniform distribution over empty support");
        std::vector<Entry> entries;
        entries.reserve(indices.size());
        const double p = 1.0 / static_cast<double>(indices.size());
        for (auto i : indices) entries.emplace_back(i, p);
        return CategoricalDist(slice, std::move(entries));
    }

    const VocabSlice& slice() const { return slice_; }
    const std::vector<Entry>& entries() const { return entries_; }
    bool truncated() const { return truncated_; }
    double other_mass() const { return other_mass_; }
    bool empty() const { return entries_.empty(); }

    double prob_at(std::uint32_t index) const {
        auto it = std::lower_bound(entries_.begin(), entries_.end(), index,
                                   [](const Entry& e, std::uint32_t i) { return e.first < i; });
        if (it != entries_.end() && it->first == index) return it->second;
        return 0.0;
    }

    // Argmax over the stored entries; ties break to the lowest vocabulary
    // index (entries are kept index-sorted). Truncated residual mass is an
    // anonymous bucket and never wins.
    std::pair<std::uint32_t, double> argmax() const {
        if (entries_.empty()) throw DegenerateDistribution("argmax of empty distribution");
        const Entry* best = &entries_.front();
        for (const auto& e : entries_)
            if (e.second > best->second) best = &e;
        return {best->first, best->second};
    }

    void validate() const {
        double sum = other_mass_;
        if (other_mass_ < 0.0)
            throw DegenerateDistribution("negative residual mass");
        if (!truncated_ && other_mass_ != 0.0)
            throw DegenerateDistribution("residual mass without truncation flag");
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            const auto& [idx, p] = entries_[i];
            if (i > 0 && entries_[i - 1].first == idx)
                throw DegenerateDistribution("duplicate index in distribution");
            if (!(p >= 0.0))
                throw DegenerateDistribution("negative or NaN probability");
            sum += p;
        }
        if (std::abs(sum - 1.0) > kSumTolerance)
            throw DegenerateDistribution("probabilities sum to " + std::to_string(sum));
    }

    bool operator==(const CategoricalDist&) const = default;

private:
    VocabSlice slice_;
    std::vector<Entry> entries_;
    double other_mass_ = 0.0;
    bool truncated_ = false;
};

// Normalizes raw non-negative scores over a slice into a distribution.
// Proportions are preserved; zero scores are dropped from the support.
inline CategoricalDist normalize_dist(VocabSlice slice, std::span<const double> raw) {
    double sum = 0.0;
    for (double s : raw) {
        if (!(s >= 0.0))
            throw DegenerateDistribution("normalize_dist: negative or NaN score");
        sum += s;
    }
    if (sum <= 0.0)
        throw DegenerateDistribution("normalize_dist: all scores zero");
    std::vector<CategoricalDist::Entry> entries;
    for (std::uint32_t i = 0; i < raw.size(); ++i)
        if (raw[i] > 0.0) entries.emplace_back(i, raw[i] / sum);
    return CategoricalDist(slice, std::move(entries));
}

// Probability of a named class. Unknown names are an error, never a silent
// zero; an index that is merely absent from a sparse support is zero.
inline double class_prob(const CategoricalDist& dist, std::string_view name, const Vocabulary& vocab) {
    auto idx = dist.slice().index_of(vocab, name);
    if (!idx)
        throw UnknownVocabularyTerm("'" + std::string(name) + "' not in " + dist.slice().describe());
    return dist.prob_at(*idx);
}

// Name and probability of the most likely class.
inline std::pair<std::string, double> top_class(const CategoricalDist& dist, const Vocabulary& vocab) {
    auto [idx, p] = dist.argmax();
    return {dist.slice().name_of(vocab, idx), p};
}

} // namespace ath
