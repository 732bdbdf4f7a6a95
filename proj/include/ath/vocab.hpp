#pragma once

#include "ath/errors.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ath {

// The closed name inventory all distributions index into: object classes,
// attribute names grouped into categories, and relationship names. Sizes are
// configuration, not constants (a GQA-scale vocabulary has 1702 objects,
// 617 attributes in 39 categories and 310 relationships, 13 of them spatial).
// Immutable after construction.
class Vocabulary {
public:
    struct AttributeCategory {
        std::string name;
        std::vector<std::string> members;
        bool operator==(const AttributeCategory&) const = default;
    };

    Vocabulary() = default;

    Vocabulary(std::vector<std::string> object_names,
               std::vector<AttributeCategory> attribute_categories,
               std::vector<std::string> relationship_names,
               std::vector<bool> spatial_flags = {})
        : objects_(std::move(object_names)),
          categories_(std::move(attribute_categories)),
          relationships_(std::move(relationship_names)),
          spatial_(std::move(spatial_flags)) {
        if (spatial_.empty())
            spatial_.assign(relationships_.size(), false);
        if (spatial_.size() != relationships_.size())
            throw Error("vocabulary: spatial flag count does not match relationship count");
        build_indexes();
    }

    const std::vector<std::string>& object_names() const { return objects_; }
    const std::vector<AttributeCategory>& attribute_categories() const { return categories_; }
    const std::vector<std::string>& relationship_names() const { return relationships_; }

    std::size_t object_count() const { return objects_.size(); }
    std::size_t category_count() const { return categories_.size(); }
    std::size_t relationship_count() const { return relationships_.size(); }

    std::size_t attribute_count() const {
        std::size_t n = 0;
        for (const auto& c : categories_) n += c.members.size();
        return n;
    }

    std::optional<std::uint32_t> object_index(std::string_view name) const {
        return find(object_by_name_, name);
    }
    std::optional<std::uint32_t> relationship_index(std::string_view name) const {
        return find(relationship_by_name_, name);
    }
    std::optional<std::uint32_t> category_index(std::string_view name) const {
        return find(category_by_name_, name);
    }

    const std::string& object_name(std::uint32_t i) const { return objects_.at(i); }
    const std::string& relationship_name(std::uint32_t i) const { return relationships_.at(i); }
    const AttributeCategory& category(std::uint32_t i) const { return categories_.at(i); }

    bool spatial(std::uint32_t relationship_index) const { return spatial_.at(relationship_index); }

    // Member index of `name` within category `cat`.
    std::optional<std::uint32_t> member_index(std::uint32_t cat, std::string_view name) const {
        const auto& members = categories_.at(cat).members;
        for (std::uint32_t i = 0; i < members.size(); ++i)
            if (members[i] == name) return i;
        return std::nullopt;
    }

    // (category index, member index) of an attribute name. Categories
    // partition the attribute names, so the home is unique when it exists.
    std::optional<std::pair<std::uint32_t, std::uint32_t>> attribute_home(std::string_view name) const {
        auto it = attribute_home_.find(std::string(name));
        if (it == attribute_home_.end()) return std::nullopt;
        return it->second;
    }

    bool operator==(const Vocabulary& o) const {
        return objects_ == o.objects_ && categories_ == o.categories_ &&
               relationships_ == o.relationships_ && spatial_ == o.spatial_;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["schema_version"] = 1;
        j["objects"] = objects_;
        auto cats = nlohmann::ordered_json::array();
        for (const auto& c : categories_)
            cats.push_back({{"name", c.name}, {"members", c.members}});
        j["attribute_categories"] = std::move(cats);
        auto rels = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < relationships_.size(); ++i)
            rels.push_back({{"name", relationships_[i]}, {"spatial", static_cast<bool>(spatial_[i])}});
        j["relationships"] = std::move(rels);
        return j;
    }

    static Vocabulary from_json(const nlohmann::json& j) {
        try {
            std::vector<std::string> objects = j.at("objects").get<std::vector<std::string>>();
            std::vector<AttributeCategory> cats;
            for (const auto& c : j.at("attribute_categories"))
                cats.push_back({c.at("name").get<std::string>(),
                                c.at("members").get<std::vector<std::string>>()});
            std::vector<std::string> rels;
            std::vector<bool> spatial;
            for (const auto& r : j.at("relationships")) {
                rels.push_back(r.at("name").get<std::string>());
                spatial.push_back(r.value("spatial", false));
            }
            return Vocabulary(std::move(objects), std::move(cats), std::move(rels), std::move(spatial));
        } catch (const nlohmann::json::exception& e) {
            throw IngestError(std::string("vocabulary: malformed json: ") + e.what());
        } catch (const Error& e) {
            throw IngestError(std::string("vocabulary: ") + e.what());
        }
    }

    static Vocabulary load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IngestError("vocabulary: cannot open " + path.string());
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw IngestError("vocabulary: " + path.string() + ": " + e.what());
        }
        return from_json(j);
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path);
        if (!out) throw IngestError("vocabulary: cannot write " + path.string());
        out << to_json().dump(2) << '\n';
    }

private:
    using NameMap = std::unordered_map<std::string, std::uint32_t>;

    static std::optional<std::uint32_t> find(const NameMap& m, std::string_view name) {
        auto it = m.find(std::string(name));
        if (it == m.end()) return std::nullopt;
        return it->second;
    }

    void build_indexes() {
        auto index_unique = [](const std::vector<std::string>& names, NameMap& out, const char* what) {
            for (std::uint32_t i = 0; i < names.size(); ++i)
                if (!out.emplace(names[i], i).second)
                    throw Error(std::string("vocabulary: duplicate ") + what + " name: " + names[i]);
        };
        index_unique(objects_, object_by_name_, "object");
        index_unique(relationships_, relationship_by_name_, "relationship");
        for (std::uint32_t c = 0; c < categories_.size(); ++c) {
            if (!category_by_name_.emplace(categories_[c].name, c).second)
                throw Error("vocabulary: duplicate attribute category: " + categories_[c].name);
            for (std::uint32_t m = 0; m < categories_[c].members.size(); ++m) {
                auto [it, inserted] = attribute_home_.emplace(categories_[c].members[m], std::make_pair(c, m));
                if (!inserted)
                    throw Error("vocabulary: attribute in more than one category: " +
                                categories_[c].members[m]);
            }
        }
    }

    std::vector<std::string> objects_;
    std::vector<AttributeCategory> categories_;
    std::vector<std::string> relationships_;
    std::vector<bool> spatial_;

    NameMap object_by_name_;
    NameMap relationship_by_name_;
    NameMap category_by_name_;
    std::unordered_map<std::string, std::pair<std::uint32_t, std::uint32_t>> attribute_home_;
};

} // namespace ath
