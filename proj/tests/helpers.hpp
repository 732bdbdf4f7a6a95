#pragma once

#include "ath/dist.hpp"
#include "ath/registry.hpp"
#include "ath/scene_graph.hpp"
#include "ath/tokenize.hpp"
#include "ath/vocab.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace test {

inline ath::Vocabulary make_vocab() {
    return ath::Vocabulary(
        {"cup", "table", "chair", "dog", "cat", "plate", "lamp", "book"},
        {{"color", {"red", "blue", "green", "white"}},
         {"material", {"wood", "metal", "glass"}},
         {"size", {"small", "large"}}},
        {"on", "under", "holding", "near"},
        {true, true, false, true});
}

inline ath::ClassInventory make_inventory() {
    return ath::ClassInventory(20, {",", "_", "|", "not(", ")", "s", "o", "?"},
                               {"name", "color", "material", "size"});
}

// Unique scratch directory under the current working directory.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::current_path() / ("scratch_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// One-hot helper over the object slice.
inline ath::CategoricalDist object_one_hot(const ath::Vocabulary& vocab, const std::string& name) {
    return ath::CategoricalDist::one_hot(ath::VocabSlice::objects(), *vocab.object_index(name));
}

} // namespace test
