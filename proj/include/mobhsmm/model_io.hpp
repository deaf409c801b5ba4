#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mobhsmm/hsmm.hpp"
#include "mobhsmm/mobtree.hpp"

namespace mobhsmm::io {

// Provenance block embedded in every artifact: re-running
// `mobhsmm <command> <flags...>` reproduces the file byte for byte.
struct ArtifactMeta {
    std::string command;
    std::vector<std::string> flags;
    std::uint64_t seed = 0;
};

std::string tree_to_text(const tree::MobTree& t, const ArtifactMeta& meta);
tree::MobTree tree_from_text(const std::string& text);
void save_tree(const std::string& path, const tree::MobTree& t, const ArtifactMeta& meta);
tree::MobTree load_tree(const std::string& path);

std::string hsmm_to_text(const hsmm::Hsmm& m, const ArtifactMeta& meta);
hsmm::Hsmm hsmm_from_text(const std::string& text);
void save_hsmm(const std::string& path, const hsmm::Hsmm& m, const ArtifactMeta& meta);
hsmm::Hsmm load_hsmm(const std::string& path);

} // namespace mobhsmm::io
