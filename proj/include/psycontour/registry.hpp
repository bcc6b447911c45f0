#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace psycontour {

class ResourceStore;

enum class FeatureGroup : std::size_t { MorphSyn = 0, Lexical = 1, Readability = 2, SentiEmo = 3 };
inline constexpr std::size_t kGroupCount = 4;
inline constexpr std::array<FeatureGroup, kGroupCount> kAllGroups = {
    FeatureGroup::MorphSyn, FeatureGroup::Lexical, FeatureGroup::Readability, FeatureGroup::SentiEmo};
// Group sizes of the original inventory, reported next to the actual counts.
inline constexpr std::array<std::size_t, kGroupCount> kReferenceGroupSizes = {19, 77, 14, 326};

std::string_view group_name(FeatureGroup g);
std::optional<FeatureGroup> parse_group(std::string_view name);

struct FeatureInfo {
    std::string name;
    FeatureGroup group = FeatureGroup::MorphSyn;
    bool operator==(const FeatureInfo&) const = default;
};

// INI-style registry configuration:
//
//   [groups]
//   readability = off
//   [disable]
//   morphsyn.deflate_morph
//   sentiemo.nrc.*
//   [bindings]
//   dale_chall = my_dale_chall_wordlist
//   spache = my_spache_wordlist
struct RegistryConfig {
    std::set<FeatureGroup> disabled_groups;
    std::vector<std::string> disabled;  // exact names, or prefixes ending in '*'
    std::string dale_chall_list = "dale_chall";
    std::string spache_list = "spache";

    static RegistryConfig from_file(const std::filesystem::path& path);
    bool enabled(const FeatureInfo& f) const;
};

// Every feature the extractor can produce for a store, in canonical column order.
std::vector<FeatureInfo> feature_catalog(const ResourceStore& store);

// Ordered (name, group) list defining the contour column layout.
class FeatureRegistry {
public:
    FeatureRegistry() = default;
    explicit FeatureRegistry(std::vector<FeatureInfo> features, std::vector<std::size_t> catalog_slots = {});

    std::size_t dimension() const { return features_.size(); }
    const std::vector<FeatureInfo>& features() const { return features_; }
    const FeatureInfo& operator[](std::size_t i) const { return features_[i]; }
    std::optional<std::size_t> index_of(std::string_view name) const;
    std::vector<std::size_t> columns(FeatureGroup g) const;
    std::array<std::size_t, kGroupCount> group_counts() const;

    // Positions of the registry's features inside feature_catalog(); empty when the
    // registry was loaded from a sidecar without the store.
    const std::vector<std::size_t>& catalog_slots() const { return slots_; }

    // Fingerprint of the ordered names and groups.
    std::string hash() const;

    std::string to_json() const;
    static FeatureRegistry from_json(std::string_view text);

private:
    std::vector<FeatureInfo> features_;
    std::vector<std::size_t> slots_;
};

FeatureRegistry build_registry(const ResourceStore& store, const RegistryConfig& config = {});

}  // namespace psycontour
