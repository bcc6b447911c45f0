#include "psycontour/registry.hpp"

#include <fstream>
#include <json.hpp>
#include <unordered_set>

#include "psycontour/error.hpp"
#include "psycontour/features.hpp"
#include "psycontour/hash.hpp"
#include "psycontour/readability.hpp"
#include "psycontour/resources.hpp"
#include "psycontour/text.hpp"

namespace psycontour {

std::string_view group_name(FeatureGroup g) {
    switch (g) {
        case FeatureGroup::MorphSyn: return "morphsyn";
        case FeatureGroup::Lexical: return "lexical";
        case FeatureGroup::Readability: return "readability";
        case FeatureGroup::SentiEmo: return "sentiemo";
    }
    return "?";
}

std::optional<FeatureGroup> parse_group(std::string_view name) {
    for (auto g : kAllGroups) {
        if (group_name(g) == name) return g;
    }
    return std::nullopt;
}

RegistryConfig RegistryConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open registry config: " + path.string());
    RegistryConfig cfg;
    std::string section;
    std::string line;
    std::size_t n = 0;
    const auto fail = [&](const std::string& msg) {
        return DataError(path.string() + ":" + std::to_string(n) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++n;
        auto t = trim(line);
        if (t.empty() || t.front() == '#' || t.front() == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw fail("unterminated section header");
            section = std::string(trim(t.substr(1, t.size() - 2)));
            if (section != "groups" && section != "disable" && section != "bindings") {
                throw fail("unknown section [" + section + "]");
            }
            continue;
        }
        if (section == "disable") {
            cfg.disabled.emplace_back(t);
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string_view::npos || section.empty()) throw fail("expected key = value");
        const std::string key(trim(t.substr(0, eq)));
        const std::string value(trim(t.substr(eq + 1)));
        if (section == "groups") {
            const auto g = parse_group(key);
            if (!g) throw fail("unknown feature group '" + key + "'");
            const auto v = to_lower(value);
            if (v == "off" || v == "false" || v == "0" || v == "no") {
                cfg.disabled_groups.insert(*g);
            } else if (v == "on" || v == "true" || v == "1" || v == "yes") {
                cfg.disabled_groups.erase(*g);
            } else {
                throw fail("expected on/off for group '" + key + "'");
            }
        } else {
            if (key == "dale_chall") {
                cfg.dale_chall_list = value;
            } else if (key == "spache") {
                cfg.spache_list = value;
            } else {
                throw fail("unknown binding '" + key + "'");
            }
        }
    }
    return cfg;
}

bool RegistryConfig::enabled(const FeatureInfo& f) const {
    if (disabled_groups.count(f.group)) return false;
    for (const auto& pattern : disabled) {
        if (!pattern.empty() && pattern.back() == '*') {
            if (f.name.compare(0, pattern.size() - 1, pattern, 0, pattern.size() - 1) == 0) return false;
        } else if (f.name == pattern) {
            return false;
        }
    }
    return true;
}

std::vector<FeatureInfo> feature_catalog(const ResourceStore& store) {
    std::vector<FeatureInfo> out;
    const auto add = [&out](FeatureGroup g, std::string name) {
        out.push_back({std::string(group_name(g)) + "." + name, g});
    };
    for (auto n : morphsyn_names()) add(FeatureGroup::MorphSyn, std::string(n));
    for (auto n : lexical_builtin_names()) add(FeatureGroup::Lexical, std::string(n));
    for (const auto& w : store.wordlists()) add(FeatureGroup::Lexical, "wordlist." + w.name());
    for (const auto& nt : store.norms()) {
        add(FeatureGroup::Lexical, "norm." + nt.name() + ".mean");
        add(FeatureGroup::Lexical, "norm." + nt.name() + ".coverage");
    }
    for (const auto& ft : store.freq_tables()) {
        const std::string stem = register_name(ft.reg()) + "." + std::to_string(ft.n()) + "gram.";
        add(FeatureGroup::Lexical, stem + "mean_log10freq");
        add(FeatureGroup::Lexical, stem + "attested");
    }
    for (auto n : readability_names()) add(FeatureGroup::Readability, std::string(n));
    for (const auto& lex : store.lexicons()) {
        for (const auto& sub : lex.subcategories()) add(FeatureGroup::SentiEmo, lex.name() + "." + sub);
        add(FeatureGroup::SentiEmo, lex.name() + ".coverage");
    }
    return out;
}

FeatureRegistry::FeatureRegistry(std::vector<FeatureInfo> features, std::vector<std::size_t> catalog_slots)
    : features_(std::move(features)), slots_(std::move(catalog_slots)) {
    if (!slots_.empty() && slots_.size() != features_.size()) {
        throw UsageError("registry slot count does not match feature count");
    }
    std::unordered_set<std::string> seen;
    for (const auto& f : features_) {
        if (!seen.insert(f.name).second) throw DataError("duplicate feature name '" + f.name + "'");
    }
}

std::optional<std::size_t> FeatureRegistry::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < features_.size(); ++i) {
        if (features_[i].name == name) return i;
    }
    return std::nullopt;
}

std::vector<std::size_t> FeatureRegistry::columns(FeatureGroup g) const {
    std::vector<std::size_t> cols;
    for (std::size_t i = 0; i < features_.size(); ++i) {
        if (features_[i].group == g) cols.push_back(i);
    }
    return cols;
}

std::array<std::size_t, kGroupCount> FeatureRegistry::group_counts() const {
    std::array<std::size_t, kGroupCount> counts{};
    for (const auto& f : features_) ++counts[static_cast<std::size_t>(f.group)];
    return counts;
}

std::string FeatureRegistry::hash() const {
    std::uint64_t h = fnv1a("psycontour-registry-v1\n");
    for (const auto& f : features_) {
        h = fnv1a(f.name, h);
        h = fnv1a("\t", h);
        h = fnv1a(group_name(f.group), h);
        h = fnv1a("\n", h);
    }
    return hex64(h);
}

std::string FeatureRegistry::to_json() const {
    nlohmann::ordered_json j;
    j["format"] = "psycontour-registry";
    j["version"] = 1;
    j["hash"] = hash();
    j["dimension"] = dimension();
    const auto counts = group_counts();
    for (auto g : kAllGroups) {
        const auto i = static_cast<std::size_t>(g);
        j["group_counts"][std::string(group_name(g))] = counts[i];
        j["reference_group_sizes"][std::string(group_name(g))] = kReferenceGroupSizes[i];
    }
    auto& arr = j["features"] = nlohmann::ordered_json::array();
    for (const auto& f : features_) arr.push_back({{"name", f.name}, {"group", std::string(group_name(f.group))}});
    return j.dump(2);
}

FeatureRegistry FeatureRegistry::from_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("registry sidecar is not valid JSON: ") + e.what());
    }
    if (!j.contains("features") || !j["features"].is_array()) throw DataError("registry sidecar lacks 'features'");
    std::vector<FeatureInfo> features;
    for (const auto& f : j["features"]) {
        const auto g = parse_group(f.at("group").get<std::string>());
        if (!g) throw DataError("registry sidecar has unknown group '" + f.at("group").get<std::string>() + "'");
        features.push_back({f.at("name").get<std::string>(), *g});
    }
    FeatureRegistry reg(std::move(features));
    if (j.contains("hash") && j["hash"].get<std::string>() != reg.hash()) {
        throw DataError("registry sidecar hash does not match its feature list");
    }
    return reg;
}

FeatureRegistry build_registry(const ResourceStore& store, const RegistryConfig& config) {
    const auto catalog = feature_catalog(store);
    std::vector<FeatureInfo> features;
    std::vector<std::size_t> slots;
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        if (config.enabled(catalog[i])) {
            features.push_back(catalog[i]);
            slots.push_back(i);
        }
    }
    if (features.empty()) throw UsageError("registry configuration disables every feature");
    return FeatureRegistry(std::move(features), std::move(slots));
}

}  // namespace psycontour
