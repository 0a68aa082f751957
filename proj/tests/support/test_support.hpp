#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "recagent/catalog.hpp"
#include "recagent/llm.hpp"
#include "recagent/planner.hpp"
#include "recagent/recmodels.hpp"
#include "recagent/turn.hpp"

namespace recagent::testing {

std::filesystem::path fixtures_dir();
std::filesystem::path golden_dir();
std::string read_file(const std::filesystem::path& path);

/// The 20-item games catalog, loaded once.
std::shared_ptr<const Catalog> games_toy();
std::shared_ptr<const SimilarityModel> games_toy_model();
ItemId id_of(std::string_view title);

/// Seed demonstrations shipped in data/seed_demos.jsonl.
std::shared_ptr<const DemoStore> seed_demos();

std::shared_ptr<ScriptedProvider> script(std::vector<std::pair<std::string, std::string>> entries);

/// Agent deps over games-toy with the given providers.
std::shared_ptr<AgentDeps> toy_deps(std::shared_ptr<ChatProvider> actor,
                                    std::shared_ptr<ChatProvider> critic,
                                    std::shared_ptr<ChatProvider> profile = nullptr,
                                    AgentConfig config = {});

/// Items "Item 0".."Item n-1" with popularity-driving interactions:
/// item i gets popularity[i] training interactions from distinct users.
Catalog synthetic_catalog(std::size_t n, const std::vector<std::size_t>& popularity = {},
                          const std::vector<std::string>& tags = {});

}  // namespace recagent::testing
