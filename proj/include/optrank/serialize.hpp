#pragma once

#include <json.hpp>

#include "optrank/harness.hpp"
#include "optrank/model_zoo.hpp"
#include "optrank/rank_engine.hpp"
#include "optrank/trainer.hpp"

// JSON bindings for the spec/config types. Doubles round-trip exactly
// (nlohmann serializes shortest-representation doubles).

namespace optrank {

void to_json(nlohmann::json& j, const ModelFamily& fam);
void from_json(const nlohmann::json& j, ModelFamily& fam);

void to_json(nlohmann::json& j, const TargetSpec& t);
void from_json(const nlohmann::json& j, TargetSpec& t);

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

void to_json(nlohmann::json& j, const SweepSpec& spec);
void from_json(const nlohmann::json& j, SweepSpec& spec);

void to_json(nlohmann::json& j, const RankReport& rep);
void to_json(nlohmann::json& j, const TrainResult& res);

SweepSpec load_spec_file(const std::filesystem::path& path);

}  // namespace optrank
