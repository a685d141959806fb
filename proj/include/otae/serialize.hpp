#pragma once

// JSON forms of the configs, weights, checkpoints and reports.

#include <json.hpp>

#include "otae/data.hpp"
#include "otae/eval.hpp"
#include "otae/model.hpp"
#include "otae/weighting.hpp"

namespace otae::serialize {

using nlohmann::json;

inline constexpr const char* kReportSchema = "otae.report/1";

json to_json(const data::SyntheticConfig& c);
json to_json(const data::NormalizationStats& s);
data::NormalizationStats normalization_from_json(const json& j);

json to_json(const nn::MlpParams& p);
nn::MlpParams mlp_from_json(const json& j);

json to_json(const weighting::EstimatorConfig& e);
weighting::EstimatorConfig estimator_from_json(const json& j);
/// Subject map {id: {alpha, lambda}} plus lambda_g, mode, beta and provenance.
json to_json(const weighting::SubjectWeights& w);
weighting::SubjectWeights weights_from_json(const json& j);

json to_json(const model::TrainConfig& c);
model::TrainConfig train_config_from_json(const json& j);
json to_json(const model::CompositeLossBreakdown& b, const std::vector<std::string>& subjects);
json history_to_json(const model::TrainResult& r);

json checkpoint_to_json(const model::Checkpoint& c);
model::Checkpoint checkpoint_from_json(const json& j);

json to_json(const eval::SeparationReport& r);
json to_json(const eval::FoldResult& f);
json to_json(const eval::EvalConfig& c);
json to_json(const eval::SplitComparison& s);
json to_json(const eval::ModeSummary& s);
json loso_report(const eval::EvalConfig& cfg, const std::vector<eval::FoldResult>& folds);
json comparison_report(const eval::ComparisonReport& r);

/// Recursively drops every "wall_seconds" key (the only nondeterministic fields).
json strip_timings(json j);

}  // namespace otae::serialize
