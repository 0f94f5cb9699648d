// Value of information: exact preposterior value of the observation, and
// Monte Carlo values of transferred models and of failure data gathered by
// letting one member run to failure.
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "riskdesk/decision.hpp"
#include "riskdesk/hierarchy.hpp"
#include "riskdesk/scenario.hpp"
#include "riskdesk/sim.hpp"

namespace riskdesk::voi {

using decision::Matrix;
using decision::Vector;

enum class VoiKind { kObservation, kTransfer, kFailureData };

std::string_view to_string(VoiKind kind);

struct VoiReport {
  VoiKind kind = VoiKind::kObservation;
  double value = 0.0;
  double baseline = 0.0;
  double informed = 0.0;
  std::size_t n = 0;
  double standard_error = 0.0;
  std::uint64_t seed = 0;
};

nlohmann::ordered_json to_json(const VoiReport& report);

/// Exact: sum over symbols of P(nu) MEU(nu), less the best action value
/// without the observation.
VoiReport voi_observation(const decision::DecisionModel& model);

/// Rowwise convex combination of same-shape CPTs, rows renormalized.
Matrix pool_cpts(const std::vector<Matrix>& members, const std::vector<double>& weights);

struct TransferProposal {
  std::string source;
  std::string target;
  std::string payload;
  std::vector<std::string> scope;
  std::string mechanism;
  hierarchy::SimilarityScore eligibility;
};

struct TransferResult {
  TransferProposal proposal;
  /// Target's believed tables after the transfer.
  scenario::ModelTables tables;
  std::shared_ptr<const decision::DecisionModel> informed;
};

/// Applies a transfer between two structures of a world. Fails with
/// kEligibility when the similarity gate rejects the pair.
TransferResult apply_transfer(const sim::World& world, const scenario::TransferSpec& spec);

/// Paired-seed Monte Carlo over `trials` fresh ground truths: each trial runs
/// the rolling loop on `structure` once per model.
VoiReport voi_transfer(std::shared_ptr<const decision::DecisionModel> baseline,
                       std::shared_ptr<const decision::DecisionModel> informed,
                       std::shared_ptr<const sim::World> truth, const std::string& structure,
                       std::size_t horizon, std::size_t trials, std::uint64_t seed);

/// Maintain-all MEU versus letting `member` run to failure under the idle
/// action, pooling its observed transitions into same-type survivors.
VoiReport voi_failure_data(std::shared_ptr<const sim::World> world,
                           const scenario::SacrificeSpec& spec, std::size_t horizon,
                           std::size_t trials, std::uint64_t seed);

/// Per-trial master seed.
std::uint64_t trial_seed(std::uint64_t seed, std::size_t trial);

}  // namespace riskdesk::voi
