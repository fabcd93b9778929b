#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "gpdm/acts.hpp"
#include "gpdm/ontology.hpp"

namespace gpdm {

// Per-slot dialogue-history states. Order is the distribution layout.
enum HistoryValue {
  kNothingSaid = 0,
  kUserInformed = 1,
  kSystemRequested = 2,
  kSystemConfirmed = 3,
};

// Goal distribution over the slot's declared values plus a trailing `none`
// entry, kept in declared value order; sorting happens at feature emission.
struct GoalNode {
  std::string slot;
  std::vector<double> dist;  // |V_s| + 1, none last
};

struct HistoryNode {
  std::string slot;
  std::array<double, 4> dist{};
};

// Goal and history nodes are stored in entropy order: the name slot first,
// then requestable slots by abstract rank. `requested` collects informable
// slots the user asked about (sorted, deduplicated).
struct BeliefState {
  std::string domain;
  std::vector<GoalNode> goals;
  std::vector<HistoryNode> histories;
  std::vector<std::string> requested;

  int node_index(const std::string& slot) const;  // -1 when absent
  const GoalNode& goal(const std::string& slot) const;
  const HistoryNode& history(const std::string& slot) const;
};

BeliefState init_belief(const DomainModel& model);

// Linear-mixture tracker. For each slot with observed inform mass lambda_s the
// goal becomes (1-lambda_s)*old + observation, renormalized. History nodes
// move deterministically: a user inform wins over the system's request or
// confirm/select of the same slot. Hypotheses naming unknown slots or values
// are rejected, not fatal; pass `rejected` to collect their descriptions.
BeliefState update_belief(const BeliefState& b, const NBestInput& obs,
                          const DialogueAct& last_system_act, const DomainModel& model,
                          std::vector<std::string>* rejected = nullptr);

// Value entries sorted descending, `none` mass appended last.
std::vector<double> sorted_goal_vector(const GoalNode& g);

struct NodeVec {
  std::string slot;
  int kind = 0;  // 0 goal, 1 history
  std::vector<double> values;
};

struct FeatureVector {
  std::string domain;
  std::vector<NodeVec> nodes;
};

// One vector per hidden node: sorted goal distributions and raw history
// distributions, emitted per slot in entropy order, goal before history.
FeatureVector feature_vector(const BeliefState& b);

std::shared_ptr<const FeatureVector> share_features(FeatureVector f);

}  // namespace gpdm
