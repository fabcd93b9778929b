#pragma once

#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gpdm/acts.hpp"
#include "gpdm/belief.hpp"
#include "gpdm/gp.hpp"
#include "gpdm/ontology.hpp"
#include "gpdm/simuser.hpp"

namespace gpdm {

struct DMConfig {
  int max_turns = 30;
  double confirm_threshold = 0.3;  // top goal mass needed to offer a confirm
  double select_threshold = 0.15;  // both of the top two need this much for a select
  RewardConfig reward;
  bool record_transcript = false;
};

// Masked summary-action menu: per requestable slot in entropy-rank order,
// request always, confirm/select only when the goal mass clears the
// thresholds; the slot-independent actions close the list.
std::vector<SummaryAction> candidate_actions(const BeliefState& b, const DomainModel& model,
                                             const DMConfig& cfg);

// Rule-based realization. Confirm/select take the top (top-two) non-none
// goal values; inform offers the database entity matching the most top-value
// constraints (ties by name), bundling requested informable values into the
// act. An empty database degrades to a name=none offer.
DialogueAct summary_to_master(const SummaryAction& a, const BeliefState& b,
                              const DomainModel& model);

struct TurnRecord {
  std::shared_ptr<const FeatureVector> features;
  SummaryAction action;
  double reward = 0.0;
  QEstimate chosen;
  std::vector<QEstimate> member_estimates;  // filled by committee actors only
};

struct TranscriptTurn {
  DialogueAct user_true;
  NBestInput nbest;
  DialogueAct system;
};

struct Episode {
  std::string domain;
  std::vector<TurnRecord> turns;
  bool success = false;
  double ret = 0.0;  // always equals the sum of per-turn rewards
  std::vector<TranscriptTurn> transcript;  // only when the config asks for it
};

// Pluggable policy seat in the dialogue loop. choose must return one of the
// candidates; realize defaults to the rule mapping above.
class DialogueActor {
 public:
  virtual ~DialogueActor() = default;
  virtual SummaryAction choose(const BeliefState& b,
                               const std::shared_ptr<const FeatureVector>& features,
                               const std::vector<SummaryAction>& candidates, bool train,
                               std::mt19937_64& rng, TurnRecord& rec) = 0;
  virtual DialogueAct realize(const SummaryAction& a, const BeliefState& b,
                              const DomainModel& model);
  virtual void begin_dialogue(const UserGoal& goal, const DomainModel& model);
  virtual void observe_episode(const Episode& ep);
};

// Single estimator: Thompson sampling in training, greedy otherwise, and
// each finished episode is ingested as one trace.
class GPActor : public DialogueActor {
 public:
  explicit GPActor(GPPolicy& policy) : policy_(&policy) {}

  SummaryAction choose(const BeliefState& b, const std::shared_ptr<const FeatureVector>& features,
                       const std::vector<SummaryAction>& candidates, bool train,
                       std::mt19937_64& rng, TurnRecord& rec) override;
  void observe_episode(const Episode& ep) override;

 private:
  GPPolicy* policy_;
};

// Reads the sampled goal and offers a matching entity outright; pins down
// what the environment lets a perfect policy achieve.
class OracleActor : public DialogueActor {
 public:
  SummaryAction choose(const BeliefState& b, const std::shared_ptr<const FeatureVector>& features,
                       const std::vector<SummaryAction>& candidates, bool train,
                       std::mt19937_64& rng, TurnRecord& rec) override;
  DialogueAct realize(const SummaryAction& a, const BeliefState& b,
                      const DomainModel& model) override;
  void begin_dialogue(const UserGoal& goal, const DomainModel& model) override;

 private:
  UserGoal goal_;
};

// Shared empty feature vector used as the absorbing end point of every
// training trace; its zero self-kernel pins the posterior there to the prior.
std::shared_ptr<const FeatureVector> terminal_features(const std::string& domain);

// Episode as a GP trace: one point per turn plus the terminal anchor, one
// reward per transition. Requires a non-empty episode.
std::pair<std::vector<Point>, std::vector<double>> episode_trace(const Episode& ep);

// One full dialogue. The user opens (responding to an implicit hello); a user
// bye ends the dialogue before the system acts, a system bye or the turn cap
// ends it after. Success and return come from the objective transcript check.
Episode run_dialogue(DialogueActor& actor, SimulatedUser& user, const DomainModel& model,
                     const DMConfig& cfg, const ErrorModel& em, std::mt19937_64& rng, bool train);

}  // namespace gpdm
