#pragma once

#include <string>
#include <vector>

#include "gpdm/committee.hpp"
#include "gpdm/dm.hpp"
#include "gpdm/gp.hpp"

namespace gpdm {

// How an episode's rewards are split across committee members: everyone in
// full, the member whose estimates led, proportional shares, or only the
// member native to the dialogue's domain.
enum class RewardStrategy { Naive, Winner, Scaled, Home };

const char* to_string(RewardStrategy s);
RewardStrategy reward_strategy_from_string(const std::string& s);  // NAIV/WINN/SCALE/MBCM

// Mean over variance (floored) per member for one turn's chosen action.
std::vector<double> member_ratios(const std::vector<QEstimate>& estimates);

struct TurnAttribution {
  std::vector<double> ratio;
  SummaryAction action;
};

struct EpisodeAttribution {
  std::vector<TurnAttribution> turns;
  std::vector<double> avg_ratio;  // zeros when no turn carried member estimates
};

EpisodeAttribution attribution_from_episode(const Episode& ep, std::size_t n_members);

// Per-member weights in [0, 1]. Naive: all ones. Winner: one for the top
// average ratio (ties to the lowest index). Scaled: ratios clamped at zero
// and normalized to sum one, uniform when nothing is positive. Home: one for
// home_member, which must be a valid index.
std::vector<double> distribute(RewardStrategy s, const EpisodeAttribution& attr, int home_member);
std::vector<double> distribute(RewardStrategy s, const EpisodeAttribution& attr,
                               const std::string& current_domain,
                               const PolicyCommittee& committee);

void apply_rewards(PolicyCommittee& committee, const std::vector<Point>& points,
                   const std::vector<double>& rewards, const std::vector<double>& weights);

// Committee seat in the dialogue loop: every turn stores each member's
// estimate for the chosen action, and each finished episode is fed back with
// strategy-distributed reward weights.
class CommitteeActor : public DialogueActor {
 public:
  CommitteeActor(PolicyCommittee& committee, RewardStrategy strategy)
      : committee_(&committee), strategy_(strategy) {}

  SummaryAction choose(const BeliefState& b, const std::shared_ptr<const FeatureVector>& features,
                       const std::vector<SummaryAction>& candidates, bool train,
                       std::mt19937_64& rng, TurnRecord& rec) override;
  void observe_episode(const Episode& ep) override;

  RewardStrategy strategy() const { return strategy_; }
  const EpisodeAttribution& last_attribution() const { return last_attribution_; }
  const std::vector<double>& last_weights() const { return last_weights_; }

 private:
  PolicyCommittee* committee_;
  RewardStrategy strategy_;
  EpisodeAttribution last_attribution_;
  std::vector<double> last_weights_;
};

}  // namespace gpdm
