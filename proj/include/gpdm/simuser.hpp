#pragma once

#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "gpdm/acts.hpp"
#include "gpdm/ontology.hpp"

namespace gpdm {

struct RewardConfig {
  double turn_penalty = -1.0;
  double success_bonus = 20.0;
};

struct ErrorModel {
  double error_rate = 0.15;  // chance the top hypothesis is a confusion
  int nbest_len = 3;
  double beta_a = 6.0;  // confidence shape of the top hypothesis
  double beta_b = 2.0;

  void validate() const;
};

struct UserGoal {
  std::vector<std::pair<std::string, std::string>> constraints;  // slot, value
  std::vector<std::string> requests;
  std::vector<std::string> target_names;  // entities satisfying the constraints
};

// Draws a satisfiable goal: constraint slots are distinct requestables with
// values taken from uniformly drawn entities (so frequent values are likelier),
// requests are distinct informables. Throws if no satisfiable combination is
// found within the resample budget.
UserGoal sample_goal(const DomainModel& model, std::mt19937_64& rng);

// Agenda-driven user. One user act per system act; finished() turns true once
// it has said bye.
class SimulatedUser {
 public:
  SimulatedUser(const DomainModel& model, UserGoal goal);

  const UserGoal& goal() const { return goal_; }
  bool finished() const { return done_; }
  DialogueAct respond(const DialogueAct& system, std::mt19937_64& rng);

 private:
  void push(DialogueAct a);  // skips exact duplicates already queued
  void push_inform(const std::string& slot);
  std::string goal_value(const std::string& slot) const;  // "dontcare" when unconstrained
  void handle_offer(const DialogueAct& offer);
  void fallback();
  DialogueAct pop();

  const DomainModel* model_;
  UserGoal goal_;
  std::vector<std::pair<std::string, std::string>> ranked_constraints_;
  std::vector<std::string> request_order_;
  std::vector<DialogueAct> agenda_;  // back is the top
  std::set<std::string> answered_;
  std::vector<std::pair<std::string, long>> informed_at_;  // constraint slot, last turn
  long clock_ = 0;
  bool offered_ok_ = false;
  bool done_ = false;
  bool corrected_ = false;     // one unsolicited constraint correction per dialogue
  std::string last_rejected_;  // entity name already answered with reqalts
};

// Simulated speech understanding: the true act survives with probability
// 1 - error_rate, otherwise a confusion heads the list. Alternates are
// distinct confusions sharing half the leftover mass; the rest is unassigned.
NBestInput corrupt_act(const DialogueAct& truth, const DomainModel& model, const ErrorModel& em,
                       std::mt19937_64& rng);

struct EpisodeScore {
  bool success = false;
  double ret = 0.0;
};

// Objective check against the true goal: some offered entity must satisfy all
// constraints and every requested slot must have been given for that entity.
EpisodeScore score_episode(const std::vector<DialogueAct>& system_acts, const UserGoal& goal,
                           const DomainModel& model, const RewardConfig& cfg);

}  // namespace gpdm
