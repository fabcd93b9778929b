#include "gpdm/simuser.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "gpdm/util.hpp"

namespace gpdm {

void ErrorModel::validate() const {
  if (error_rate < 0.0 || error_rate > 1.0)
    throw std::invalid_argument("error_rate must lie in [0, 1]");
  if (nbest_len < 1) throw std::invalid_argument("nbest_len must be at least 1");
  if (!(beta_a > 0.0) || !(beta_b > 0.0))
    throw std::invalid_argument("confidence shape parameters must be positive");
}

namespace {

// first k of a partial Fisher-Yates pass, distinct by construction
std::vector<std::size_t> pick_distinct(std::mt19937_64& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(bounded_uniform(rng, n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

const std::string* item_value(const DialogueAct& a, const std::string& key) {
  for (const auto& kv : a.items)
    if (kv.first == key) return &kv.second;
  return nullptr;
}

}  // namespace

UserGoal sample_goal(const DomainModel& model, std::mt19937_64& rng) {
  const auto& reqable = model.ordering.of_class(SlotClass::Requestable);
  const auto& informable = model.ordering.of_class(SlotClass::Informable);
  if (reqable.empty()) throw std::runtime_error("domain has no requestable slots to constrain");
  if (informable.empty()) throw std::runtime_error("domain has no informable slots to request");
  if (model.db.entities.empty()) throw std::runtime_error("domain database is empty");

  std::size_t nc = std::min<std::size_t>(1 + bounded_uniform(rng, 3), reqable.size());
  std::size_t nr = std::min<std::size_t>(1 + bounded_uniform(rng, 3), informable.size());
  const std::string& name_slot = model.ontology.name_slot().name;

  for (int attempt = 0; attempt < 100; ++attempt) {
    UserGoal g;
    for (std::size_t i : pick_distinct(rng, reqable.size(), nc)) {
      const std::string& slot = reqable[i].slot;
      const Entity& e =
          model.db.entities[bounded_uniform(rng, model.db.entities.size())];
      auto it = e.find(slot);
      std::string v = it != e.end() ? it->second : model.ontology.at(slot).values.front();
      g.constraints.emplace_back(slot, v);
    }
    for (const auto& e : model.db.entities) {
      bool ok = true;
      for (const auto& c : g.constraints) {
        auto it = e.find(c.first);
        if (it == e.end() || it->second != c.second) {
          ok = false;
          break;
        }
      }
      if (ok) g.target_names.push_back(e.at(name_slot));
    }
    if (g.target_names.empty()) continue;
    for (std::size_t i : pick_distinct(rng, informable.size(), nr))
      g.requests.push_back(informable[i].slot);
    return g;
  }
  throw std::runtime_error("could not sample a satisfiable goal for " + model.ontology.domain);
}

SimulatedUser::SimulatedUser(const DomainModel& model, UserGoal goal)
    : model_(&model), goal_(std::move(goal)) {
  ranked_constraints_ = goal_.constraints;
  std::sort(ranked_constraints_.begin(), ranked_constraints_.end(),
            [&](const auto& a, const auto& b) {
              return model.ordering.rank_of(SlotClass::Requestable, a.first) <
                     model.ordering.rank_of(SlotClass::Requestable, b.first);
            });
  request_order_ = goal_.requests;
  // the user volunteers only the top-ranked constraint; the rest must be
  // elicited by system requests (or surface through the one correction)
  if (!ranked_constraints_.empty()) {
    const auto& top = ranked_constraints_.front();
    push(DialogueAct{ActType::Inform, top.first, top.second, {}});
  }
  for (const auto& c : ranked_constraints_) informed_at_.emplace_back(c.first, -1);
}

void SimulatedUser::push(DialogueAct a) {
  for (const auto& q : agenda_)
    if (q == a) return;
  agenda_.push_back(std::move(a));
}

std::string SimulatedUser::goal_value(const std::string& slot) const {
  for (const auto& c : goal_.constraints)
    if (c.first == slot) return c.second;
  return "dontcare";
}

void SimulatedUser::push_inform(const std::string& slot) {
  push(DialogueAct{ActType::Inform, slot, goal_value(slot), {}});
}

void SimulatedUser::handle_offer(const DialogueAct& offer) {
  const std::string* nm = item_value(offer, model_->ontology.name_slot().name);
  if (!nm || nm->empty() || *nm == "none") return;  // nothing concrete on the table
  bool match = std::find(goal_.target_names.begin(), goal_.target_names.end(), *nm) !=
               goal_.target_names.end();
  if (match) {
    offered_ok_ = true;
    for (const auto& r : goal_.requests)
      if (item_value(offer, r)) answered_.insert(r);
    for (const auto& r : request_order_) {
      if (!answered_.count(r)) {
        push(DialogueAct{ActType::Request, r, "", {}});
        return;
      }
    }
    push(DialogueAct{ActType::Bye, "", "", {}});
    return;
  }
  // a re-offer of something already rejected gets no second reqalts; the
  // queued correction (or the fallback re-inform) must get a turn to surface
  if (*nm == last_rejected_) return;
  last_rejected_ = *nm;
  // at most one unsolicited correction per dialogue; beyond that the system
  // has to elicit the remaining constraints itself
  if (!corrected_) {
    for (const auto& c : ranked_constraints_) {
      if (c.second == "dontcare") continue;
      const std::string* v = item_value(offer, c.first);
      if (v && *v != c.second) {
        corrected_ = true;
        push(DialogueAct{ActType::Inform, c.first, c.second, {}});
        break;
      }
    }
  }
  push(DialogueAct{ActType::ReqAlts, "", "", {}});
}

void SimulatedUser::fallback() {
  if (offered_ok_) {
    for (const auto& r : request_order_) {
      if (!answered_.count(r)) {
        push(DialogueAct{ActType::Request, r, "", {}});
        return;
      }
    }
    push(DialogueAct{ActType::Bye, "", "", {}});
    return;
  }
  const std::string* slot = nullptr;
  long best = 0;
  for (const auto& [s, t] : informed_at_) {
    if (t < 0) continue;  // never volunteered; only restate what was said
    if (!slot || t < best) {
      slot = &s;
      best = t;
    }
  }
  if (slot) {
    push_inform(*slot);
    return;
  }
  push(DialogueAct{ActType::Bye, "", "", {}});
}

DialogueAct SimulatedUser::pop() {
  DialogueAct a = agenda_.back();
  agenda_.pop_back();
  if (a.type == ActType::Bye) done_ = true;
  if (a.type == ActType::Inform) {
    for (auto& [s, t] : informed_at_)
      if (s == a.slot) t = clock_;
  }
  return a;
}

DialogueAct SimulatedUser::respond(const DialogueAct& system, std::mt19937_64& rng) {
  (void)rng;  // replies are rule-driven; kept for interface stability
  ++clock_;
  if (done_) return DialogueAct{ActType::Bye, "", "", {}};
  switch (system.type) {
    case ActType::Request:
      if (!system.slot.empty()) push_inform(system.slot);
      break;
    case ActType::Confirm:
      if (goal_value(system.slot) == system.value) {
        push(DialogueAct{ActType::Affirm, "", "", {}});
      } else {
        push_inform(system.slot);
        push(DialogueAct{ActType::Negate, "", "", {}});
      }
      break;
    case ActType::Select:
      if (!system.slot.empty()) push_inform(system.slot);
      break;
    case ActType::Inform:
      handle_offer(system);
      break;
    default:
      break;  // hello / repeat / anything else falls through to the agenda
  }
  if (agenda_.empty()) fallback();
  return pop();
}

namespace {

DialogueAct confuse(const DialogueAct& truth, const DomainModel& model, std::mt19937_64& rng) {
  DialogueAct out = truth;
  switch (truth.type) {
    case ActType::Inform: {
      const SlotSpec* sp = model.ontology.find(truth.slot);
      if (!sp || sp->values.empty()) return out;
      const auto& vals = sp->values;
      if (truth.value == "dontcare") {
        out.value = vals[bounded_uniform(rng, vals.size())];
        return out;
      }
      if (vals.size() < 2) return out;
      std::size_t pos = vals.size();
      for (std::size_t i = 0; i < vals.size(); ++i)
        if (vals[i] == truth.value) {
          pos = i;
          break;
        }
      if (pos == vals.size()) {
        out.value = vals[bounded_uniform(rng, vals.size())];
      } else {
        std::size_t k = bounded_uniform(rng, vals.size() - 1);
        out.value = vals[k >= pos ? k + 1 : k];
      }
      return out;
    }
    case ActType::Request: {
      const auto& informable = model.ordering.of_class(SlotClass::Informable);
      std::vector<const std::string*> others;
      for (const auto& r : informable)
        if (r.slot != truth.slot) others.push_back(&r.slot);
      if (others.empty()) return out;
      out.slot = *others[bounded_uniform(rng, others.size())];
      return out;
    }
    case ActType::Affirm:
      out.type = ActType::Negate;
      return out;
    case ActType::Negate:
      out.type = ActType::Affirm;
      return out;
    default:
      return out;
  }
}

}  // namespace

NBestInput corrupt_act(const DialogueAct& truth, const DomainModel& model, const ErrorModel& em,
                       std::mt19937_64& rng) {
  DialogueAct head = truth;
  if (uniform01(rng) < em.error_rate) head = confuse(truth, model, rng);
  double c1 = beta_sample(rng, em.beta_a, em.beta_b);
  NBestInput nb;
  nb.hypotheses.push_back({head, c1});
  int alts = em.nbest_len - 1;
  if (alts > 0) {
    double share = (1.0 - c1) / 2.0 / alts;
    std::vector<DialogueAct> used{head};
    int made = 0;
    for (int guard = 0; made < alts && guard < alts * 8; ++guard) {
      DialogueAct alt = confuse(truth, model, rng);
      bool dup = false;
      for (const auto& u : used)
        if (u == alt) {
          dup = true;
          break;
        }
      if (dup) continue;
      used.push_back(alt);
      nb.hypotheses.push_back({std::move(alt), share});
      ++made;
    }
  }
  return nb;
}

EpisodeScore score_episode(const std::vector<DialogueAct>& system_acts, const UserGoal& goal,
                           const DomainModel& model, const RewardConfig& cfg) {
  const std::string& name_slot = model.ontology.name_slot().name;
  std::map<std::string, std::set<std::string>> provided;
  for (const auto& a : system_acts) {
    if (a.type != ActType::Inform) continue;
    const std::string* nm = item_value(a, name_slot);
    if (!nm || nm->empty() || *nm == "none") continue;
    auto& given = provided[*nm];
    for (const auto& kv : a.items) {
      const SlotSpec* sp = model.ontology.find(kv.first);
      if (sp && sp->cls == SlotClass::Informable) given.insert(kv.first);
    }
  }
  bool success = false;
  for (const auto& [nm, given] : provided) {
    const Entity* ent = nullptr;
    for (const auto& e : model.db.entities) {
      auto it = e.find(name_slot);
      if (it != e.end() && it->second == nm) {
        ent = &e;
        break;
      }
    }
    if (!ent) continue;
    bool ok = true;
    for (const auto& c : goal.constraints) {
      if (c.second == "dontcare") continue;
      auto it = ent->find(c.first);
      if (it == ent->end() || it->second != c.second) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    for (const auto& r : goal.requests) {
      if (!given.count(r)) {
        ok = false;
        break;
      }
    }
    if (ok) {
      success = true;
      break;
    }
  }
  double ret = cfg.turn_penalty * static_cast<double>(system_acts.size()) +
               (success ? cfg.success_bonus : 0.0);
  return EpisodeScore{success, ret};
}

}  // namespace gpdm
