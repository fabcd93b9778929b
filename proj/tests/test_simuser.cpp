#include <doctest.h>

#include <map>
#include <random>
#include <set>

#include "gpdm/domains.hpp"
#include "gpdm/simuser.hpp"

using namespace gpdm;

namespace {

const DomainModel& model(const std::string& name) {
  static std::map<std::string, DomainModel> cache;
  auto it = cache.find(name);
  if (it == cache.end()) it = cache.emplace(name, builtin_domain_model(name)).first;
  return it->second;
}

const DialogueAct kHello{ActType::Hello, "", "", {}};

// the full entity as an offer act, the way the dialogue manager would send it
DialogueAct offer_entity(const DomainModel& m, const std::string& name) {
  const std::string& name_slot = m.ontology.name_slot().name;
  for (const auto& e : m.db.entities) {
    auto it = e.find(name_slot);
    if (it == e.end() || it->second != name) continue;
    DialogueAct a{ActType::Inform, "", "", {}};
    for (const auto& kv : e) a.items.emplace_back(kv.first, kv.second);
    return a;
  }
  throw std::runtime_error("no such entity: " + name);
}

}  // namespace

TEST_CASE("error model validation") {
  CHECK_THROWS(ErrorModel{-0.1, 3, 6.0, 2.0}.validate());
  CHECK_THROWS(ErrorModel{1.1, 3, 6.0, 2.0}.validate());
  CHECK_THROWS(ErrorModel{0.15, 0, 6.0, 2.0}.validate());
  CHECK_THROWS(ErrorModel{0.15, 3, 0.0, 2.0}.validate());
  CHECK_NOTHROW(ErrorModel{0.15, 3, 6.0, 2.0}.validate());
}

TEST_CASE("sampled goals are satisfiable and well-formed") {
  for (const auto& name : builtin_domain_names()) {
    const DomainModel& m = model(name);
    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 25; ++trial) {
      UserGoal g = sample_goal(m, rng);
      REQUIRE_FALSE(g.constraints.empty());
      REQUIRE_FALSE(g.requests.empty());
      REQUIRE_FALSE(g.target_names.empty());

      std::set<std::string> cslots;
      for (const auto& [slot, value] : g.constraints) {
        CHECK(cslots.insert(slot).second);  // distinct
        const SlotSpec& sp = m.ontology.at(slot);
        CHECK(sp.cls == SlotClass::Requestable);
        CHECK(sp.has_value(value));
      }
      std::set<std::string> rslots;
      for (const auto& r : g.requests) {
        CHECK(rslots.insert(r).second);
        CHECK(m.ontology.at(r).cls == SlotClass::Informable);
      }
      // every listed target really satisfies every constraint
      const std::string& name_slot = m.ontology.name_slot().name;
      for (const auto& t : g.target_names) {
        bool found = false;
        for (const auto& e : m.db.entities) {
          auto it = e.find(name_slot);
          if (it == e.end() || it->second != t) continue;
          found = true;
          for (const auto& [slot, value] : g.constraints) {
            auto vit = e.find(slot);
            REQUIRE(vit != e.end());
            CHECK(vit->second == value);
          }
        }
        CHECK(found);
      }
    }
  }
}

TEST_CASE("goal sampling is deterministic per seed") {
  std::mt19937_64 r1(7), r2(7);
  UserGoal a = sample_goal(model("SFR"), r1);
  UserGoal b = sample_goal(model("SFR"), r2);
  CHECK(a.constraints == b.constraints);
  CHECK(a.requests == b.requests);
  CHECK(a.target_names == b.target_names);
}

TEST_CASE("user opens with the highest-ranked constraint") {
  const DomainModel& m = model("SFR");
  std::mt19937_64 rng(62);
  UserGoal g;
  // pick two constraint slots with known ranks, values from a real entity
  const auto& req = m.ordering.of_class(SlotClass::Requestable);
  REQUIRE(req.size() >= 2);
  const Entity& e = m.db.entities.front();
  g.constraints.emplace_back(req[1].slot, e.at(req[1].slot));
  g.constraints.emplace_back(req[0].slot, e.at(req[0].slot));
  g.requests.push_back(m.ordering.of_class(SlotClass::Informable).front().slot);
  g.target_names.push_back(e.at(m.ontology.name_slot().name));

  SimulatedUser user(m, g);
  DialogueAct first = user.respond(kHello, rng);
  CHECK(first.type == ActType::Inform);
  CHECK(first.slot == req[0].slot);  // rank 0 stated before rank 1
  CHECK(first.value == e.at(req[0].slot));

  DialogueAct second = user.respond(DialogueAct{ActType::Repeat, "", "", {}}, rng);
  CHECK(second.type == ActType::Inform);
  CHECK(second.slot == req[1].slot);
}

TEST_CASE("system requests are answered, unconstrained slots get dontcare") {
  const DomainModel& m = model("SFR");
  std::mt19937_64 rng(63);
  const auto& req = m.ordering.of_class(SlotClass::Requestable);
  const Entity& e = m.db.entities.front();
  UserGoal g;
  g.constraints.emplace_back(req[0].slot, e.at(req[0].slot));
  g.requests.push_back(m.ordering.of_class(SlotClass::Informable).front().slot);
  g.target_names.push_back(e.at(m.ontology.name_slot().name));

  SimulatedUser user(m, g);
  DialogueAct a = user.respond(DialogueAct{ActType::Request, req[0].slot, "", {}}, rng);
  CHECK(a.type == ActType::Inform);
  CHECK(a.slot == req[0].slot);
  CHECK(a.value == e.at(req[0].slot));

  DialogueAct b = user.respond(DialogueAct{ActType::Request, req[1].slot, "", {}}, rng);
  CHECK(b.type == ActType::Inform);
  CHECK(b.slot == req[1].slot);
  CHECK(b.value == "dontcare");
}

TEST_CASE("confirms draw affirm on the right value and a correction on the wrong one") {
  const DomainModel& m = model("SFR");
  std::mt19937_64 rng(64);
  const auto& req = m.ordering.of_class(SlotClass::Requestable);
  const Entity& e = m.db.entities.front();
  const std::string slot = req[0].slot;
  const std::string right = e.at(slot);
  UserGoal g;
  g.constraints.emplace_back(slot, right);
  g.requests.push_back(m.ordering.of_class(SlotClass::Informable).front().slot);
  g.target_names.push_back(e.at(m.ontology.name_slot().name));

  SimulatedUser yes(m, g);
  CHECK(yes.respond(DialogueAct{ActType::Confirm, slot, right, {}}, rng).type == ActType::Affirm);

  std::string wrong;
  for (const auto& v : m.ontology.at(slot).values)
    if (v != right) {
      wrong = v;
      break;
    }
  REQUIRE_FALSE(wrong.empty());
  SimulatedUser no(m, g);
  DialogueAct resp = no.respond(DialogueAct{ActType::Confirm, slot, wrong, {}}, rng);
  CHECK(resp.type == ActType::Negate);
  DialogueAct follow = no.respond(kHello, rng);
  CHECK(follow.type == ActType::Inform);
  CHECK(follow.slot == slot);
  CHECK(follow.value == right);
}

TEST_CASE("a matching offer leads to requests and then bye") {
  const DomainModel& m = model("SFR");
  std::mt19937_64 rng(65);
  UserGoal g = sample_goal(m, rng);
  SimulatedUser user(m, g);
  user.respond(kHello, rng);  // opening inform

  DialogueAct offer = offer_entity(m, g.target_names.front());
  // the full entity answers every request in one act
  DialogueAct resp = user.respond(offer, rng);
  CHECK(resp.type == ActType::Bye);
  CHECK(user.finished());
}

TEST_CASE("a partial matching offer draws the unanswered requests in order") {
  const DomainModel& m = model("SFR");
  std::mt19937_64 rng(66);
  const auto& req = m.ordering.of_class(SlotClass::Requestable);
  const auto& inf = m.ordering.of_class(SlotClass::Informable);
  REQUIRE(inf.size() >= 2);
  const Entity& e = m.db.entities.front();
  UserGoal g;
  g.constraints.emplace_back(req[0].slot, e.at(req[0].slot));
  g.requests = {inf[0].slot, inf[1].slot};
  g.target_names.push_back(e.at(m.ontology.name_slot().name));

  SimulatedUser user(m, g);
  user.respond(kHello, rng);
  // offer carries the name only: nothing answered yet
  DialogueAct bare{ActType::Inform, "", "", {{m.ontology.name_slot().name, g.target_names[0]}}};
  DialogueAct r1 = user.respond(bare, rng);
  CHECK(r1.type == ActType::Request);
  CHECK(r1.slot == inf[0].slot);

  // answering the first request leaves the second
  DialogueAct with_first = bare;
  with_first.items.emplace_back(inf[0].slot, e.at(inf[0].slot));
  DialogueAct r2 = user.respond(with_first, rng);
  CHECK(r2.type == ActType::Request);
  CHECK(r2.slot == inf[1].slot);
}

TEST_CASE("a mismatched offer draws a correction before asking for alternatives") {
  const DomainModel& m = model("SFR");
  std::mt19937_64 rng(67);
  const auto& req = m.ordering.of_class(SlotClass::Requestable);
  const Entity* target = &m.db.entities.front();
  const std::string slot = req[0].slot;
  // find an entity disagreeing with the target on the constraint slot
  const Entity* other = nullptr;
  for (const auto& e : m.db.entities)
    if (e.count(slot) && e.at(slot) != target->at(slot)) {
      other = &e;
      break;
    }
  REQUIRE(other != nullptr);

  UserGoal g;
  g.constraints.emplace_back(slot, target->at(slot));
  g.requests.push_back(m.ordering.of_class(SlotClass::Informable).front().slot);
  g.target_names.push_back(target->at(m.ontology.name_slot().name));

  SimulatedUser user(m, g);
  user.respond(kHello, rng);
  DialogueAct offer = offer_entity(m, other->at(m.ontology.name_slot().name));
  DialogueAct first = user.respond(offer, rng);
  DialogueAct second = user.respond(kHello, rng);
  // both the corrective inform and the request for alternatives arrive, the
  // alternatives request last
  CHECK(first.type == ActType::ReqAlts);
  CHECK(second.type == ActType::Inform);
  CHECK(second.slot == slot);
  CHECK(second.value == target->at(slot));
}

TEST_CASE("rank-1 corruption frequency tracks the error rate") {
  const DomainModel& m = model("SFR");
  ErrorModel em;  // 0.15, 3-best
  const auto& req = m.ordering.of_class(SlotClass::Requestable);
  DialogueAct truth{ActType::Inform, req[0].slot, m.ontology.at(req[0].slot).values.front(), {}};

  std::mt19937_64 rng(68);
  int corrupted = 0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    NBestInput nb = corrupt_act(truth, m, em, rng);
    nb.validate();
    REQUIRE_FALSE(nb.hypotheses.empty());
    if (!(nb.hypotheses.front().act == truth)) ++corrupted;
    double total = 0.0;
    for (const auto& h : nb.hypotheses) {
      CHECK(h.confidence > 0.0);
      total += h.confidence;
    }
    CHECK(total <= 1.0 + 1e-9);
  }
  double freq = double(corrupted) / trials;
  CHECK(freq > 0.14);
  CHECK(freq < 0.16);
}

TEST_CASE("degenerate error rates behave as advertised") {
  const DomainModel& m = model("SFR");
  const auto& req = m.ordering.of_class(SlotClass::Requestable);
  REQUIRE(m.ontology.at(req[0].slot).values.size() >= 2);
  DialogueAct truth{ActType::Inform, req[0].slot, m.ontology.at(req[0].slot).values.front(), {}};

  std::mt19937_64 rng(69);
  ErrorModel clean{0.0, 3, 6.0, 2.0};
  for (int i = 0; i < 200; ++i)
    CHECK(corrupt_act(truth, m, clean, rng).hypotheses.front().act == truth);

  ErrorModel broken{1.0, 3, 6.0, 2.0};
  for (int i = 0; i < 200; ++i)
    CHECK_FALSE(corrupt_act(truth, m, broken, rng).hypotheses.front().act == truth);
}

TEST_CASE("alternates are distinct confusions sharing half the leftover mass") {
  const DomainModel& m = model("SFR");
  const auto& req = m.ordering.of_class(SlotClass::Requestable);
  DialogueAct truth{ActType::Inform, req[0].slot, m.ontology.at(req[0].slot).values.front(), {}};
  std::mt19937_64 rng(70);
  ErrorModel em{0.0, 4, 6.0, 2.0};
  NBestInput nb = corrupt_act(truth, m, em, rng);
  REQUIRE(nb.hypotheses.size() >= 2);
  double c1 = nb.hypotheses.front().confidence;
  double share = (1.0 - c1) / 2.0 / (em.nbest_len - 1);
  for (std::size_t i = 1; i < nb.hypotheses.size(); ++i) {
    CHECK(nb.hypotheses[i].confidence == doctest::Approx(share));
    for (std::size_t j = 0; j < i; ++j)
      CHECK_FALSE(nb.hypotheses[i].act == nb.hypotheses[j].act);
  }
}

TEST_CASE("episode scoring checks constraints and requested slots of one offer") {
  const DomainModel& m = model("SFR");
  std::mt19937_64 rng(71);
  UserGoal g = sample_goal(m, rng);
  RewardConfig rc;

  // the full matching entity: success, return counts the turns
  DialogueAct good = offer_entity(m, g.target_names.front());
  auto s1 = score_episode({good}, g, m, rc);
  CHECK(s1.success);
  CHECK(s1.ret == doctest::Approx(-1.0 + 20.0));

  auto s2 = score_episode({DialogueAct{ActType::Request, "food", "", {}}, good}, g, m, rc);
  CHECK(s2.success);
  CHECK(s2.ret == doctest::Approx(-2.0 + 20.0));

  // no offer at all: failure
  auto s3 = score_episode({DialogueAct{ActType::Request, "food", "", {}}}, g, m, rc);
  CHECK_FALSE(s3.success);
  CHECK(s3.ret == doctest::Approx(-1.0));

  // name-only offer misses the requested slots
  DialogueAct bare{ActType::Inform, "", "", {{m.ontology.name_slot().name, g.target_names[0]}}};
  auto s4 = score_episode({bare}, g, m, rc);
  CHECK_FALSE(s4.success);

  // the requested slots may arrive over several acts naming the same entity
  std::vector<DialogueAct> split;
  for (const auto& r : g.requests) {
    DialogueAct part = bare;
    const Entity* ent = nullptr;
    for (const auto& e : m.db.entities)
      if (e.at(m.ontology.name_slot().name) == g.target_names[0]) ent = &e;
    REQUIRE(ent != nullptr);
    part.items.emplace_back(r, ent->at(r));
    split.push_back(part);
  }
  auto s5 = score_episode(split, g, m, rc);
  CHECK(s5.success);

  // a non-matching entity fails even with every slot attached
  std::string other_name;
  const std::string& name_slot = m.ontology.name_slot().name;
  for (const auto& e : m.db.entities) {
    bool satisfies = true;
    for (const auto& [slot, value] : g.constraints) {
      auto it = e.find(slot);
      if (it == e.end() || it->second != value) satisfies = false;
    }
    if (!satisfies) {
      other_name = e.at(name_slot);
      break;
    }
  }
  if (!other_name.empty()) {
    auto s6 = score_episode({offer_entity(m, other_name)}, g, m, rc);
    CHECK_FALSE(s6.success);
  }
}

TEST_CASE("dontcare constraints accept any entity value") {
  const DomainModel& m = model("SFR");
  const auto& req = m.ordering.of_class(SlotClass::Requestable);
  const Entity& e = m.db.entities.front();
  UserGoal g;
  g.constraints.emplace_back(req[0].slot, "dontcare");
  g.requests.push_back(m.ordering.of_class(SlotClass::Informable).front().slot);
  g.target_names.push_back(e.at(m.ontology.name_slot().name));
  RewardConfig rc;
  auto s = score_episode({offer_entity(m, g.target_names[0])}, g, m, rc);
  CHECK(s.success);
}
