#include "gpdm/ontology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace gpdm {

const char* to_string(SlotClass c) {
  switch (c) {
    case SlotClass::Name: return "name";
    case SlotClass::Requestable: return "requestable";
    case SlotClass::Informable: return "informable";
  }
  return "?";
}

SlotClass slot_class_from_string(const std::string& s) {
  if (s == "name") return SlotClass::Name;
  if (s == "requestable") return SlotClass::Requestable;
  if (s == "informable") return SlotClass::Informable;
  throw std::invalid_argument("unknown slot class: " + s);
}

bool SlotSpec::has_value(const std::string& v) const {
  return std::find(values.begin(), values.end(), v) != values.end();
}

const SlotSpec* DomainOntology::find(const std::string& slot) const {
  for (const auto& s : slots)
    if (s.name == slot) return &s;
  return nullptr;
}

const SlotSpec& DomainOntology::at(const std::string& slot) const {
  const SlotSpec* s = find(slot);
  if (!s) throw std::out_of_range("domain " + domain + " has no slot '" + slot + "'");
  return *s;
}

std::vector<const SlotSpec*> DomainOntology::of_class(SlotClass c) const {
  std::vector<const SlotSpec*> out;
  for (const auto& s : slots)
    if (s.cls == c) out.push_back(&s);
  return out;
}

const SlotSpec& DomainOntology::name_slot() const {
  for (const auto& s : slots)
    if (s.cls == SlotClass::Name) return s;
  throw std::logic_error("domain " + domain + " has no name slot");
}

DomainOntology ontology_from_json(const nlohmann::json& j) {
  DomainOntology ont;
  if (!j.is_object() || !j.contains("domain") || !j.contains("slots"))
    throw std::runtime_error("ontology document must have 'domain' and 'slots'");
  ont.domain = j.at("domain").get<std::string>();
  int name_slots = 0;
  std::set<std::string> seen;
  for (const auto& js : j.at("slots")) {
    SlotSpec spec;
    spec.name = js.at("name").get<std::string>();
    spec.cls = slot_class_from_string(js.at("class").get<std::string>());
    if (js.contains("values"))
      for (const auto& v : js.at("values")) spec.values.push_back(v.get<std::string>());
    if (!seen.insert(spec.name).second)
      throw std::runtime_error("ontology for " + ont.domain + ": duplicate slot '" + spec.name + "'");
    if (spec.cls == SlotClass::Name) ++name_slots;
    ont.slots.push_back(std::move(spec));
  }
  if (name_slots != 1)
    throw std::runtime_error("ontology for " + ont.domain + " must declare exactly one name slot");
  return ont;
}

nlohmann::json ontology_to_json(const DomainOntology& ont) {
  nlohmann::json j;
  j["domain"] = ont.domain;
  j["slots"] = nlohmann::json::array();
  for (const auto& s : ont.slots) {
    nlohmann::json js;
    js["name"] = s.name;
    js["class"] = to_string(s.cls);
    js["values"] = s.values;
    j["slots"].push_back(js);
  }
  return j;
}

Database database_from_json(const nlohmann::json& j, DomainOntology& ont) {
  if (!j.is_object() || !j.contains("domain") || !j.contains("entities"))
    throw std::runtime_error("database document must have 'domain' and 'entities'");
  Database db;
  db.domain = j.at("domain").get<std::string>();
  if (db.domain != ont.domain)
    throw std::runtime_error("database domain '" + db.domain + "' does not match ontology domain '" +
                             ont.domain + "'");
  const std::string name_slot = ont.name_slot().name;
  std::set<std::string> names;
  std::size_t idx = 0;
  for (const auto& je : j.at("entities")) {
    Entity e;
    for (auto it = je.begin(); it != je.end(); ++it) {
      const std::string& slot = it.key();
      SlotSpec* spec = nullptr;
      for (auto& s : ont.slots)
        if (s.name == slot) spec = &s;
      if (!spec)
        throw std::runtime_error("entity " + std::to_string(idx) + " uses unknown slot '" + slot + "'");
      std::string value = it.value().get<std::string>();
      if (!spec->has_value(value)) spec->values.push_back(value);  // observed values extend the set
      e[slot] = std::move(value);
    }
    auto nit = e.find(name_slot);
    if (nit == e.end())
      throw std::runtime_error("entity " + std::to_string(idx) + " is missing its name value");
    if (!names.insert(nit->second).second)
      throw std::runtime_error("duplicate entity name '" + nit->second + "'");
    db.entities.push_back(std::move(e));
    ++idx;
  }
  return db;
}

nlohmann::json database_to_json(const Database& db) {
  nlohmann::json j;
  j["domain"] = db.domain;
  j["entities"] = nlohmann::json::array();
  for (const auto& e : db.entities) {
    nlohmann::json je = nlohmann::json::object();
    for (const auto& [k, v] : e) je[k] = v;
    j["entities"].push_back(je);
  }
  return j;
}

static nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

std::pair<DomainOntology, Database> load_domain(const std::string& ontology_path,
                                                const std::string& db_path) {
  DomainOntology ont = ontology_from_json(read_json_file(ontology_path));
  Database db = database_from_json(read_json_file(db_path), ont);
  return {std::move(ont), std::move(db)};
}

double normalized_entropy(const DomainOntology& ont, const Database& db, const std::string& slot) {
  const SlotSpec& spec = ont.at(slot);
  if (spec.values.empty())
    throw std::runtime_error("slot '" + slot + "' has an empty value set");
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& e : db.entities) {
    auto it = e.find(slot);
    if (it == e.end()) continue;
    ++counts[it->second];
    ++total;
  }
  if (total == 0)
    throw std::runtime_error("slot '" + slot + "' has no observed values in the database");
  double h = 0.0;
  for (const auto& [v, c] : counts) {
    double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  return h / static_cast<double>(spec.values.size());
}

int AbstractOrdering::rank_of(SlotClass c, const std::string& slot) const {
  for (const auto& r : of_class(c))
    if (r.slot == slot) return r.rank;
  return -1;
}

AbstractOrdering abstract_ordering(const DomainOntology& ont, const Database& db) {
  AbstractOrdering out;
  out.domain = ont.domain;
  for (SlotClass c : {SlotClass::Name, SlotClass::Requestable, SlotClass::Informable}) {
    auto& ranked = out.classes[static_cast<std::size_t>(c)];
    for (const SlotSpec* s : ont.of_class(c))
      ranked.push_back(RankedSlot{s->name, normalized_entropy(ont, db, s->name), 0});
    std::stable_sort(ranked.begin(), ranked.end(), [](const RankedSlot& x, const RankedSlot& y) {
      if (x.entropy != y.entropy) return x.entropy > y.entropy;
      return x.slot < y.slot;
    });
    for (std::size_t i = 0; i < ranked.size(); ++i) ranked[i].rank = static_cast<int>(i);
  }
  return out;
}

const SlotPair* SlotMap::find_a(const std::string& slot) const {
  for (const auto& p : pairs)
    if (p.a == slot) return &p;
  return nullptr;
}

const SlotPair* SlotMap::find_b(const std::string& slot) const {
  for (const auto& p : pairs)
    if (p.b == slot) return &p;
  return nullptr;
}

SlotMap SlotMap::reversed() const {
  SlotMap r;
  r.domain_a = domain_b;
  r.domain_b = domain_a;
  for (const auto& p : pairs) r.pairs.push_back(SlotPair{p.b, p.a, p.cls, p.pad_length});
  r.unmatched_a = unmatched_b;
  r.unmatched_b = unmatched_a;
  return r;
}

namespace {

SlotMap match_impl(const DomainOntology& oa, const AbstractOrdering& ra,
                   const DomainOntology& ob, const AbstractOrdering& rb, bool shared_first) {
  SlotMap m;
  m.domain_a = oa.domain;
  m.domain_b = ob.domain;
  if (oa.domain == ob.domain) {
    // Self-matching is the identity pairing.
    for (const auto& s : oa.slots)
      m.pairs.push_back(SlotPair{s.name, s.name, s.cls, s.values.size()});
    return m;
  }
  for (SlotClass c : {SlotClass::Name, SlotClass::Requestable, SlotClass::Informable}) {
    const auto& la = ra.of_class(c);
    const auto& lb = rb.of_class(c);
    std::vector<bool> used_a(la.size(), false), used_b(lb.size(), false);
    auto emit = [&](std::size_t ia, std::size_t ib) {
      used_a[ia] = true;
      used_b[ib] = true;
      std::size_t pad = std::max(oa.at(la[ia].slot).values.size(), ob.at(lb[ib].slot).values.size());
      m.pairs.push_back(SlotPair{la[ia].slot, lb[ib].slot, c, pad});
    };
    if (shared_first) {
      for (std::size_t ia = 0; ia < la.size(); ++ia)
        for (std::size_t ib = 0; ib < lb.size(); ++ib)
          if (!used_a[ia] && !used_b[ib] && la[ia].slot == lb[ib].slot) emit(ia, ib);
    }
    // remaining slots pair in rank order
    std::vector<std::size_t> rest_a, rest_b;
    for (std::size_t i = 0; i < la.size(); ++i)
      if (!used_a[i]) rest_a.push_back(i);
    for (std::size_t i = 0; i < lb.size(); ++i)
      if (!used_b[i]) rest_b.push_back(i);
    for (std::size_t i = 0; i < std::min(rest_a.size(), rest_b.size()); ++i) emit(rest_a[i], rest_b[i]);
    for (std::size_t i = 0; i < la.size(); ++i)
      if (!used_a[i]) m.unmatched_a.push_back(la[i].slot);
    for (std::size_t i = 0; i < lb.size(); ++i)
      if (!used_b[i]) m.unmatched_b.push_back(lb[i].slot);
  }
  return m;
}

}  // namespace

SlotMap match_slots(const DomainOntology& oa, const AbstractOrdering& ra,
                    const DomainOntology& ob, const AbstractOrdering& rb) {
  return match_impl(oa, ra, ob, rb, false);
}

SlotMap match_slots_shared(const DomainOntology& oa, const AbstractOrdering& ra,
                           const DomainOntology& ob, const AbstractOrdering& rb) {
  return match_impl(oa, ra, ob, rb, true);
}

nlohmann::json slot_map_to_json(const SlotMap& m) {
  nlohmann::json j;
  j["domain_a"] = m.domain_a;
  j["domain_b"] = m.domain_b;
  j["pairs"] = nlohmann::json::array();
  for (const auto& p : m.pairs)
    j["pairs"].push_back({{"a", p.a}, {"b", p.b}, {"class", to_string(p.cls)}, {"pad_length", p.pad_length}});
  j["unmatched_a"] = m.unmatched_a;
  j["unmatched_b"] = m.unmatched_b;
  return j;
}

SlotMap slot_map_from_json(const nlohmann::json& j) {
  SlotMap m;
  m.domain_a = j.at("domain_a").get<std::string>();
  m.domain_b = j.at("domain_b").get<std::string>();
  for (const auto& jp : j.at("pairs"))
    m.pairs.push_back(SlotPair{jp.at("a").get<std::string>(), jp.at("b").get<std::string>(),
                               slot_class_from_string(jp.at("class").get<std::string>()),
                               jp.at("pad_length").get<std::size_t>()});
  m.unmatched_a = j.at("unmatched_a").get<std::vector<std::string>>();
  m.unmatched_b = j.at("unmatched_b").get<std::vector<std::string>>();
  return m;
}

DomainModel make_domain_model(DomainOntology ont, Database db) {
  DomainModel m;
  m.ordering = abstract_ordering(ont, db);
  m.ontology = std::move(ont);
  m.db = std::move(db);
  return m;
}

}  // namespace gpdm
