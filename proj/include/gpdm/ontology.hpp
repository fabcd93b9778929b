#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace gpdm {

enum class SlotClass { Name = 0, Requestable = 1, Informable = 2 };

const char* to_string(SlotClass c);
SlotClass slot_class_from_string(const std::string& s);

struct SlotSpec {
  std::string name;
  SlotClass cls = SlotClass::Requestable;
  std::vector<std::string> values;  // declared value set, declaration order

  bool has_value(const std::string& v) const;
};

struct DomainOntology {
  std::string domain;
  std::vector<SlotSpec> slots;

  const SlotSpec* find(const std::string& slot) const;
  const SlotSpec& at(const std::string& slot) const;  // throws on unknown slot
  std::vector<const SlotSpec*> of_class(SlotClass c) const;
  const SlotSpec& name_slot() const;
};

using Entity = std::map<std::string, std::string>;

struct Database {
  std::string domain;
  std::vector<Entity> entities;
};

DomainOntology ontology_from_json(const nlohmann::json& j);
nlohmann::json ontology_to_json(const DomainOntology& ont);

// Validates entities against the ontology. Unknown slot names are an error;
// missing values are allowed; observed values outside the declared set extend
// it (the ontology is updated in place). Name values must be unique.
Database database_from_json(const nlohmann::json& j, DomainOntology& ont);
nlohmann::json database_to_json(const Database& db);

std::pair<DomainOntology, Database> load_domain(const std::string& ontology_path,
                                                const std::string& db_path);

// Empirical slot-value distribution over the database, normalized by the
// declared cardinality |V_s|. Natural log. A slot observed in no entity has
// no distribution to score and is an error.
double normalized_entropy(const DomainOntology& ont, const Database& db, const std::string& slot);

struct RankedSlot {
  std::string slot;
  double entropy = 0.0;
  int rank = 0;  // 0-based within its class
};

// Per-class slot ranking by descending normalized entropy; ties broken by
// ascending slot name.
struct AbstractOrdering {
  std::string domain;
  std::array<std::vector<RankedSlot>, 3> classes;

  const std::vector<RankedSlot>& of_class(SlotClass c) const {
    return classes[static_cast<std::size_t>(c)];
  }
  int rank_of(SlotClass c, const std::string& slot) const;  // -1 when absent
};

AbstractOrdering abstract_ordering(const DomainOntology& ont, const Database& db);

struct SlotPair {
  std::string a;
  std::string b;
  SlotClass cls = SlotClass::Requestable;
  std::size_t pad_length = 0;  // max of the two declared cardinalities
};

struct SlotMap {
  std::string domain_a;
  std::string domain_b;
  std::vector<SlotPair> pairs;
  std::vector<std::string> unmatched_a;
  std::vector<std::string> unmatched_b;

  const SlotPair* find_a(const std::string& slot) const;
  const SlotPair* find_b(const std::string& slot) const;
  SlotMap reversed() const;
};

// Rank-i-to-rank-i pairing per semantic class.
SlotMap match_slots(const DomainOntology& oa, const AbstractOrdering& ra,
                    const DomainOntology& ob, const AbstractOrdering& rb);

// Name-identical slots pair first (within the same class), the remainder is
// filled by entropy rank as above.
SlotMap match_slots_shared(const DomainOntology& oa, const AbstractOrdering& ra,
                           const DomainOntology& ob, const AbstractOrdering& rb);

nlohmann::json slot_map_to_json(const SlotMap& m);
SlotMap slot_map_from_json(const nlohmann::json& j);

// Ontology + database + derived ordering; the unit every dialogue-level
// component works against.
struct DomainModel {
  DomainOntology ontology;
  Database db;
  AbstractOrdering ordering;
};

DomainModel make_domain_model(DomainOntology ont, Database db);

}  // namespace gpdm
