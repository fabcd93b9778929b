#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gpdm/ontology.hpp"

namespace gpdm {

// Built-in domain catalog: two venue domains (restaurants, hotels) and two
// laptop domains with overlapping slot inventories. Databases are synthetic
// and seeded; per-slot value distributions are calibrated so the per-class
// entropy ranking is stable and matches the catalog's declared slot order.
std::vector<std::string> builtin_domain_names();
bool is_builtin_domain(const std::string& name);

std::pair<DomainOntology, Database> make_builtin_domain(const std::string& name,
                                                        std::size_t entities = 150,
                                                        std::uint64_t seed = 13);

DomainModel builtin_domain_model(const std::string& name, std::size_t entities = 150,
                                 std::uint64_t seed = 13);

}  // namespace gpdm
