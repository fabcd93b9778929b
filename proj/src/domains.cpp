#include "gpdm/domains.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <stdexcept>

#include "gpdm/util.hpp"

namespace gpdm {
namespace {

struct SlotPlan {
  const char* name;
  SlotClass cls;
  std::size_t card;
  double target_eta;  // desired normalized entropy of the generated column
  std::vector<const char*> curated;
};

struct DomainPlan {
  const char* name;
  const char* item_prefix;
  std::vector<SlotPlan> slots;  // catalog order == intended entropy rank per class
};

const std::vector<DomainPlan>& catalog() {
  static const std::vector<DomainPlan> plans = {
      {"SFR",
       "sfr_rest",
       {
           {"name", SlotClass::Name, 0, 0.0, {}},
           {"allowedforkids", SlotClass::Requestable, 2, 0.33, {"yes", "no"}},
           {"pricerange", SlotClass::Requestable, 3, 0.30, {"cheap", "moderate", "expensive"}},
           {"near",
            SlotClass::Requestable,
            8,
            0.24,
            {"union_square", "financial_district", "mission", "marina", "soma", "north_beach",
             "castro", "haight"}},
           {"goodformeal", SlotClass::Requestable, 4, 0.21, {"breakfast", "brunch", "lunch", "dinner"}},
           {"food",
            SlotClass::Requestable,
            12,
            0.18,
            {"thai", "chinese", "indian", "italian", "french", "japanese", "korean", "mexican",
             "vietnamese", "turkish", "spanish", "greek"}},
           {"area", SlotClass::Requestable, 5, 0.15, {"centre", "north", "south", "east", "west"}},
           {"addr", SlotClass::Informable, 4, 0.33, {}},
           {"price",
            SlotClass::Informable,
            6,
            0.26,
            {"under10", "10to25", "25to40", "40to60", "over60", "prixfixe"}},
           {"phone", SlotClass::Informable, 5, 0.20, {}},
           {"postcode",
            SlotClass::Informable,
            7,
            0.14,
            {"94102", "94103", "94107", "94109", "94110", "94114", "94117"}},
       }},
      {"SFH",
       "sfh_hotel",
       {
           {"name", SlotClass::Name, 0, 0.0, {}},
           {"dogsallowed", SlotClass::Requestable, 2, 0.33, {"yes", "no"}},
           {"pricerange", SlotClass::Requestable, 4, 0.30, {"budget", "moderate", "expensive", "luxury"}},
           {"near",
            SlotClass::Requestable,
            7,
            0.25,
            {"union_square", "financial_district", "fishermans_wharf", "nob_hill", "soma", "presidio",
             "civic_center"}},
           {"takescreditcards", SlotClass::Requestable, 2, 0.22, {"yes", "no"}},
           {"hasinternet", SlotClass::Requestable, 2, 0.19, {"yes", "no"}},
           {"area",
            SlotClass::Requestable,
            6,
            0.16,
            {"centre", "north", "south", "east", "west", "waterfront"}},
           {"addr", SlotClass::Informable, 4, 0.33, {}},
           {"phone", SlotClass::Informable, 5, 0.26, {}},
           {"postcode",
            SlotClass::Informable,
            6,
            0.19,
            {"94102", "94103", "94108", "94109", "94123", "94133"}},
       }},
      {"L6",
       "l6_laptop",
       {
           {"name", SlotClass::Name, 0, 0.0, {}},
           {"isforbusiness", SlotClass::Requestable, 2, 0.33, {"yes", "no"}},
           {"batteryratings", SlotClass::Requestable, 3, 0.30, {"standard", "good", "exceptional"}},
           {"pricerange",
            SlotClass::Requestable,
            5,
            0.26,
            {"budget", "midrange", "premium", "highend", "luxury"}},
           {"driverange", SlotClass::Requestable, 3, 0.22, {"small", "medium", "large"}},
           {"weightrange", SlotClass::Requestable, 3, 0.19, {"lightweight", "midweight", "heavy"}},
           {"family",
            SlotClass::Requestable,
            6,
            0.16,
            {"ultrabook", "gaming", "business", "multimedia", "workstation", "convertible"}},
           {"price",
            SlotClass::Informable,
            5,
            0.30,
            {"under400", "400to700", "700to1000", "1000to1500", "over1500"}},
           {"drive", SlotClass::Informable, 4, 0.24, {"128gb", "256gb", "512gb", "1tb"}},
           {"dimension",
            SlotClass::Informable,
            6,
            0.18,
            {"11inch", "12inch", "13inch", "14inch", "15inch", "17inch"}},
       }},
      {"L11",
       "l11_laptop",
       {
           {"name", SlotClass::Name, 0, 0.0, {}},
           {"isforbusiness", SlotClass::Requestable, 2, 0.33, {"yes", "no"}},
           {"batteryrating", SlotClass::Requestable, 3, 0.30, {"standard", "good", "exceptional"}},
           {"pricerange",
            SlotClass::Requestable,
            5,
            0.27,
            {"budget", "midrange", "premium", "highend", "luxury"}},
           {"driverange", SlotClass::Requestable, 4, 0.24, {"small", "medium", "large", "extralarge"}},
           {"weightrange", SlotClass::Requestable, 3, 0.21, {"lightweight", "midweight", "heavy"}},
           {"family",
            SlotClass::Requestable,
            7,
            0.18,
            {"ultrabook", "gaming", "business", "multimedia", "workstation", "convertible", "netbook"}},
           {"platform", SlotClass::Requestable, 5, 0.15, {"windows", "macos", "linux", "chromeos", "android"}},
           {"utility",
            SlotClass::Requestable,
            6,
            0.12,
            {"office", "gaming", "multimedia", "development", "graphics", "scientific"}},
           {"processorclass",
            SlotClass::Requestable,
            8,
            0.09,
            {"i3", "i5", "i7", "i9", "ryzen3", "ryzen5", "ryzen7", "xeon"}},
           {"sysmemory",
            SlotClass::Requestable,
            9,
            0.06,
            {"2gb", "4gb", "8gb", "12gb", "16gb", "24gb", "32gb", "48gb", "64gb"}},
           {"weight", SlotClass::Informable, 4, 0.32, {"under1kg", "1to1.5kg", "1.5to2.5kg", "over2.5kg"}},
           {"battery", SlotClass::Informable, 5, 0.28, {"4hours", "6hours", "8hours", "10hours", "12hours"}},
           {"price",
            SlotClass::Informable,
            6,
            0.24,
            {"under400", "400to700", "700to1000", "1000to1500", "1500to2000", "over2000"}},
           {"dimension", SlotClass::Informable, 5, 0.20, {"11inch", "13inch", "14inch", "15inch", "17inch"}},
           {"drive", SlotClass::Informable, 4, 0.16, {"128gb", "256gb", "512gb", "1tb"}},
           {"display", SlotClass::Informable, 6, 0.12, {"hd", "fullhd", "retina", "qhd", "uhd", "oled"}},
           {"graphadaptor",
            SlotClass::Informable,
            7,
            0.09,
            {"integrated", "gtx1650", "gtx1660", "rtx3050", "rtx3060", "radeon", "quadro"}},
           {"design", SlotClass::Informable, 5, 0.06, {"clamshell", "convertible", "detachable", "slim", "rugged"}},
           {"processor",
            SlotClass::Informable,
            8,
            0.04,
            {"i3_10110u", "i5_10210u", "i5_1135g7", "i7_1165g7", "i7_10750h", "i9_10885h",
             "ryzen5_4500u", "ryzen7_4700u"}},
       }},
  };
  return plans;
}

double entropy_of_counts(const std::vector<std::size_t>& counts, std::size_t card) {
  std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  return h / static_cast<double>(card);
}

// Largest-remainder rounding of n * p to integer counts summing to n.
std::vector<std::size_t> round_counts(const std::vector<double>& p, std::size_t n) {
  std::vector<std::size_t> counts(p.size());
  std::vector<std::pair<double, std::size_t>> frac(p.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double exact = p[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[i];
    frac[i] = {exact - std::floor(exact), i};
  }
  std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::size_t k = 0; k < n - assigned; ++k) ++counts[frac[k % frac.size()].second];
  return counts;
}

// Finds integer value counts whose empirical normalized entropy is as close
// as possible to the target, searching over geometric weight profiles.
std::vector<std::size_t> counts_for_target(std::size_t card, std::size_t n, double target_eta) {
  std::vector<std::size_t> best;
  double best_err = 1e9;
  const int grid = 4000;
  for (int g = 1; g <= grid; ++g) {
    double rho = static_cast<double>(g) / static_cast<double>(grid);
    std::vector<double> w(card);
    double total = 0.0;
    for (std::size_t i = 0; i < card; ++i) {
      w[i] = std::pow(rho, static_cast<double>(i));
      total += w[i];
    }
    for (auto& x : w) x /= total;
    auto counts = round_counts(w, n);
    double err = std::fabs(entropy_of_counts(counts, card) - target_eta);
    if (err < best_err) {
      best_err = err;
      best = counts;
    }
  }
  return best;
}

const DomainPlan& plan_for(const std::string& name) {
  for (const auto& p : catalog())
    if (name == p.name) return p;
  throw std::invalid_argument("unknown builtin domain: " + name);
}

}  // namespace

std::vector<std::string> builtin_domain_names() {
  std::vector<std::string> names;
  for (const auto& p : catalog()) names.emplace_back(p.name);
  return names;
}

bool is_builtin_domain(const std::string& name) {
  for (const auto& p : catalog())
    if (name == p.name) return true;
  return false;
}

std::pair<DomainOntology, Database> make_builtin_domain(const std::string& name,
                                                        std::size_t entities, std::uint64_t seed) {
  const DomainPlan& plan = plan_for(name);
  if (entities < 2) throw std::invalid_argument("builtin domain needs at least 2 entities");

  DomainOntology ont;
  ont.domain = plan.name;
  Database db;
  db.domain = plan.name;
  db.entities.resize(entities);

  char buf[64];
  for (const SlotPlan& sp : plan.slots) {
    SlotSpec spec;
    spec.name = sp.name;
    spec.cls = sp.cls;
    if (sp.cls == SlotClass::Name) {
      for (std::size_t i = 0; i < entities; ++i) {
        std::snprintf(buf, sizeof(buf), "%s_%03zu", plan.item_prefix, i + 1);
        spec.values.emplace_back(buf);
        db.entities[i][sp.name] = buf;
      }
      ont.slots.push_back(std::move(spec));
      continue;
    }
    for (std::size_t i = 0; i < sp.card; ++i) {
      if (i < sp.curated.size()) {
        spec.values.emplace_back(sp.curated[i]);
      } else {
        std::snprintf(buf, sizeof(buf), "%s_%zu", sp.name, i + 1);
        spec.values.emplace_back(buf);
      }
    }
    auto counts = counts_for_target(sp.card, entities, sp.target_eta);
    std::vector<std::size_t> column;
    column.reserve(entities);
    for (std::size_t v = 0; v < counts.size(); ++v)
      column.insert(column.end(), counts[v], v);
    std::mt19937_64 rng(mix_seed(seed, {tag64(plan.name), tag64(sp.name)}));
    std::shuffle(column.begin(), column.end(), rng);
    for (std::size_t i = 0; i < entities; ++i)
      db.entities[i][sp.name] = spec.values[column[i]];
    ont.slots.push_back(std::move(spec));
  }

  // The catalog order within each class is the intended entropy ranking;
  // refuse to hand out a database that does not realize it.
  for (SlotClass c : {SlotClass::Requestable, SlotClass::Informable}) {
    double prev = 1e9;
    for (const SlotPlan& sp : plan.slots) {
      if (sp.cls != c) continue;
      double eta = normalized_entropy(ont, db, sp.name);
      if (eta >= prev - 1e-9)
        throw std::logic_error(std::string("builtin domain ") + plan.name +
                               ": entropy ordering failed at slot " + sp.name);
      prev = eta;
    }
  }
  return {std::move(ont), std::move(db)};
}

DomainModel builtin_domain_model(const std::string& name, std::size_t entities, std::uint64_t seed) {
  auto [ont, db] = make_builtin_domain(name, entities, seed);
  return make_domain_model(std::move(ont), std::move(db));
}

}  // namespace gpdm
