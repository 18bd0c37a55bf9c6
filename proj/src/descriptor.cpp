#include "coalesce/descriptor.hpp"

#include <string>

#include "coalesce/errors.hpp"

namespace coalesce {

namespace {

template <typename T>
T required(const nlohmann::json& j, const char* key, const std::string& family) {
  if (!j.contains(key)) {
    throw ValidationError("distribution '" + family + "' needs field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("distribution field '") + key + "': " + e.what());
  }
}

}  // namespace

ProbabilityVector distribution_from_json(const nlohmann::json& d) {
  if (!d.is_object()) throw ValidationError("distribution descriptor must be a JSON object");
  const std::string family = d.value("family", std::string{});
  if (family == "uniform") {
    return ProbabilityVector::uniform(required<std::size_t>(d, "n", family));
  }
  if (family == "topheavy") {
    return topheavy(required<std::size_t>(d, "n", family), required<double>(d, "c2", family));
  }
  if (family == "three_level") {
    return three_level(required<std::size_t>(d, "n", family), required<double>(d, "c2", family),
                       required<double>(d, "c3", family), required<std::size_t>(d, "nu", family));
  }
  if (family == "explicit") {
    auto weights = required<std::vector<double>>(d, "weights", family);
    if (d.contains("n") && d.at("n").get<std::size_t>() != weights.size()) {
      throw ValidationError("explicit distribution: n does not match weights length");
    }
    return ProbabilityVector::new_checked(std::move(weights), d.value("normalize", false));
  }
  throw ValidationError("unknown distribution family '" + family + "'");
}

nlohmann::json distribution_to_json(const ProbabilityVector& p) {
  return {{"family", "explicit"},
          {"n", p.size()},
          {"weights", std::vector<double>(p.weights().begin(), p.weights().end())}};
}

}  // namespace coalesce
