#pragma once

#include <json.hpp>

#include "coalesce/distributions.hpp"

namespace coalesce {

/// Builds a vector from a descriptor such as
///   {"family": "uniform", "n": 10}
///   {"family": "topheavy", "n": 100, "c2": 0.05}
///   {"family": "three_level", "n": 4, "c2": 0.345, "c3": 0.1315, "nu": 2}
///   {"family": "explicit", "weights": [0.75, 0.25], "normalize": false}
/// Throws ValidationError on missing fields or infeasible parameters.
ProbabilityVector distribution_from_json(const nlohmann::json& descriptor);

/// Explicit-family descriptor for any vector.
nlohmann::json distribution_to_json(const ProbabilityVector& p);

}  // namespace coalesce
