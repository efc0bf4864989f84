#pragma once

#include <string>

#include "dagcast/local_dag.hpp"

namespace dagcast {

/// Canonical length-prefixed binary form. Vertices appear in (round, origin,
/// digest) order; identical DAG values encode to identical bytes.
Bytes encode_dag(const LocalDag& dag);
LocalDag decode_dag(const Bytes& data);

/// Human-readable JSON form with the same canonical ordering.
std::string dag_to_json(const LocalDag& dag, int indent = 2);
LocalDag dag_from_json(const std::string& text);

}  // namespace dagcast
