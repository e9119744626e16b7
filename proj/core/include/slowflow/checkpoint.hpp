#pragma once

#include <iosfwd>
#include <string>

#include "slowflow/flow_stack.hpp"

namespace slowflow::flows {

/// Model checkpoints are a line-oriented text container. The header records
/// width, layer count, the coupling mask pattern and whether a SlowFlow is
/// present; every parameter array follows as hex floats, which round-trip
/// bit-exactly. See docs in README for the grammar.
void save_checkpoint(const FlowStack& stack, std::ostream& out);
void save_checkpoint(const FlowStack& stack, const std::string& path);

FlowStack load_checkpoint(std::istream& in);
FlowStack load_checkpoint(const std::string& path);

}  // namespace slowflow::flows
