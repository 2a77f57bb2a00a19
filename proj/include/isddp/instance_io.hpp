#pragma once

#include "isddp/model.hpp"

#include <istream>
#include <string>

namespace isddp {

// Throws ModelError; syntax errors carry kind kSyntax and the byte offset.
MultistageProblem parse_instance(std::istream& in);
MultistageProblem parse_instance_string(const std::string& text);
MultistageProblem load_instance(const std::string& path);

// Canonical pretty-printed form; emit(parse(emit(p))) == emit(p) byte for byte.
std::string emit_instance(const MultistageProblem& p);

}  // namespace isddp
