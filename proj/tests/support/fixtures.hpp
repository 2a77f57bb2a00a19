#pragma once

#include "isddp/model.hpp"

#include <string>

namespace isddp::testsupport {

std::string fixture_path(const std::string& name);  // name without extension
MultistageProblem load_fixture(const std::string& name);
// Reference optimum pinned by the scipy extensive-form script.
double fixture_optimum(const std::string& name);

}  // namespace isddp::testsupport
