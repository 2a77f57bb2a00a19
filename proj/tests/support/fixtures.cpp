#include "support/fixtures.hpp"

#include "isddp/instance_io.hpp"

#include <json.hpp>

#include <fstream>
#include <stdexcept>

namespace isddp::testsupport {

std::string fixture_path(const std::string& name) { return std::string(ISDDP_FIXTURE_DIR) + "/" + name + ".json"; }

MultistageProblem load_fixture(const std::string& name) { return load_instance(fixture_path(name)); }

double fixture_optimum(const std::string& name) {
  std::ifstream in(fixture_path("optima"));
  if (!in) throw std::runtime_error("cannot open optima.json");
  auto j = nlohmann::json::parse(in);
  return j.at(name).get<double>();
}

}  // namespace isddp::testsupport
