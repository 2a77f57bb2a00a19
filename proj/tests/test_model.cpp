#include <doctest.h>

#include "isddp/instance_io.hpp"
#include "isddp/lp.hpp"
#include "isddp/model.hpp"
#include "support/fixtures.hpp"
#include "support/generators.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>

using namespace isddp;
using namespace isddp::testsupport;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("minimal one-stage document") {
  auto p = load_fixture("minimal1");
  CHECK(p.horizon == 1);
  CHECK(p.stages.size() == 1);
  CHECK(p.stage(1).realizations.size() == 1);
}

TEST_CASE("bundled three-stage fixture shape") {
  auto p = load_fixture("fixture3");
  CHECK(p.horizon == 3);
  CHECK(p.stage(2).realizations.size() == 2);
  CHECK(p.stage(3).realizations.size() == 2);
  CHECK(p.node_count() == doctest::Approx(1 + 1 + 2 + 4));
}

TEST_CASE("probabilities not summing to one are rejected with the sum") {
  auto j = nlohmann::json::parse(read_file(fixture_path("fixture3")));
  j["stages"][1]["realizations"][0]["probability"] = 0.6;
  j["stages"][1]["realizations"][1]["probability"] = 0.5;
  try {
    parse_instance_string(j.dump());
    FAIL("expected ModelError");
  } catch (const ModelError& e) {
    CHECK(e.kind() == ModelErrorKind::kProbability);
    CHECK(std::string(e.what()).find("probabilities sum to 1.1") != std::string::npos);
  }
}

TEST_CASE("syntax errors report a position") {
  try {
    parse_instance_string("{\"horizon\": 1,, }");
    FAIL("expected ModelError");
  } catch (const ModelError& e) {
    CHECK(e.kind() == ModelErrorKind::kSyntax);
  }
}

TEST_CASE("dimension mismatch and unbounded boxes are rejected") {
  auto j = nlohmann::json::parse(read_file(fixture_path("fixture3")));
  auto bad = j;
  bad["stages"][1]["realizations"][0]["cost_pieces"][0]["slope_y"] = {1.0, 2.0};
  CHECK_THROWS_AS(parse_instance_string(bad.dump()), ModelError);

  Box b(Vec::Constant(1, 0.0), Vec::Constant(1, lp::kInf));
  CHECK_THROWS_AS(validate(b, "box"), ModelError);
}

TEST_CASE("round trip of fixtures is the identity and emission is canonical") {
  for (const char* name : {"minimal1", "toy2", "fixture3"}) {
    auto p = load_fixture(name);
    std::string e1 = emit_instance(p);
    auto q = parse_instance_string(e1);
    CHECK(q == p);
    CHECK(emit_instance(q) == e1);
  }
}

TEST_CASE("round trip of random problems") {
  Rng rng(7);
  for (int i = 0; i < 30; ++i) {
    auto p = random_problem(rng, 1 + i % 4, 3, 1 + i % 2);
    REQUIRE_NOTHROW(validate(p));
    auto q = parse_instance_string(emit_instance(p));
    CHECK(q == p);
  }
}

TEST_CASE("fenchel view of |y - x|") {
  PolyhedralFunction f(1, 1, {AffinePiece{Vec::Ones(1), -Vec::Ones(1), 0.0},
                              AffinePiece{-Vec::Ones(1), Vec::Ones(1), 0.0}});
  auto fen = fenchel_view(f);
  CHECK(fen.A0(0, 0) == 1.0);
  CHECK(fen.A0(0, 1) == -1.0);
  CHECK(fen.B0(0, 0) == -1.0);
  CHECK(fen.B0(0, 1) == 1.0);
  CHECK(fen.phi0[0] == 0.0);
  CHECK(fen.phi0[1] == 0.0);
  CHECK(fen.a1.isZero());
  CHECK(fen.a2.isZero());
}

TEST_CASE("fenchel view of a single piece") {
  PolyhedralFunction f(1, 1, {AffinePiece{Vec::Constant(1, 2.0), Vec::Zero(1), 3.0}});
  auto fen = fenchel_view(f);
  CHECK(fen.A0(0, 0) == 2.0);
  CHECK(fen.B0(0, 0) == 0.0);
  CHECK(fen.phi0[0] == -3.0);
}

TEST_CASE("fenchel view reproduces values at the simplex vertices") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int ny = uniform_int(rng, 1, 3), nx = uniform_int(rng, 1, 2);
    std::vector<AffinePiece> pieces;
    for (int k = 0; k < 4; ++k) {
      Vec a(ny), c(nx);
      for (int i = 0; i < ny; ++i) a[i] = uniform(rng, -2, 2);
      for (int i = 0; i < nx; ++i) c[i] = uniform(rng, -2, 2);
      pieces.push_back(AffinePiece{a, c, uniform(rng, -1, 1)});
    }
    PolyhedralFunction f(ny, nx, pieces);
    auto fen = fenchel_view(f);
    for (int s = 0; s < 50; ++s) {
      Vec y(ny), x(nx);
      for (int i = 0; i < ny; ++i) y[i] = uniform(rng, -3, 3);
      for (int i = 0; i < nx; ++i) x[i] = uniform(rng, -3, 3);
      double best = -1e300;
      for (int k = 0; k < 4; ++k) best = std::max(best, fen.lagrangian(y, x, Vec::Unit(4, k)));
      CHECK(std::abs(best - f.value(y, x)) <= 1e-12);
    }
  }
}

TEST_CASE("polyhedral functions are midpoint convex") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto inst = random_instance(rng);
    const auto& f = inst.cost;
    Vec y1(f.dim_y()), y2(f.dim_y()), x1(f.dim_x()), x2(f.dim_x());
    for (int i = 0; i < f.dim_y(); ++i) {
      y1[i] = uniform(rng, -3, 3);
      y2[i] = uniform(rng, -3, 3);
    }
    for (int i = 0; i < f.dim_x(); ++i) {
      x1[i] = uniform(rng, -3, 3);
      x2[i] = uniform(rng, -3, 3);
    }
    double mid = f.value((y1 + y2) / 2, (x1 + x2) / 2);
    CHECK(mid <= (f.value(y1, x1) + f.value(y2, x2)) / 2 + 1e-12);
  }
}

TEST_CASE("active piece picks the lowest index on ties") {
  PolyhedralFunction f(1, 0, {AffinePiece{Vec::Ones(1), Vec(0), 0.0}, AffinePiece{Vec::Ones(1), Vec(0), 0.0}});
  CHECK(f.active_piece(Vec::Ones(1), Vec(0)) == 0);
}

TEST_CASE("incoming boxes") {
  auto p = load_fixture("fixture3");
  auto b1 = p.incoming_box(1);
  CHECK(b1.lower == p.x0);
  CHECK(b1.upper == p.x0);
  CHECK(p.incoming_box(3) == p.stage(2).state_set);
}
