#include "isddp/instance_io.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace isddp {

using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void schema_error(const std::string& where, const std::string& what) {
  throw ModelError(ModelErrorKind::kOther, where + ": " + what);
}

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) schema_error(where, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(where, std::string("missing key '") + key + "'");
  return *it;
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) schema_error(where, "expected a number");
  return j.get<double>();
}

int count(const json& j, const std::string& where) {
  if (!j.is_number_integer() || j.get<long long>() < 0) schema_error(where, "expected a count");
  return static_cast<int>(j.get<long long>());
}

Vec vector_of(const json& j, const std::string& where) {
  if (!j.is_array()) schema_error(where, "expected an array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = number(j[i], where);
  return v;
}

// Row-major; an empty array is a matrix with no rows.
Mat matrix_of(const json& j, int cols, const std::string& where) {
  if (!j.is_array()) schema_error(where, "expected an array of rows");
  Mat m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    Vec row = vector_of(j[r], where);
    if (row.size() != cols)
      throw ModelError(ModelErrorKind::kDimension, where + ": row length " +
                                                       std::to_string(row.size()) + ", expected " +
                                                       std::to_string(cols));
    m.row(static_cast<Eigen::Index>(r)) = row;
  }
  return m;
}

PolyhedralFunction function_of(const json& j, int dy, int dx, const std::string& where) {
  if (!j.is_array() || j.empty()) schema_error(where, "expected a nonempty array of pieces");
  std::vector<AffinePiece> pieces;
  for (const auto& p : j) {
    AffinePiece a{vector_of(field(p, "slope_y", where), where),
                  vector_of(field(p, "slope_x", where), where),
                  number(field(p, "offset", where), where)};
    if (a.slope_y.size() != dy || a.slope_x.size() != dx)
      throw ModelError(ModelErrorKind::kDimension, where + ": piece slope length mismatch");
    pieces.push_back(std::move(a));
  }
  return PolyhedralFunction(dy, dx, std::move(pieces));
}

json to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json to_json(const Mat& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(to_json(Vec(m.row(r).transpose())));
  return a;
}

json to_json(const PolyhedralFunction& f) {
  json a = json::array();
  for (const auto& p : f.pieces())
    a.push_back({{"slope_y", to_json(p.slope_y)}, {"slope_x", to_json(p.slope_x)}, {"offset", p.offset}});
  return a;
}

MultistageProblem from_json(const json& doc) {
  MultistageProblem p;
  p.horizon = count(field(doc, "horizon", "instance"), "horizon");
  p.x0 = vector_of(field(doc, "x0", "instance"), "x0");
  const json& stages = field(doc, "stages", "instance");
  if (!stages.is_array()) schema_error("stages", "expected an array");
  if (static_cast<int>(stages.size()) != p.horizon)
    throw ModelError(ModelErrorKind::kDimension, "number of stages differs from horizon");
  int prev_dim = static_cast<int>(p.x0.size());
  for (std::size_t t = 0; t < stages.size(); ++t) {
    std::string tag = "stage " + std::to_string(t + 1);
    const json& s = stages[t];
    StageModel st;
    st.state_dim = count(field(s, "state_dim", tag), tag);
    st.state_set = Box(vector_of(field(s, "state_lower", tag), tag),
                       vector_of(field(s, "state_upper", tag), tag));
    if (st.state_set.lower.size() != st.state_dim || st.state_set.upper.size() != st.state_dim)
      throw ModelError(ModelErrorKind::kDimension, tag + ": state bounds length differs from state_dim");
    st.cost_lower_bound = number(field(s, "cost_lower_bound", tag), tag);
    const json& reals = field(s, "realizations", tag);
    if (!reals.is_array()) schema_error(tag, "realizations must be an array");
    for (std::size_t j = 0; j < reals.size(); ++j) {
      std::string rtag = tag + " realization " + std::to_string(j);
      const json& r = reals[j];
      Realization re;
      re.probability = number(field(r, "probability", rtag), rtag);
      re.A = matrix_of(field(r, "A", rtag), st.state_dim, rtag + " A");
      re.B = matrix_of(field(r, "B", rtag), prev_dim, rtag + " B");
      re.b = vector_of(field(r, "b", rtag), rtag + " b");
      re.cost = function_of(field(r, "cost_pieces", rtag), st.state_dim, prev_dim, rtag + " cost");
      auto it = r.find("ineq_constraints");
      if (it != r.end()) {
        if (!it->is_array()) schema_error(rtag, "ineq_constraints must be an array");
        for (const auto& g : *it)
          re.ineq.push_back(function_of(g, st.state_dim, prev_dim, rtag + " inequality"));
      }
      st.realizations.push_back(std::move(re));
    }
    prev_dim = st.state_dim;
    p.stages.push_back(std::move(st));
  }
  validate(p);
  return p;
}

}  // namespace

MultistageProblem parse_instance(std::istream& in) {
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_instance_string(buf.str());
}

MultistageProblem parse_instance_string(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ModelError(ModelErrorKind::kSyntax,
                     "syntax error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  return from_json(doc);
}

MultistageProblem load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError(ModelErrorKind::kOther, "cannot open instance file " + path);
  return parse_instance(in);
}

std::string emit_instance(const MultistageProblem& p) {
  json doc;
  doc["horizon"] = p.horizon;
  doc["x0"] = to_json(p.x0);
  json stages = json::array();
  for (const auto& s : p.stages) {
    json st;
    st["state_dim"] = s.state_dim;
    st["state_lower"] = to_json(s.state_set.lower);
    st["state_upper"] = to_json(s.state_set.upper);
    st["cost_lower_bound"] = s.cost_lower_bound;
    json reals = json::array();
    for (const auto& r : s.realizations) {
      json g = json::array();
      for (const auto& f : r.ineq) g.push_back(to_json(f));
      reals.push_back({{"probability", r.probability},
                       {"A", to_json(r.A)},
                       {"B", to_json(r.B)},
                       {"b", to_json(r.b)},
                       {"cost_pieces", to_json(r.cost)},
                       {"ineq_constraints", g}});
    }
    st["realizations"] = reals;
    stages.push_back(st);
  }
  doc["stages"] = stages;
  return doc.dump(2) + "\n";
}

}  // namespace isddp
