#include "dualsddp/json_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "dualsddp/errors.hpp"

namespace dualsddp {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void schema_fail(const std::string& path, const std::string& msg) {
  throw SchemaError(path + ": " + msg);
}

double number_at(const json& j, const std::string& path) {
  if (!j.is_number()) schema_fail(path, "expected a number");
  return j.get<double>();
}

Vec vector_at(const json& j, const std::string& path) {
  if (!j.is_array()) schema_fail(path, "expected an array of numbers");
  Vec out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(number_at(j[i], path + "/" + std::to_string(i)));
  }
  return out;
}

SparseMatrix matrix_at(const json& j, int rows, int cols, const std::string& path) {
  if (!j.is_array()) schema_fail(path, "expected an array of [row, col, value] triplets");
  SparseMatrix m(rows, cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string tp = path + "/" + std::to_string(i);
    const json& t = j[i];
    if (!t.is_array() || t.size() != 3) schema_fail(tp, "expected a [row, col, value] triplet");
    if (!t[0].is_number_integer() || !t[1].is_number_integer()) {
      schema_fail(tp, "triplet indices must be integers");
    }
    const int r = t[0].get<int>();
    const int c = t[1].get<int>();
    if (r < 0 || r >= rows) schema_fail(tp + "/0", "row index out of range");
    if (c < 0 || c >= cols) schema_fail(tp + "/1", "column index out of range");
    m.add(r, c, number_at(t[2], tp + "/2"));
  }
  return m;
}

RiskSpec risk_at(const json& j, int num_realizations, const std::string& path) {
  if (!j.is_object()) schema_fail(path, "expected a risk object");
  if (!j.contains("type") || !j["type"].is_string()) schema_fail(path + "/type", "missing risk type");
  RiskSpec risk;
  const std::string type = j["type"].get<std::string>();
  if (type == "mean_avar") {
    risk.type = RiskSpec::Type::MeanAvar;
    if (!j.contains("alpha")) schema_fail(path + "/alpha", "missing");
    if (!j.contains("beta")) schema_fail(path + "/beta", "missing");
    risk.alpha = number_at(j["alpha"], path + "/alpha");
    risk.beta = number_at(j["beta"], path + "/beta");
    if (!(risk.alpha > 0.0) || risk.alpha > 1.0) {
      schema_fail(path + "/alpha", "must lie in (0, 1]");
    }
    if (risk.beta < 0.0 || risk.beta > 1.0) schema_fail(path + "/beta", "must lie in [0, 1]");
  } else if (type == "polyhedral") {
    risk.type = RiskSpec::Type::Polyhedral;
    if (!j.contains("vertices") || !j["vertices"].is_array()) {
      schema_fail(path + "/vertices", "missing vertex list");
    }
    for (std::size_t k = 0; k < j["vertices"].size(); ++k) {
      Vec q = vector_at(j["vertices"][k], path + "/vertices/" + std::to_string(k));
      if (static_cast<int>(q.size()) != num_realizations) {
        schema_fail(path + "/vertices/" + std::to_string(k),
                    "vertex length does not match realization count");
      }
      risk.vertices.push_back(std::move(q));
    }
  } else {
    schema_fail(path + "/type", "unknown risk type '" + type + "'");
  }
  return risk;
}

json matrix_to_json(const SparseMatrix& m) {
  json out = json::array();
  for (const Triplet& t : m.entries) out.push_back(json::array({t.row, t.col, t.value}));
  return out;
}

}  // namespace

Instance parse_instance_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) schema_fail("", "top level must be an object");

  Instance inst;
  if (root.contains("name")) {
    if (!root["name"].is_string()) schema_fail("/name", "expected a string");
    inst.name = root["name"].get<std::string>();
  }
  if (root.contains("description")) {
    if (!root["description"].is_string()) schema_fail("/description", "expected a string");
    inst.description = root["description"].get<std::string>();
  }
  if (!root.contains("horizon") || !root["horizon"].is_number_integer()) {
    schema_fail("/horizon", "missing integer horizon");
  }
  inst.horizon = root["horizon"].get<int>();
  if (!root.contains("x0")) schema_fail("/x0", "missing");
  inst.x0 = vector_at(root["x0"], "/x0");
  if (!root.contains("stages") || !root["stages"].is_array()) {
    schema_fail("/stages", "missing stage list");
  }

  for (std::size_t s = 0; s < root["stages"].size(); ++s) {
    const std::string sp = "/stages/" + std::to_string(s);
    const json& js = root["stages"][s];
    if (!js.is_object()) schema_fail(sp, "expected a stage object");
    Stage st;
    if (!js.contains("xbar")) schema_fail(sp + "/xbar", "missing");
    st.xbar = vector_at(js["xbar"], sp + "/xbar");
    if (!js.contains("ybar")) schema_fail(sp + "/ybar", "missing");
    st.ybar = vector_at(js["ybar"], sp + "/ybar");
    if (!js.contains("lipschitz")) schema_fail(sp + "/lipschitz", "missing");
    if (js["lipschitz"].is_number()) {
      const int prev_dim = s == 0 ? static_cast<int>(inst.x0.size())
                                  : static_cast<int>(inst.stages.back().xbar.size());
      st.lipschitz.assign(static_cast<std::size_t>(prev_dim),
                          number_at(js["lipschitz"], sp + "/lipschitz"));
    } else {
      st.lipschitz = vector_at(js["lipschitz"], sp + "/lipschitz");
    }
    if (!js.contains("realizations") || !js["realizations"].is_array() ||
        js["realizations"].empty()) {
      schema_fail(sp + "/realizations", "missing realization list");
    }
    const int nx = static_cast<int>(st.xbar.size());
    const int ny = static_cast<int>(st.ybar.size());
    const int prev_dim = s == 0 ? static_cast<int>(inst.x0.size())
                                : static_cast<int>(inst.stages.back().xbar.size());
    for (std::size_t r = 0; r < js["realizations"].size(); ++r) {
      const std::string rp = sp + "/realizations/" + std::to_string(r);
      const json& jr = js["realizations"][r];
      if (!jr.is_object()) schema_fail(rp, "expected a realization object");
      StageRealization real;
      if (!jr.contains("p")) schema_fail(rp + "/p", "missing");
      real.probability = number_at(jr["p"], rp + "/p");
      if (!jr.contains("d")) schema_fail(rp + "/d", "missing");
      real.d = vector_at(jr["d"], rp + "/d");
      if (!jr.contains("c")) schema_fail(rp + "/c", "missing");
      real.c = vector_at(jr["c"], rp + "/c");
      if (static_cast<int>(real.c.size()) != ny) {
        schema_fail(rp + "/c", "length does not match ybar");
      }
      const int m = static_cast<int>(real.d.size());
      if (!jr.contains("A")) schema_fail(rp + "/A", "missing");
      real.A = matrix_at(jr["A"], m, nx, rp + "/A");
      if (!jr.contains("B")) schema_fail(rp + "/B", "missing");
      real.B = matrix_at(jr["B"], m, prev_dim, rp + "/B");
      if (!jr.contains("T")) schema_fail(rp + "/T", "missing");
      real.T = matrix_at(jr["T"], m, ny, rp + "/T");
      st.realizations.push_back(std::move(real));
    }
    if (!js.contains("risk")) schema_fail(sp + "/risk", "missing");
    st.risk = risk_at(js["risk"], st.num_realizations(), sp + "/risk");
    if (js.contains("value_floor")) {
      st.value_floor = number_at(js["value_floor"], sp + "/value_floor");
    }
    inst.stages.push_back(std::move(st));
  }

  const std::vector<std::string> report = validate_instance(inst);
  if (!report.empty()) {
    std::ostringstream os;
    os << "instance failed validation:";
    for (const std::string& r : report) os << "\n  - " << r;
    throw ValidationError(os.str());
  }
  return inst;
}

std::string serialize_instance_json(const Instance& inst) {
  json root;
  root["name"] = inst.name;
  root["description"] = inst.description;
  root["horizon"] = inst.horizon;
  root["x0"] = inst.x0;
  root["stages"] = json::array();
  for (const Stage& st : inst.stages) {
    json js;
    js["xbar"] = st.xbar;
    js["ybar"] = st.ybar;
    js["lipschitz"] = st.lipschitz;
    json jr;
    if (st.risk.type == RiskSpec::Type::MeanAvar) {
      jr["type"] = "mean_avar";
      jr["alpha"] = st.risk.alpha;
      jr["beta"] = st.risk.beta;
    } else {
      jr["type"] = "polyhedral";
      jr["vertices"] = st.risk.vertices;
    }
    js["risk"] = std::move(jr);
    if (st.value_floor.has_value()) js["value_floor"] = *st.value_floor;
    js["realizations"] = json::array();
    for (const StageRealization& r : st.realizations) {
      json jreal;
      jreal["p"] = r.probability;
      jreal["A"] = matrix_to_json(r.A);
      jreal["B"] = matrix_to_json(r.B);
      jreal["T"] = matrix_to_json(r.T);
      jreal["d"] = r.d;
      jreal["c"] = r.c;
      js["realizations"].push_back(std::move(jreal));
    }
    root["stages"].push_back(std::move(js));
  }
  return root.dump(2) + "\n";
}

Instance load_instance_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open instance file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_instance_json(buf.str());
}

void save_instance_file(const Instance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write instance file '" + path + "'");
  out << serialize_instance_json(inst);
}

}  // namespace dualsddp
