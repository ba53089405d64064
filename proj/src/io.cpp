#include "rtmpc/io.hpp"

#include <fstream>
#include <sstream>

#include "rtmpc/errors.hpp"

namespace rtmpc {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Unbounded: return "Unbounded";
    case ErrorCode::DimensionUnsupported: return "DimensionUnsupported";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NoFiniteDetermination: return "NoFiniteDetermination";
    case ErrorCode::EmptyTightening: return "EmptyTightening";
    case ErrorCode::EmptyStageSet: return "EmptyStageSet";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::StageInfeasible: return "StageInfeasible";
    case ErrorCode::TemplateTooLarge: return "TemplateTooLarge";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::Config, "field '" + field + "': " + what);
}

json points_to_json(const std::vector<Point2>& pts) {
  json arr = json::array();
  for (const auto& p : pts) arr.push_back({p.x(), p.y()});
  return arr;
}

}  // namespace

json matrix_to_json(const MatrixXd& M) {
  json rows = json::array();
  for (int i = 0; i < M.rows(); ++i) {
    json r = json::array();
    for (int j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

json vector_to_json(const VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

MatrixXd matrix_from_json(const json& j, const std::string& field) {
  if (j.is_number()) return MatrixXd::Constant(1, 1, j.get<double>());
  if (!j.is_array()) bad(field, "expected an array of rows");
  const int rows = static_cast<int>(j.size());
  if (rows == 0) return MatrixXd(0, 0);
  if (!j[0].is_array()) bad(field, "expected an array of rows");
  const int cols = static_cast<int>(j[0].size());
  MatrixXd M(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != cols) bad(field, "rows have different lengths");
    for (int c = 0; c < cols; ++c) {
      if (!j[i][c].is_number()) bad(field, "entries must be numbers");
      M(i, c) = j[i][c].get<double>();
    }
  }
  return M;
}

VectorXd vector_from_json(const json& j, const std::string& field) {
  if (j.is_number()) return VectorXd::Constant(1, j.get<double>());
  if (!j.is_array()) bad(field, "expected an array of numbers");
  VectorXd v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i) {
    if (!j[i].is_number()) bad(field, "entries must be numbers");
    v(i) = j[i].get<double>();
  }
  return v;
}

json polytope_to_json(const HPolytope& P) {
  return {{"F", matrix_to_json(P.F())}, {"g", vector_to_json(P.g())}, {"dim", P.dim()}};
}

HPolytope polytope_from_json(const json& j, const std::string& field) {
  if (!j.is_object() || !j.contains("F") || !j.contains("g")) bad(field, "expected an object with 'F' and 'g'");
  MatrixXd F = matrix_from_json(j["F"], field + ".F");
  const VectorXd g = vector_from_json(j["g"], field + ".g");
  if (F.rows() == 0) {
    const int dim = j.value("dim", 0);
    if (dim <= 0) bad(field, "a set without rows needs 'dim'");
    return HPolytope::Universe(dim);
  }
  if (F.rows() != g.size()) bad(field, "F and g have different row counts");
  try {
    return HPolytope(F, g);
  } catch (const Error& e) {
    bad(field, e.what());
  }
}

json support_set_to_json(const SupportSet& S) {
  json terms = json::array();
  for (const auto& t : S.terms()) terms.push_back({{"M", matrix_to_json(t.M)}, {"base", polytope_to_json(t.base)}});
  return {{"dim", S.dim()}, {"scale", S.scale()}, {"terms", terms}};
}

SupportSet support_set_from_json(const json& j, const std::string& field) {
  if (!j.is_object()) bad(field, "expected an object");
  std::vector<SupportTerm> terms;
  for (const auto& t : j.at("terms")) {
    terms.push_back({matrix_from_json(t.at("M"), field + ".M"), polytope_from_json(t.at("base"), field + ".base")});
  }
  if (terms.empty()) return SupportSet(j.at("dim").get<int>());
  return SupportSet(std::move(terms), j.at("scale").get<double>());
}

Config default_config() {
  Config c;
  c.model = case_study_model();
  c.weights = case_study_weights();
  return c;
}

Config parse_config(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    int line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string msg = e.what();
    const auto p = msg.find("parse error");
    if (p != std::string::npos) msg = msg.substr(p);
    throw Error(ErrorCode::Config, source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + msg);
  }
  auto locate = [&](const std::string& key) {
    const auto pos = text.find("\"" + key + "\"");
    if (pos == std::string::npos) return source;
    int line = 1;
    for (std::size_t i = 0; i < pos; ++i) line += text[i] == '\n';
    return source + ":" + std::to_string(line);
  };
  if (!j.is_object()) throw Error(ErrorCode::Config, source + ":1: top level must be an object");

  Config c = default_config();
  static const char* known[] = {"A", "B", "Q", "R", "X", "U", "W", "N", "mbar", "eps_rpi", "gamma_safety"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok |= it.key() == k;
    if (!ok) throw Error(ErrorCode::Config, locate(it.key()) + ": unknown field '" + it.key() + "'");
  }
  std::string current;
  try {
    auto mat = [&](const char* key, MatrixXd& dst) {
      current = key;
      if (j.contains(key)) dst = matrix_from_json(j[key], key);
    };
    auto set = [&](const char* key, HPolytope& dst) {
      current = key;
      if (j.contains(key)) dst = polytope_from_json(j[key], key);
    };
    mat("A", c.model.A);
    mat("B", c.model.B);
    mat("Q", c.weights.Q);
    mat("R", c.weights.R);
    set("X", c.model.X);
    set("U", c.model.U);
    set("W", c.model.W);
    current = "N";
    if (j.contains("N")) c.N = j["N"].get<int>();
    current = "mbar";
    if (j.contains("mbar")) c.mbar = j["mbar"].get<int>();
    current = "eps_rpi";
    if (j.contains("eps_rpi")) c.eps_rpi = j["eps_rpi"].get<double>();
    current = "gamma_safety";
    if (j.contains("gamma_safety")) c.gamma_safety = j["gamma_safety"].get<double>();

    current = "A";
    if (c.model.A.rows() != c.model.A.cols() || c.model.A.rows() == 0) bad("A", "must be square and nonempty");
    current = "B";
    c.model.check_dimensions();
    current = "Q";
    if (c.weights.Q.rows() != c.model.nx()) bad("Q", "must be nx-by-nx");
    current = "R";
    if (c.weights.R.rows() != c.model.nu()) bad("R", "must be nu-by-nu");
    current = "Q";
    c.weights.check(c.model.nx(), c.model.nu());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, locate(current) + ": field '" + current + "': " + e.what());
  } catch (const Error& e) {
    std::string what = e.what();
    if (what.find("R must") != std::string::npos) current = "R";
    throw Error(ErrorCode::Config, locate(current) + ": " + what);
  }
  if (c.N < 1) throw Error(ErrorCode::Config, locate("N") + ": field 'N': must be at least 1");
  if (c.mbar < 1) throw Error(ErrorCode::Config, locate("mbar") + ": field 'mbar': must be at least 1");
  if (!(c.eps_rpi > 0.0)) throw Error(ErrorCode::Config, locate("eps_rpi") + ": field 'eps_rpi': must be positive");
  if (!(c.gamma_safety >= 1.0)) {
    throw Error(ErrorCode::Config, locate("gamma_safety") + ": field 'gamma_safety': must be at least 1");
  }
  return c;
}

Config load_config(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, e.what());
  }
  return parse_config(text, path);
}

json config_to_json(const Config& c) {
  return {{"A", matrix_to_json(c.model.A)},
          {"B", matrix_to_json(c.model.B)},
          {"Q", matrix_to_json(c.weights.Q)},
          {"R", matrix_to_json(c.weights.R)},
          {"X", polytope_to_json(c.model.X)},
          {"U", polytope_to_json(c.model.U)},
          {"W", polytope_to_json(c.model.W)},
          {"N", c.N},
          {"mbar", c.mbar},
          {"eps_rpi", c.eps_rpi},
          {"gamma_safety", c.gamma_safety}};
}

json bundle_to_json(const Bundle& b) {
  const TubeSynthesis& s = b.syn;
  json val = json::array();
  for (const auto& i : b.report.items) val.push_back({{"name", i.name}, {"pass", i.pass}, {"margin", i.margin}});
  json zh = polytope_to_json(s.Z_h);
  zh["approximate"] = s.Z_h_approximate;
  if (b.config.model.nx() == 2 && !s.Z_h_approximate) zh["vertices"] = points_to_json(polygon_vertices(s.Z_h));
  json xt = polytope_to_json(s.X_T);
  if (b.config.model.nx() == 2) xt["vertices"] = points_to_json(polygon_vertices(s.X_T));
  return {{"schema", kBundleSchema},
          {"config", config_to_json(b.config)},
          {"K", matrix_to_json(s.K)},
          {"P", matrix_to_json(s.P)},
          {"Q", matrix_to_json(s.Q)},
          {"R", matrix_to_json(s.R)},
          {"Z", support_set_to_json(s.Z)},
          {"Z_h", zh},
          {"alpha", s.alpha},
          {"s", s.s},
          {"rpi_M", s.rpi_M},
          {"X_T", xt},
          {"X_tight", polytope_to_json(s.X_tight)},
          {"U_tight", polytope_to_json(s.U_tight)},
          {"gamma", b.gamma},
          {"validation", val},
          {"valid", b.report.all_pass()}};
}

Bundle bundle_from_json(const json& j) {
  if (!j.is_object() || j.value("schema", "") != kBundleSchema) {
    throw Error(ErrorCode::Config, std::string("bundle: expected schema ") + kBundleSchema);
  }
  Bundle b;
  try {
    b.config = parse_config(j.at("config").dump(), "bundle.config");
    TubeSynthesis& s = b.syn;
    s.K = matrix_from_json(j.at("K"), "K");
    s.P = matrix_from_json(j.at("P"), "P");
    s.Q = matrix_from_json(j.at("Q"), "Q");
    s.R = matrix_from_json(j.at("R"), "R");
    s.Z = support_set_from_json(j.at("Z"), "Z");
    s.Z_h = polytope_from_json(j.at("Z_h"), "Z_h");
    s.Z_h_approximate = j.at("Z_h").value("approximate", false);
    s.alpha = j.at("alpha").get<double>();
    s.s = j.at("s").get<int>();
    s.rpi_M = j.at("rpi_M").get<double>();
    s.X_T = polytope_from_json(j.at("X_T"), "X_T");
    s.X_tight = polytope_from_json(j.at("X_tight"), "X_tight");
    s.U_tight = polytope_from_json(j.at("U_tight"), "U_tight");
    b.gamma = j.at("gamma").get<double>();
    for (const auto& i : j.at("validation")) {
      b.report.items.push_back({i.at("name").get<std::string>(), i.at("pass").get<bool>(), i.at("margin").get<double>()});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("bundle: ") + e.what());
  }
  return b;
}

void save_bundle(const std::string& path, const Bundle& b) {
  write_text_file(path, bundle_to_json(b).dump(2) + "\n");
}

Bundle load_bundle(const std::string& path) {
  const std::string text = read_text_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Config, path + ": " + e.what());
  }
  return bundle_from_json(j);
}

json explicit_map_to_json(const ExplicitStageMap& m) {
  json regions = json::array();
  for (const auto& r : m.regions) {
    regions.push_back({{"F", matrix_to_json(r.F)},
                       {"g", vector_to_json(r.g)},
                       {"A_law", matrix_to_json(r.A_law)},
                       {"b_law", vector_to_json(r.b_law)},
                       {"active", r.active}});
  }
  return {{"stage_kind", to_string(m.kind)},
          {"param_dim", m.param_dim},
          {"num_vars", m.num_vars},
          {"box_lo", vector_to_json(m.box_lo)},
          {"box_hi", vector_to_json(m.box_hi)},
          {"regions", regions}};
}

ExplicitStageMap explicit_map_from_json(const json& j) {
  ExplicitStageMap m;
  const std::string kind = j.at("stage_kind").get<std::string>();
  m.kind = kind == "first" ? StageKind::First : kind == "terminal" ? StageKind::Terminal : StageKind::Middle;
  m.param_dim = j.at("param_dim").get<int>();
  m.num_vars = j.at("num_vars").get<int>();
  m.box_lo = vector_from_json(j.at("box_lo"), "box_lo");
  m.box_hi = vector_from_json(j.at("box_hi"), "box_hi");
  for (const auto& r : j.at("regions")) {
    CriticalRegion cr;
    cr.F = matrix_from_json(r.at("F"), "F");
    if (cr.F.rows() == 0) cr.F.resize(0, m.param_dim);
    cr.g = vector_from_json(r.at("g"), "g");
    cr.A_law = matrix_from_json(r.at("A_law"), "A_law");
    cr.b_law = vector_from_json(r.at("b_law"), "b_law");
    cr.active = r.at("active").get<std::vector<int>>();
    m.regions.push_back(std::move(cr));
  }
  return m;
}

json explicit_maps_to_json(const ExplicitStageMaps& m) {
  return {{"first", explicit_map_to_json(m.first)},
          {"middle", explicit_map_to_json(m.middle)},
          {"terminal", explicit_map_to_json(m.terminal)}};
}

ExplicitStageMaps explicit_maps_from_json(const json& j) {
  ExplicitStageMaps m;
  m.first = explicit_map_from_json(j.at("first"));
  m.middle = explicit_map_from_json(j.at("middle"));
  m.terminal = explicit_map_from_json(j.at("terminal"));
  return m;
}

std::size_t serialized_size(const ExplicitStageMap& m) {
  return explicit_map_to_json(m).dump().size();
}

json tube_json(const SimTrace& trace, const TubeSynthesis& syn) {
  if (syn.Z_h.dim() != 2) throw Error(ErrorCode::DimensionUnsupported, "tube_json: planar models only");
  const std::vector<Point2> Z = polygon_vertices(syn.Z_h);
  const std::vector<Point2> XT = polygon_vertices(syn.X_T);
  json steps = json::array();
  for (int k = 0; k < trace.steps(); ++k) {
    std::vector<Point2> poly;
    const Point2 q(trace.q[k](0), trace.q[k](1));
    for (const auto& z : Z) poly.push_back(z + q);
    steps.push_back({{"k", k}, {"q", {q.x(), q.y()}}, {"x", vector_to_json(trace.x[k])}, {"polygon", points_to_json(poly)}});
  }
  return {{"Z", points_to_json(Z)},
          {"X_T", points_to_json(XT)},
          {"X_T_plus_Z", points_to_json(minkowski_sum_vertices(XT, Z))},
          {"steps", steps}};
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  f << text;
  if (!f) throw Error(ErrorCode::InvalidArgument, "error writing " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::InvalidArgument, "cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace rtmpc
