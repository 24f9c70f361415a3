#include "swarmsf/io.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace swarmsf::io {

using nlohmann::json;

namespace {

[[noreturn]] void schema_error(const std::string& msg) { throw Error(ErrorCode::SchemaMismatch, msg); }

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) schema_error(where + ": missing key '" + key + "'");
  return obj.at(key);
}

double as_number(const json& v, const std::string& what) {
  if (!v.is_number()) schema_error(what + " must be a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& what) {
  if (!v.is_number_integer()) schema_error(what + " must be an integer");
  return v.get<int>();
}

Vector3<double> as_vec3(const json& v, const std::string& what) {
  if (!v.is_array() || v.size() != 3) schema_error(what + " must be an array of 3 numbers");
  Vector3<double> out;
  for (int k = 0; k < 3; ++k) out(k) = as_number(v[static_cast<std::size_t>(k)], what);
  return out;
}

EndpointState<double> parse_endpoint(const json& v, const std::string& where) {
  if (!v.is_object()) schema_error(where + " must be an object");
  EndpointState<double> s;
  s.p = as_vec3(require(v, "p", where), where + ".p");
  if (v.contains("v")) s.v = as_vec3(v.at("v"), where + ".v");
  if (v.contains("a")) s.a = as_vec3(v.at("a"), where + ".a");
  return s;
}

json vec3_json(const Vector3<double>& v) { return json::array({v(0), v(1), v(2)}); }

// Flat row-major array or array of rows -> count vectors of length dim.
std::vector<Vector<double>> parse_rows(const json& data, std::size_t count, Index dim, const std::string& what) {
  if (!data.is_array()) schema_error(what + " must be an array");
  std::vector<Vector<double>> rows;
  rows.reserve(count);
  const bool nested = !data.empty() && data.front().is_array();
  if (nested) {
    if (data.size() != count) {
      schema_error(what + " has " + std::to_string(data.size()) + " rows, count says " + std::to_string(count));
    }
    for (std::size_t r = 0; r < count; ++r) {
      const auto& row = data[r];
      if (!row.is_array()) schema_error(what + " rows must be arrays");
      if (Index(row.size()) != dim) {
        throw Error(ErrorCode::DimensionMismatch, what + " row " + std::to_string(r) + " has length " +
                                                      std::to_string(row.size()) + ", expected " +
                                                      std::to_string(dim));
      }
      Vector<double> v(dim);
      for (Index k = 0; k < dim; ++k) v(k) = as_number(row[static_cast<std::size_t>(k)], what);
      rows.push_back(std::move(v));
    }
  } else {
    if (Index(data.size()) != Index(count) * dim) {
      throw Error(ErrorCode::DimensionMismatch, what + " holds " + std::to_string(data.size()) +
                                                    " values, expected count*dim = " +
                                                    std::to_string(Index(count) * dim));
    }
    for (std::size_t r = 0; r < count; ++r) {
      Vector<double> v(dim);
      for (Index k = 0; k < dim; ++k) v(k) = as_number(data[r * std::size_t(dim) + std::size_t(k)], what);
      rows.push_back(std::move(v));
    }
  }
  return rows;
}

json flat_rows(const std::vector<const Vector<double>*>& rows) {
  json out = json::array();
  for (const auto* r : rows) {
    for (Index k = 0; k < r->size(); ++k) out.push_back((*r)(k));
  }
  return out;
}

// Checks dim and the (n, m, H) sidecar of a coefficient file.
std::size_t check_coefficient_header(const json& doc, const CoefficientLayout& layout, int horizon,
                                     const std::string& what) {
  if (!doc.is_object()) schema_error(what + " must be a JSON object");
  const int dim = as_int(require(doc, "dim", what), what + ".dim");
  const int count = as_int(require(doc, "count", what), what + ".count");
  if (count < 0) schema_error(what + ".count must be >= 0");
  if (Index(dim) != layout.size()) {
    throw Error(ErrorCode::DimensionMismatch, what + " coefficient length " + std::to_string(dim) +
                                                  " does not match the problem (expected " +
                                                  std::to_string(layout.size()) + ")");
  }
  auto check = [&](const char* key, int expected) {
    if (doc.contains(key)) {
      const int got = as_int(doc.at(key), what + "." + key);
      if (got != expected) {
        throw Error(ErrorCode::DimensionMismatch, what + " was generated for " + key + "=" + std::to_string(got) +
                                                      ", active problem has " + key + "=" +
                                                      std::to_string(expected));
      }
    }
  };
  check("n", layout.robots);
  check("m", layout.degree);
  check("H", horizon);
  return static_cast<std::size_t>(count);
}

}  // namespace

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) schema_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& err) {
    schema_error(path.string() + ": " + err.what());
  }
}

void write_json(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

ProblemFile parse_problem(const json& doc) {
  if (!doc.is_object()) schema_error("problem document must be a JSON object");
  ProblemFile pf;
  auto& p = pf.problem;
  p.robots = as_int(require(doc, "n", "problem"), "n");
  p.horizon = as_int(require(doc, "H", "problem"), "H");
  p.duration = as_number(require(doc, "T", "problem"), "T");
  p.shape.a = as_number(require(doc, "a", "problem"), "a");
  p.shape.b = as_number(require(doc, "b", "problem"), "b");
  const auto& ws = require(doc, "workspace", "problem");
  p.workspace.center = as_vec3(require(ws, "center", "workspace"), "workspace.center");
  p.workspace.a_w = as_number(require(ws, "a_w", "workspace"), "workspace.a_w");
  p.workspace.b_w = as_number(require(ws, "b_w", "workspace"), "workspace.b_w");
  const auto& bc = require(doc, "boundary", "problem");
  if (!bc.is_array()) schema_error("boundary must be an array");
  for (std::size_t i = 0; i < bc.size(); ++i) {
    const std::string where = "boundary[" + std::to_string(i) + "]";
    RobotBoundary<double> rb;
    rb.start = parse_endpoint(require(bc[i], "start", where), where + ".start");
    rb.goal = parse_endpoint(require(bc[i], "goal", where), where + ".goal");
    p.boundary.push_back(rb);
  }
  if (doc.contains("m")) pf.degree = as_int(doc.at("m"), "m");
  if (doc.contains("rho")) pf.rho = as_number(doc.at("rho"), "rho");
  if (doc.contains("max_iters")) pf.max_iters = as_int(doc.at("max_iters"), "max_iters");
  if (doc.contains("tol")) pf.tol = as_number(doc.at("tol"), "tol");
  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_unsigned()) schema_error("seed must be a non-negative integer");
    pf.seed = doc.at("seed").get<std::uint64_t>();
  }
  if (doc.contains("spread")) pf.spread = as_number(doc.at("spread"), "spread");
  if (doc.contains("count")) pf.count = as_int(doc.at("count"), "count");
  return pf;
}

ProblemFile load_problem(const std::filesystem::path& path) { return parse_problem(read_json(path)); }

json problem_to_json(const SwarmProblem<double>& p) {
  json bc = json::array();
  for (const auto& rb : p.boundary) {
    bc.push_back({{"start", {{"p", vec3_json(rb.start.p)}, {"v", vec3_json(rb.start.v)}, {"a", vec3_json(rb.start.a)}}},
                  {"goal", {{"p", vec3_json(rb.goal.p)}, {"v", vec3_json(rb.goal.v)}, {"a", vec3_json(rb.goal.a)}}}});
  }
  return {{"n", p.robots},
          {"H", p.horizon},
          {"T", p.duration},
          {"a", p.shape.a},
          {"b", p.shape.b},
          {"workspace", {{"center", vec3_json(p.workspace.center)}, {"a_w", p.workspace.a_w}, {"b_w", p.workspace.b_w}}},
          {"boundary", bc}};
}

json to_json(const RunMetadata& m) {
  return {{"tool", kToolName},
          {"version", kVersion},
          {"command", m.command},
          {"seed", m.seed},
          {"rho", m.rho},
          {"tol_residual", m.tol_residual},
          {"tol_eq", m.tol_eq},
          {"feasibility_tol", m.feasibility_tol},
          {"max_iters", m.max_iters},
          {"early_stop", m.early_stop},
          {"degree", m.degree},
          {"H", m.horizon},
          {"n", m.robots},
          {"diversity_definition", kDiversityDefinition}};
}

std::string csv_header(const RunMetadata& m) {
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "# " << kToolName << ' ' << kVersion << " command=" << m.command << " seed=" << m.seed << " rho=" << m.rho
      << " tol_residual=" << m.tol_residual << " tol_eq=" << m.tol_eq << " feasibility_tol=" << m.feasibility_tol
      << " max_iters=" << m.max_iters << " early_stop=" << (m.early_stop ? 1 : 0) << " degree=" << m.degree
      << " H=" << m.horizon << " n=" << m.robots << '\n';
  out << "# diversity: " << kDiversityDefinition << '\n';
  return out.str();
}

json trajectory_to_json(const Trajectory<double>& traj) {
  json robots = json::array();
  for (Index i = 0; i < traj.robots(); ++i) {
    json pos = json::array(), vel = json::array(), acc = json::array();
    for (Index t = 0; t < traj.samples(); ++t) {
      pos.push_back(vec3_json(traj.position_at(i, t)));
      vel.push_back(vec3_json(traj.velocity_at(i, t)));
      acc.push_back(vec3_json(traj.acceleration_at(i, t)));
    }
    robots.push_back({{"robot", i}, {"position", pos}, {"velocity", vel}, {"acceleration", acc}});
  }
  return {{"time", std::vector<double>(traj.time.data(), traj.time.data() + traj.time.size())}, {"robots", robots}};
}

void write_trajectories_csv(std::ostream& out, const std::vector<std::pair<std::size_t, Trajectory<double>>>& trajs) {
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "proposal_id,robot,t,x,y,z,vx,vy,vz,ax,ay,az\n";
  for (const auto& [id, traj] : trajs) {
    for (Index i = 0; i < traj.robots(); ++i) {
      for (Index t = 0; t < traj.samples(); ++t) {
        const auto p = traj.position_at(i, t);
        const auto v = traj.velocity_at(i, t);
        const auto a = traj.acceleration_at(i, t);
        out << id << ',' << i << ',' << traj.time(t) << ',' << p(0) << ',' << p(1) << ',' << p(2) << ',' << v(0)
            << ',' << v(1) << ',' << v(2) << ',' << a(0) << ',' << a(1) << ',' << a(2) << '\n';
      }
    }
  }
}

json violation_to_json(const ViolationReport<double>& rep, int robots) {
  json pairs = json::array();
  const auto ids = robot_pairs(robots);
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const auto col = rep.inter_robot_margin.col(Index(k));
    pairs.push_back({{"i", ids[k].first}, {"j", ids[k].second},
                     {"margin", std::vector<double>(col.data(), col.data() + col.size())}});
  }
  json ws = json::array();
  for (Index i = 0; i < rep.workspace_margin.cols(); ++i) {
    const auto col = rep.workspace_margin.col(i);
    ws.push_back({{"robot", i}, {"margin", std::vector<double>(col.data(), col.data() + col.size())}});
  }
  return {{"feasible", rep.feasible},
          {"tol", rep.tol},
          {"tol_eq", rep.tol_eq},
          {"boundary_residual", rep.boundary_residual},
          {"max_workspace_margin", rep.max_workspace_margin()},
          {"min_inter_robot_margin", rep.inter_robot_margin.size() ? json(rep.min_inter_robot_margin()) : json(nullptr)},
          {"inter_robot", pairs},
          {"workspace", ws}};
}

std::string violation_csv_columns() {
  return "proposal_id,converged,feasible,max_workspace_margin,min_inter_robot_margin,boundary_residual\n";
}

std::string violation_csv_row(std::size_t id, bool converged, const ViolationReport<double>& rep) {
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << id << ',' << (converged ? 1 : 0) << ',' << (rep.feasible ? 1 : 0) << ',' << rep.max_workspace_margin() << ',';
  if (rep.inter_robot_margin.size()) out << rep.min_inter_robot_margin();
  out << ',' << rep.boundary_residual << '\n';
  return out.str();
}

json solve_result_to_json(const SolveResult<double>& r, bool include_vectors) {
  json out = {{"iterations_run", r.iterations_run},
              {"converged", r.converged},
              {"displacement", r.displacement},
              {"seconds", r.seconds},
              {"final_residual_inf", r.residual_inf.empty() ? json(nullptr) : json(r.residual_inf.back())},
              {"final_residual_l2", r.residual_l2.empty() ? json(nullptr) : json(r.residual_l2.back())},
              {"residual_inf", r.residual_inf},
              {"residual_l2", r.residual_l2}};
  if (include_vectors) {
    out["xi_final"] = std::vector<double>(r.xi_final.data(), r.xi_final.data() + r.xi_final.size());
    out["lambda_final"] = std::vector<double>(r.lambda_final.data(), r.lambda_final.data() + r.lambda_final.size());
  }
  return out;
}

void write_residuals_csv(std::ostream& out, const BatchResult<double>& batch) {
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "proposal_id,iter,res_inf,res_l2\n";
  for (std::size_t i = 0; i < batch.items.size(); ++i) {
    if (!batch.items[i].ok()) continue;
    const auto& r = *batch.items[i].result;
    for (std::size_t k = 0; k < r.residual_inf.size(); ++k) {
      out << i << ',' << (k + 1) << ',' << r.residual_inf[k] << ',' << r.residual_l2[k] << '\n';
    }
  }
}

json batch_report_to_json(const BatchReport& rep) {
  auto nan_to_null = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
  json residuals = json::array();
  for (double v : rep.final_residual_inf) residuals.push_back(nan_to_null(v));
  return {{"batch_size", rep.batch_size},
          {"converged", rep.converged},
          {"feasible", rep.feasible},
          {"failed", rep.failed},
          {"feasible_fraction", rep.feasible_fraction ? json(*rep.feasible_fraction) : json(nullptr)},
          {"feasibility_tol", rep.feasibility_tol},
          {"mean_pairwise_cosine", nan_to_null(rep.diversity.mean_cosine)},
          {"diversity_pairs", rep.diversity.pairs},
          {"diversity_degenerate", rep.diversity.degenerate},
          {"diversity_definition", kDiversityDefinition},
          {"final_residual_inf", residuals},
          {"per_proposal_seconds", rep.per_proposal_seconds},
          {"total_seconds", rep.total_seconds}};
}

json proposals_to_json(const ProposalBatch<double>& batch, const CoefficientLayout& layout, int horizon) {
  std::vector<const Vector<double>*> rows;
  for (const auto& p : batch.proposals) rows.push_back(&p);
  return {{"format", "swarmsf-proposals"},
          {"dim", layout.size()},
          {"count", batch.size()},
          {"n", layout.robots},
          {"m", layout.degree},
          {"H", horizon},
          {"provenance", to_string(batch.provenance)},
          {"seed", batch.seed},
          {"spread", batch.spread},
          {"data", flat_rows(rows)}};
}

void save_proposals(const ProposalBatch<double>& batch, const std::filesystem::path& path,
                    const CoefficientLayout& layout, int horizon) {
  write_json(path, proposals_to_json(batch, layout, horizon));
}

ProposalBatch<double> parse_proposals(const json& doc, const SafetyFilter<double>& filter) {
  const auto count = check_coefficient_header(doc, filter.layout(), filter.problem().horizon, "proposals");
  ProposalBatch<double> batch;
  batch.proposals = parse_rows(require(doc, "data", "proposals"), count, filter.layout().size(), "proposals.data");
  batch.provenance = Provenance::Loaded;
  if (doc.contains("seed") && doc.at("seed").is_number_unsigned()) batch.seed = doc.at("seed").get<std::uint64_t>();
  if (doc.contains("spread") && doc.at("spread").is_number()) batch.spread = doc.at("spread").get<double>();
  batch.projected.assign(count, false);
  const auto& projector = filter.projector();
  const double tol = projector.tolerance();
  for (std::size_t k = 0; k < count; ++k) {
    if (!batch.proposals[k].allFinite()) schema_error("proposal " + std::to_string(k) + " has non-finite values");
    if (projector.residual(batch.proposals[k]) > tol) {
      batch.proposals[k] = projector.project(batch.proposals[k]);
      batch.projected[k] = true;
      batch.provenance = Provenance::LoadedProjected;
    }
  }
  return batch;
}

ProposalBatch<double> load_proposals(const std::filesystem::path& path, const SafetyFilter<double>& filter) {
  return parse_proposals(read_json(path), filter);
}

void save_warmstart(const std::vector<WarmStart<double>>& starts, const std::filesystem::path& path,
                    const CoefficientLayout& layout, int horizon) {
  std::vector<const Vector<double>*> xs, ls;
  for (const auto& s : starts) {
    require_size(s.xi0.size(), layout.size(), "warm-start xi0");
    require_size(s.lambda0.size(), layout.size(), "warm-start lambda0");
    xs.push_back(&s.xi0);
    ls.push_back(&s.lambda0);
  }
  write_json(path, {{"format", "swarmsf-warmstart"},
                    {"dim", layout.size()},
                    {"count", starts.size()},
                    {"n", layout.robots},
                    {"m", layout.degree},
                    {"H", horizon},
                    {"xi0", flat_rows(xs)},
                    {"lambda0", flat_rows(ls)}});
}

std::vector<WarmStart<double>> parse_warmstart(const json& doc, const CoefficientLayout& layout, int horizon) {
  const auto count = check_coefficient_header(doc, layout, horizon, "warmstart");
  auto xs = parse_rows(require(doc, "xi0", "warmstart"), count, layout.size(), "warmstart.xi0");
  auto ls = parse_rows(require(doc, "lambda0", "warmstart"), count, layout.size(), "warmstart.lambda0");
  std::vector<WarmStart<double>> out(count);
  for (std::size_t k = 0; k < count; ++k) out[k] = {std::move(xs[k]), std::move(ls[k])};
  return out;
}

std::vector<WarmStart<double>> load_warmstart(const std::filesystem::path& path, const CoefficientLayout& layout,
                                              int horizon) {
  return parse_warmstart(read_json(path), layout, horizon);
}

}  // namespace swarmsf::io
