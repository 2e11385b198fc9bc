// pfm: partial functional maps from the command line.
//
//   pfm match   --config job.cfg [--k 60 ...] | --batch pairs.csv
//   pfm eval    --corr out/corr.csv --truth truth.csv --full full.off --out eval/
//   pfm gen     cut|holes|synthetic ...
//   pfm perturb --mesh shape.off --keep 0.6 --out perturb/
//
// Exit codes: 0 ok, 1 numerical failure, 2 usage or I/O error.

#include "pfm/pfm.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <mutex>

namespace {

using namespace pfm;
namespace fs = std::filesystem;
using json = nlohmann::json;

int exit_code_for(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const InputError&) {
    return 2;
  } catch (const NumericalError&) {
    return 1;
  } catch (const std::exception&) {
    return 1;
  }
}

json error_json(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const InputError& x) {
    return {{"error", {{"kind", "input"}, {"message", x.what()}}}};
  } catch (const NumericalError& x) {
    return {{"error", {{"kind", "numerical"}, {"message", x.what()}}}};
  } catch (const std::exception& x) {
    return {{"error", {{"kind", "internal"}, {"message", x.what()}}}};
  }
}

Vec3 to_vec3(const std::vector<double>& v, const char* what) {
  if (v.size() != 3) throw InputError(std::string(what) + " needs three comma-separated numbers");
  return {v[0], v[1], v[2]};
}

/// file vertex index -> kept vertex index (-1 where dropped)
std::vector<Index> inverse_index(const LoadedMesh& m, Index file_vertices) {
  std::vector<Index> inv(static_cast<std::size_t>(file_vertices), -1);
  for (std::size_t i = 0; i < m.original_index.size(); ++i) inv[static_cast<std::size_t>(m.original_index[i])] = static_cast<Index>(i);
  return inv;
}

Index max_file_index(const LoadedMesh& m) {
  return m.original_index.empty() ? 0 : *std::max_element(m.original_index.begin(), m.original_index.end()) + 1;
}

/// Descriptor file rows follow the mesh file numbering.
Matrix load_descriptors(const fs::path& path, const LoadedMesh& mesh) {
  const Matrix raw = read_matrix(path);
  if (raw.rows() < max_file_index(mesh))
    throw InputError(path.string() + ": " + std::to_string(raw.rows()) + " descriptor rows for a mesh with " +
                     std::to_string(max_file_index(mesh)) + " vertices");
  Matrix out(mesh.mesh.num_vertices(), raw.cols());
  for (Index i = 0; i < out.rows(); ++i) out.row(i) = raw.row(mesh.original_index[static_cast<std::size_t>(i)]);
  return out;
}

json run_match(const JobConfig& cfg) {
  cfg.validate();
  const LoadedMesh part = load_mesh(cfg.part);
  const LoadedMesh full = load_mesh(cfg.full);
  MatchSettings s;
  s.energy = cfg.energy;
  s.solver = cfg.solver;
  s.shot_radius = cfg.shot_radius;
  Matrix F, G;
  const bool given = !cfg.descriptors_part.empty();
  if (given) {
    F = load_descriptors(cfg.descriptors_part, part);
    G = load_descriptors(cfg.descriptors_full, full);
  }
  const MatchOutput out = match_shapes(part.mesh, full.mesh, s, given ? &F : nullptr, given ? &G : nullptr);
  write_match_outputs(cfg.out, part.mesh, full.mesh, out, part.original_index, full.original_index);
  return {{"out", cfg.out.string()},
          {"rank", out.pair.rank},
          {"outer_iterations", out.match.outer_iterations},
          {"converged", out.match.converged},
          {"final_energy", out.match.energy_trace.back().total},
          {"flags", out.match.flags}};
}

int cmd_match(const fs::path& config_path, const std::vector<std::pair<std::string, std::string>>& overrides,
              const fs::path& batch) {
  JobConfig base;
  if (!config_path.empty()) base.load(config_path);
  for (const auto& [k, v] : overrides) base.set(k, v);

  if (batch.empty()) {
    std::cout << run_match(base).dump(2) << '\n';
    return 0;
  }

  // one job per manifest row; columns are config keys (part, full and out at least)
  const CsvTable table = read_csv(batch);
  for (const char* required : {"part", "full", "out"}) (void)table.column(required);
  std::vector<JobConfig> jobs;
  for (const auto& row : table.rows) {
    JobConfig c = base;
    for (std::size_t i = 0; i < row.size(); ++i) c.set(table.header[i], row[i]);
    jobs.push_back(std::move(c));
  }
  const int limit = std::max(1, std::min({base.jobs, thread_count(), static_cast<int>(jobs.size())}));
  thread_count() = std::max(1, thread_count() / limit);
  log::info("running " + std::to_string(jobs.size()) + " jobs, " + std::to_string(limit) + " at a time");

  std::vector<json> results(jobs.size());
  std::vector<int> codes(jobs.size(), 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < jobs.size();) {
      try {
        results[i] = run_match(jobs[i]);
      } catch (...) {
        codes[i] = exit_code_for(std::current_exception());
        results[i] = error_json(std::current_exception());
        results[i]["out"] = jobs[i].out.string();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < limit; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  std::cout << json(results).dump(2) << '\n';
  return *std::max_element(codes.begin(), codes.end());
}

/// Vertex pairs (a, b) from a two-column CSV in file numbering.
std::vector<std::pair<Index, Index>> read_pairs(const fs::path& path, const char* first, const char* second) {
  const CsvTable t = read_csv(path);
  const std::size_t a = t.column(first), b = t.column(second);
  std::vector<std::pair<Index, Index>> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) out.emplace_back(parse_index(r[a]), parse_index(r[b]));
  return out;
}

int cmd_eval(const fs::path& corr_path, const fs::path& truth_path, const fs::path& full_path, const fs::path& out,
             double max_threshold, int steps) {
  if (!(max_threshold > 0.0) || steps < 2) throw InputError("eval: need a positive threshold range and at least 2 steps");
  const LoadedMesh full = load_mesh(full_path);
  const std::vector<Index> inv = inverse_index(full, max_file_index(full));
  auto to_internal = [&](Index y, const fs::path& where) -> Index {
    if (y < 0) return unassigned;
    if (y >= static_cast<Index>(inv.size()) || inv[static_cast<std::size_t>(y)] < 0)
      throw InputError(where.string() + ": full-shape vertex " + std::to_string(y) + " is not on the mesh");
    return inv[static_cast<std::size_t>(y)];
  };
  const auto truth_pairs = read_pairs(truth_path, "part_vertex", "full_vertex");
  const auto corr_pairs = read_pairs(corr_path, "part_vertex", "full_vertex");
  std::unordered_map<Index, Index> predicted;
  for (const auto& [x, y] : corr_pairs)
    if (!predicted.emplace(x, y).second) throw InputError(corr_path.string() + ": partial vertex " + std::to_string(x) + " listed twice");

  GroundTruth truth;
  std::vector<Index> prediction;
  for (const auto& [x, y] : truth_pairs) {
    truth.correspondence.push_back(to_internal(y, truth_path));
    const auto it = predicted.find(x);
    prediction.push_back(it == predicted.end() ? unassigned : to_internal(it->second, corr_path));
  }
  truth.validate(full.mesh.num_vertices());
  const PrincetonErrors err = princeton_error(prediction, truth, full.mesh);

  fs::create_directories(out);
  {
    CsvWriter w(out / "errors.csv", {"part_vertex", "error"});
    for (Index i = 0; i < err.errors.size(); ++i) w.row(truth_pairs[static_cast<std::size_t>(err.vertices[static_cast<std::size_t>(i)])].first, err.errors[i]);
    w.close();
  }
  const Vector thresholds = Vector::LinSpaced(steps, 0.0, max_threshold);
  const Vector curve = cumulative_curve(err.errors, thresholds);
  {
    CsvWriter w(out / "curve.csv", {"threshold", "fraction"});
    for (Index i = 0; i < thresholds.size(); ++i) w.row(thresholds[i], curve[i]);
    w.close();
  }
  const json summary = {{"assigned", err.errors.size()},
                        {"unassigned", err.unassigned},
                        {"mean_error", err.mean()},
                        {"fraction_below_0.05", err.fraction_below(0.05)},
                        {"fraction_below_0.25", err.fraction_below(0.25)}};
  std::ofstream(out / "summary.json") << summary.dump(2) << '\n';
  std::cout << summary.dump(2) << '\n';
  return 0;
}

/// Writes part mesh, truth (file numbering of the source) and a match config.
void write_dataset(const fs::path& dir, const fs::path& full_path, const PartialShape& p,
                   const std::vector<Index>& full_ids) {
  fs::create_directories(dir);
  save_mesh(dir / "part.off", p.mesh);
  CsvWriter w(dir / "truth.csv", {"part_vertex", "full_vertex"});
  for (std::size_t x = 0; x < p.truth.correspondence.size(); ++x)
    w.row(x, full_ids[static_cast<std::size_t>(p.truth.correspondence[x])]);
  w.close();
  std::ofstream cfg(dir / "match.cfg");
  cfg << "part = " << fs::absolute(dir / "part.off").string() << "\nfull = " << fs::absolute(full_path).string()
      << "\nout = " << fs::absolute(dir / "match").string() << '\n';
  if (!cfg) throw InputError("write failed: " + (dir / "match.cfg").string());
  json info = {{"part_vertices", p.mesh.num_vertices()}, {"part_area", p.mesh.total_area()}, {"dir", dir.string()}};
  std::cout << info.dump(2) << '\n';
}

PartialShape cut_from_options(const TriangleMesh& mesh, const std::vector<double>& normal, const std::vector<double>& point,
                              double offset, double keep) {
  const Vec3 n = to_vec3(normal, "--normal");
  if (keep > 0.0) return plane_cut_fraction(mesh, n, keep);
  if (!point.empty()) return plane_cut(mesh, {to_vec3(point, "--point"), n});
  if (!(n.norm() > 0.0)) throw InputError("--normal must be nonzero");
  return plane_cut(mesh, {offset * n.normalized(), n});
}

int cmd_perturb(const fs::path& mesh_path, const std::vector<double>& normal, const std::vector<double>& point,
                double offset, double keep, Index values, Index vectors, double step, Index k, const fs::path& out) {
  const LoadedMesh loaded = load_mesh(mesh_path);
  const TriangleMesh& mesh = loaded.mesh;
  const PartialShape cut = cut_from_options(mesh, normal, point, offset, keep);
  const PerturbationReport report = perturbation_check(mesh, cut.truth.correspondence, values, vectors, step);
  fs::create_directories(out);
  auto write_checks = [&](const fs::path& path, const std::vector<DerivativeCheck>& checks) {
    CsvWriter w(path, {"index", "eigenvalue", "formula", "finite_difference", "relative_error"});
    for (const auto& c : checks) w.row(c.index, c.eigenvalue, c.formula, c.finite_difference, c.relative_error);
    w.close();
  };
  write_checks(out / "eigenvalue_derivatives.csv", report.eigenvalues);
  write_checks(out / "eigenvector_derivatives.csv", report.eigenvectors);

  const BoundaryInteraction bi = boundary_interaction(eigensolve(laplacian(mesh), std::min(k, mesh.num_vertices() - 1)));
  {
    CsvWriter w(out / "interaction.csv", {"vertex", "f"});
    for (Index i = 0; i < bi.f.size(); ++i) w.row(loaded.original_index[static_cast<std::size_t>(i)], bi.f[i]);
    w.close();
  }
  // log scale, dark blue (weak) to yellow (strong)
  const Vector logf = (bi.f.array() + 1e-300).log().matrix();
  const double lo = logf.minCoeff(), span = std::max(logf.maxCoeff() - lo, 1e-12);
  ColorMatrix colors(mesh.num_vertices(), 3);
  for (Index i = 0; i < mesh.num_vertices(); ++i) {
    const double t = (logf[i] - lo) / span;
    colors.row(i) << static_cast<std::uint8_t>(std::lround(255 * t)), static_cast<std::uint8_t>(std::lround(255 * t)),
        static_cast<std::uint8_t>(std::lround(255 * (1 - t)));
  }
  write_ply(out / "interaction.ply", mesh, PlyFormat::BinaryLittleEndian, &colors);

  auto max_error = [](const std::vector<DerivativeCheck>& c) {
    double m = 0.0;
    for (const auto& x : c) m = std::max(m, x.relative_error);
    return m;
  };
  json summary = {{"part_vertices", cut.mesh.num_vertices()},
                  {"eigenvalue_checks", report.eigenvalues.size()},
                  {"eigenvector_checks", report.eigenvectors.size()},
                  {"skipped_multiple", report.skipped_multiple},
                  {"max_eigenvalue_relative_error", max_error(report.eigenvalues)},
                  {"max_eigenvector_relative_error", max_error(report.eigenvectors)},
                  {"interaction_skipped_pairs", bi.skipped_pairs}};
  std::cout << summary.dump(2) << '\n';
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  std::mutex log_mutex;
  log::sink() = [&](const std::string& msg) {
    std::lock_guard lock(log_mutex);
    std::clog << "[pfm] " << msg << '\n';
  };

  CLI::App app{"Partial functional maps: matching, evaluation, dataset generation and perturbation checks"};
  app.require_subcommand(1);
  app.fallthrough();
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Per-iteration log lines");

  // match
  auto* match = app.add_subcommand("match", "Match a partial shape to a full shape");
  fs::path config_path, batch;
  std::vector<std::string> sets;
  match->add_option("-c,--config", config_path, "key=value job file")->check(CLI::ExistingFile);
  match->add_option("--batch", batch, "CSV manifest, one job per row (columns are config keys)")->check(CLI::ExistingFile);
  match->add_option("--set", sets, "Extra key=value override (repeatable)");
  std::map<std::string, std::string> flag_values;
  for (const auto& key : job_config_keys()) match->add_option("--" + key, flag_values[key], "Config key '" + key + "'");

  // eval
  auto* eval = app.add_subcommand("eval", "Princeton-protocol errors and cumulative curve");
  fs::path corr, truth, full_mesh, eval_out = "eval";
  double max_threshold = 0.25;
  int steps = 101;
  eval->add_option("--corr", corr, "corr.csv from match (part_vertex,full_vertex)")->required()->check(CLI::ExistingFile);
  eval->add_option("--truth", truth, "Ground truth (part_vertex,full_vertex)")->required()->check(CLI::ExistingFile);
  eval->add_option("--full", full_mesh, "Full mesh")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", eval_out, "Output directory");
  eval->add_option("--max-threshold", max_threshold, "Largest curve threshold");
  eval->add_option("--steps", steps, "Curve samples");

  // gen
  auto* gen = app.add_subcommand("gen", "Synthetic partial shapes with ground truth");
  gen->require_subcommand(1);
  fs::path gen_mesh, gen_out = "dataset";
  std::vector<double> normal{0.0, 0.0, 1.0}, point;
  double offset = 0.0, keep = 0.0;
  auto* cut = gen->add_subcommand("cut", "Plane cut");
  cut->add_option("--mesh", gen_mesh, "Source mesh")->required()->check(CLI::ExistingFile);
  cut->add_option("--normal", normal, "Plane normal x,y,z")->delimiter(',')->expected(3);
  cut->add_option("--point", point, "Point on the plane x,y,z")->delimiter(',')->expected(3);
  cut->add_option("--offset", offset, "Plane offset along the unit normal");
  cut->add_option("--keep", keep, "Bisect the offset to keep this area fraction");
  cut->add_option("--out", gen_out, "Output directory");
  Index seeds = 3;
  double budget = 0.7;
  auto* holes = gen->add_subcommand("holes", "Geodesic hole erosion");
  holes->add_option("--mesh", gen_mesh, "Source mesh")->required()->check(CLI::ExistingFile);
  holes->add_option("--seeds", seeds, "Number of hole centres");
  holes->add_option("--budget", budget, "Kept area fraction");
  holes->add_option("--out", gen_out, "Output directory");
  SyntheticPairOptions synth;
  std::vector<double> synth_normal{synth.normal.x(), synth.normal.y(), synth.normal.z()};
  auto* synthetic = gen->add_subcommand("synthetic", "Bumpy sphere and a cut of a bent copy");
  synthetic->add_option("--level", synth.level, "Icosphere subdivision level");
  synthetic->add_option("--scale", synth.scale, "Model radius");
  synthetic->add_option("--bend", synth.bend_radius, "Bend radius in model radii");
  synthetic->add_option("--keep", synth.keep_fraction, "Kept area fraction");
  synthetic->add_option("--normal", synth_normal, "Cut normal x,y,z")->delimiter(',')->expected(3);
  synthetic->add_option("--out", gen_out, "Output directory");

  // perturb
  auto* perturb = app.add_subcommand("perturb", "Eigenpair derivative checks and boundary interaction field");
  fs::path perturb_mesh, perturb_out = "perturb";
  Index values = 10, vectors = 5, k = 50;
  double step = 1e-4;
  perturb->add_option("--mesh", perturb_mesh, "Full mesh")->required()->check(CLI::ExistingFile);
  perturb->add_option("--normal", normal, "Cut normal x,y,z")->delimiter(',')->expected(3);
  perturb->add_option("--point", point, "Point on the cut plane x,y,z")->delimiter(',')->expected(3);
  perturb->add_option("--offset", offset, "Plane offset along the unit normal");
  perturb->add_option("--keep", keep, "Bisect the offset to keep this area fraction");
  perturb->add_option("--values", values, "Eigenvalue derivatives to check");
  perturb->add_option("--vectors", vectors, "Eigenvector derivatives to check");
  perturb->add_option("--step", step, "Finite-difference step in t");
  perturb->add_option("--k", k, "Basis size for the interaction field");
  perturb->add_option("--out", perturb_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  log::verbose() = verbose;

  try {
    if (*match) {
      std::vector<std::pair<std::string, std::string>> overrides;
      for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw InputError("--set expects key=value, got '" + s + "'");
        overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
      }
      for (const auto& key : job_config_keys())
        if (match->count("--" + key)) overrides.emplace_back(key, flag_values[key]);
      return cmd_match(config_path, overrides, batch);
    }
    if (*eval) return cmd_eval(corr, truth, full_mesh, eval_out, max_threshold, steps);
    if (*gen) {
      if (*synthetic) {
        synth.normal = to_vec3(synth_normal, "--normal");
        const SyntheticPair p = synthetic_pair(synth);
        fs::create_directories(gen_out);
        save_mesh(gen_out / "full.off", p.full);
        std::vector<Index> ids(static_cast<std::size_t>(p.full.num_vertices()));
        std::iota(ids.begin(), ids.end(), 0);
        write_dataset(gen_out, gen_out / "full.off", p.part, ids);
        return 0;
      }
      const LoadedMesh src = load_mesh(gen_mesh);
      const PartialShape p = *cut ? cut_from_options(src.mesh, normal, point, offset, keep)
                                  : erode_holes(src.mesh, seeds, budget);
      write_dataset(gen_out, gen_mesh, p, src.original_index);
      return 0;
    }
    if (*perturb) return cmd_perturb(perturb_mesh, normal, point, offset, keep, values, vectors, step, k, perturb_out);
  } catch (...) {
    std::cerr << error_json(std::current_exception()).dump() << '\n';
    return exit_code_for(std::current_exception());
  }
  return 0;
}
