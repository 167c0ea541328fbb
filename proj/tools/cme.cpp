// cme: command-line front end for the compressed mixed-effects sampler.
//
// Exit codes: 0 ok, 1 usage/config, 2 data, 3 numeric failure. Failures also
// print one line "cme-error code=<n> kind=<kind> message=<json string>" to stderr.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cme/errors.hpp"
#include "cme/gibbs.hpp"
#include "cme/io.hpp"
#include "cme/oracle.hpp"
#include "cme/selection.hpp"
#include "cme/simulation.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace cme;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "key = value config file")->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "master seed (overrides the config)");
  sub->add_option("--out-dir", c.out_dir, "output directory");
}

io::RunConfig base_config(const Common& c) {
  io::RunConfig cfg = c.config.empty() ? io::RunConfig{} : io::load_config(c.config);
  if (c.seed) {
    cfg.fit.seed = *c.seed;
    cfg.geweke.seed = *c.seed;
  }
  io::sync_scenario(cfg);
  return cfg;
}

json echo_json(const io::RunConfig& cfg) {
  json e = json::object();
  for (const auto& [k, v] : cfg.echo) e[k] = v;
  return e;
}

json fit_json(const FitConfig& f) {
  json j = {{"k1", f.k1},
            {"k2", f.k2},
            {"iterations", f.iterations},
            {"burn_in", f.burn_in},
            {"thin", f.thin},
            {"a0", f.prior.a0},
            {"b0", f.prior.b0},
            {"sigma2_gamma", f.prior.sigma2_gamma}};
  if (f.s2m_tol) j["s2m_tol"] = *f.s2m_tol;
  return j;
}

void write_json(const fs::path& path, const json& j) { io::write_atomic(path, j.dump(2) + "\n"); }

DataSet load_long_auto(const fs::path& path) {
  const io::CsvTable t = io::read_csv(path);
  io::LongSchema schema;
  schema.require_response = t.find(schema.y).has_value();
  return io::table_to_dataset(t, schema, path.string());
}

MatrixXd load_square(const fs::path& path) {
  const MatrixXd m = io::read_matrix_csv(path);
  if (m.rows() != m.cols())
    throw DataError(path.string() + ": Sigma0 must be square, got " + std::to_string(m.rows()) + "x" +
                    std::to_string(m.cols()));
  return m;
}

ProgressSink stderr_progress(bool quiet) {
  if (quiet) return {};
  return [](const ChainProgress& p) {
    if (p.iteration % 1000 == 0 || p.iteration == p.total)
      std::fprintf(stderr, "\riteration %ld/%ld", static_cast<long>(p.iteration), static_cast<long>(p.total));
    if (p.iteration == p.total) std::fputc('\n', stderr);
  };
}

// ---- simulate ----

struct SimulateArgs {
  Common c;
  std::optional<std::string> sigma;
  std::optional<std::string> x_design;
  std::optional<Index> m, k1, k2, reps, iterations, burn_in;
  std::optional<double> tau0_sq;
  bool no_oracle = false;
  bool grid = false;
  bool k_grid = false;
};

int run_simulate(const SimulateArgs& a) {
  io::RunConfig cfg = base_config(a.c);
  SimScenario s = cfg.scenario;
  if (a.sigma) s.sigma = parse_sigma_structure(*a.sigma);
  if (a.x_design) s.x_design = parse_x_design(*a.x_design);
  if (a.m) s.m = *a.m;
  if (a.k1) s.k1 = *a.k1;
  if (a.k2) s.k2 = *a.k2;
  if (a.reps) s.replications = *a.reps;
  if (a.iterations) s.iterations = *a.iterations;
  if (a.burn_in) s.burn_in = *a.burn_in;
  if (a.tau0_sq) s.tau0_sq = *a.tau0_sq;
  if (a.no_oracle) s.with_oracle = false;

  const std::vector<SimScenario> scenarios = a.grid ? scenario_grid(s, a.k_grid) : std::vector<SimScenario>{s};
  for (const auto& sc : scenarios) sc.validate();

  std::vector<ReplicationMetrics> all;
  for (const auto& sc : scenarios) {
    std::fprintf(stderr, "scenario sigma=%s m=%ld k1=%ld k2=%ld reps=%ld\n", std::string(to_string(sc.sigma)).c_str(),
                 static_cast<long>(sc.m), static_cast<long>(sc.k1), static_cast<long>(sc.k2),
                 static_cast<long>(sc.replications));
    auto rows = run_scenario(sc, [](const ReplicationMetrics& r) {
      std::fprintf(stderr, "  replication %ld: %s\n", static_cast<long>(r.replication), r.status.c_str());
    });
    all.insert(all.end(), rows.begin(), rows.end());
  }
  const fs::path out(a.c.out_dir);
  io::write_atomic(out / "metrics.csv", io::metrics_csv(all));
  write_json(out / "run_meta.json", {{"command", "simulate"},
                                     {"master_seed", s.seed},
                                     {"replication_seed", "derive_seed(master_seed, replication)"},
                                     {"scenarios", scenarios.size()},
                                     {"fit", fit_json(cfg.fit)},
                                     {"config", echo_json(cfg)}});
  std::size_t failed = 0;
  for (const auto& r : all) failed += !r.ok();
  std::printf("wrote %s (%zu rows, %zu failed)\n", (out / "metrics.csv").c_str(), all.size(), failed);
  return failed ? 3 : 0;
}

// ---- fit ----

struct FitArgs {
  Common c;
  std::string data;
  std::string riboflavin;
  std::optional<Index> n_train;
  bool oracle = false;
  std::string sigma;
  std::optional<Index> k1, k2, iterations, burn_in, thin;
  bool quiet = false;
};

int run_fit(const FitArgs& a) {
  io::RunConfig cfg = base_config(a.c);
  FitConfig& f = cfg.fit;
  if (a.k1) f.k1 = *a.k1;
  if (a.k2) f.k2 = *a.k2;
  if (a.iterations) f.iterations = *a.iterations;
  if (a.burn_in) f.burn_in = *a.burn_in;
  if (a.thin) f.thin = *a.thin;
  f.validate();
  if (a.data.empty() == a.riboflavin.empty()) throw ConfigError("fit needs exactly one of --data or --riboflavin");
  if (a.oracle && a.sigma.empty()) throw ConfigError("--oracle needs --sigma");

  const fs::path out(a.c.out_dir);
  fs::create_directories(out);
  const SeedSet seeds = split_seed(f.seed);

  json meta = {{"command", "fit"}, {"method", a.oracle ? "oracle" : "cme"}, {"master_seed", f.seed},
               {"projection_seed", seeds.projection}, {"chain_seed", seeds.chain}, {"fit", fit_json(f)},
               {"config", echo_json(cfg)}};

  DataSet train;
  if (!a.data.empty()) {
    train = io::load_csv_long(a.data);
    meta["data"] = a.data;
  } else {
    const io::RiboflavinDesign design = io::build_riboflavin_design(io::read_csv(a.riboflavin));
    meta["riboflavin"] = a.riboflavin;
    meta["time_range"] = {design.time_lo, design.time_hi};
    io::write_atomic(out / "design_columns.txt", [&] {
      std::string s;
      for (const auto& c : design.columns) s += c + '\n';
      return s;
    }());
    if (a.n_train) {
      auto [tr, te] = io::split_train_test(design.data, *a.n_train, seeds.data);
      io::write_csv_long(out / "train.csv", tr);
      io::write_csv_long(out / "test.csv", te);
      meta["split_seed"] = seeds.data;
      meta["n_train"] = *a.n_train;
      train = std::move(tr);
    } else {
      io::write_csv_long(out / "train.csv", design.data);
      train = design.data;
    }
  }
  f.validate_for(train.q);
  meta["dims"] = {{"n", train.n()}, {"N", train.total_obs()}, {"p", train.p}, {"q", train.q}};

  PosteriorDraws draws;
  Rng rng(seeds.chain);
  if (a.oracle) {
    TruthSpec truth;
    truth.Sigma0 = load_square(a.sigma);
    truth.beta0 = VectorXd::Zero(train.p);
    if (truth.Sigma0.rows() != train.q) throw DataError("Sigma0 dimension does not match q");
    meta["sigma"] = fs::absolute(a.sigma).string();
    draws = fit_oracle_hs(train, truth, f, rng, stderr_progress(a.quiet));
  } else {
    const ProjectionPair proj = draw_projection_pair(train.q, f.k1, f.k2, seeds.projection);
    meta["projection_fingerprint"] = proj.fingerprint();
    draws = run_chain(train, f, proj, rng, stderr_progress(a.quiet));
  }

  io::write_draws(out, draws);
  io::write_atomic(out / "summary.csv", io::summary_csv(draws.beta, "beta_"));
  write_json(out / "run_meta.json", meta);
  std::printf("kept %ld draws; wrote %s\n", static_cast<long>(draws.kept()), out.c_str());
  return 0;
}

// ---- predict ----

struct PredictArgs {
  Common c;
  std::string draws;
  std::string data;
  std::string sigma;
};

int run_predict(const PredictArgs& a) {
  const fs::path dir(a.draws);
  std::ifstream mf(dir / "run_meta.json");
  if (!mf) throw DataError("missing " + (dir / "run_meta.json").string());
  json meta;
  try {
    mf >> meta;
  } catch (const json::exception& e) {
    throw DataError("run_meta.json: " + std::string(e.what()));
  }
  const PosteriorDraws draws = io::read_draws(dir);
  const DataSet test = load_long_auto(a.data);
  const bool has_y = io::read_csv(a.data).find("y").has_value();

  const std::uint64_t master = a.c.seed ? *a.c.seed : meta.at("master_seed").get<std::uint64_t>();
  const std::uint64_t pred_seed = derive_seed(master, 11);
  Rng rng(pred_seed);
  MatrixXd pred;
  if (meta.at("method") == "oracle") {
    TruthSpec truth;
    truth.Sigma0 = load_square(a.sigma.empty() ? meta.at("sigma").get<std::string>() : a.sigma);
    truth.beta0 = VectorXd::Zero(test.p);
    pred = oracle_posterior_predict(draws, test, truth, rng);
  } else {
    const auto& fit = meta.at("fit");
    const ProjectionPair proj = draw_projection_pair(test.q, fit.at("k1").get<Index>(), fit.at("k2").get<Index>(),
                                                     meta.at("projection_seed").get<std::uint64_t>());
    if (meta.contains("projection_fingerprint") && meta["projection_fingerprint"].get<std::uint64_t>() != proj.fingerprint())
      throw DataError("projection does not match the fitted run (q differs?)");
    pred = posterior_predict(draws, test, proj, rng);
  }

  const fs::path out(a.c.out_dir);
  std::vector<std::string> header;
  for (const auto& b : test.blocks)
    for (Index j = 0; j < b.m(); ++j) header.push_back(b.id + "_" + std::to_string(j + 1));
  io::write_matrix_csv(out / "predictive_draws.csv", header, pred);

  const VectorXd point = point_prediction(pred);
  const IntervalSet pi = credible_intervals(pred);
  std::string pts = "subject,obs,prediction\n", ints = "subject,obs,lower,upper\n";
  Index row = 0;
  for (const auto& b : test.blocks)
    for (Index j = 0; j < b.m(); ++j, ++row) {
      const std::string key = b.id + ',' + std::to_string(j + 1) + ',';
      pts += key + io::format_double(point(row)) + '\n';
      ints += key + io::format_double(pi.lower(row)) + ',' + io::format_double(pi.upper(row)) + '\n';
    }
  io::write_atomic(out / "point_predictions.csv", pts);
  io::write_atomic(out / "predictive_intervals.csv", ints);

  json pm = {{"command", "predict"}, {"draws", a.draws}, {"data", a.data}, {"master_seed", master},
             {"predict_seed", pred_seed}};
  if (has_y) {
    std::vector<VectorXd> yt, yp;
    Index off = 0;
    for (const auto& b : test.blocks) {
      yt.push_back(b.y);
      yp.push_back(point.segment(off, b.m()));
      off += b.m();
    }
    const CoverageSummary cs = coverage_and_width(pi, test.stacked_y());
    const double e = mspe(yt, yp);
    io::write_atomic(out / "predict_metrics.csv", "mspe,coverage,mean_width\n" + io::format_double(e) + ',' +
                                                      io::format_double(cs.coverage) + ',' +
                                                      io::format_double(cs.mean_width) + '\n');
    pm["mspe"] = e;
    std::printf("mspe %.4f  coverage %.3f  mean width %.4f\n", e, cs.coverage, cs.mean_width);
  }
  write_json(out / "predict_meta.json", pm);
  return 0;
}

// ---- select ----

struct SelectArgs {
  Common c;
  std::string draws;
  std::optional<double> tol;
};

int run_select(const SelectArgs& a) {
  io::RunConfig cfg = base_config(a.c);
  fs::path beta = a.draws;
  if (fs::is_directory(beta)) beta /= "beta_draws.csv";
  std::vector<std::string> names;
  const MatrixXd draws = io::read_matrix_csv(beta, &names);
  const std::optional<double> tol = a.tol ? a.tol : cfg.fit.s2m_tol;
  const SelectionResult sel = s2m_select(draws, tol);
  const VectorXd med = column_medians(draws);
  std::string out = "coefficient,median,selected\n";
  for (Index j = 0; j < draws.cols(); ++j)
    out += names[static_cast<std::size_t>(j)] + ',' + io::format_double(med(j)) + ',' +
           (sel.selected[static_cast<std::size_t>(j)] ? "1" : "0") + '\n';
  io::write_atomic(fs::path(a.c.out_dir) / "selection.csv", out);
  std::printf("selected %ld of %ld coefficients (tolerance %.6g):", static_cast<long>(sel.chosen_count),
              static_cast<long>(draws.cols()), sel.tolerance);
  for (Index j = 0; j < draws.cols(); ++j)
    if (sel.selected[static_cast<std::size_t>(j)]) std::printf(" %s", names[static_cast<std::size_t>(j)].c_str());
  std::printf("\n");
  return 0;
}

// ---- geweke ----

struct GewekeArgs {
  Common c;
  std::optional<Index> samples;
  double threshold = 4.0;
};

int run_geweke(const GewekeArgs& a) {
  io::RunConfig cfg = base_config(a.c);
  if (a.samples) cfg.geweke.samples = *a.samples;
  const GewekeReport rep = geweke_joint_test(cfg.geweke);
  std::string out = "function,marginal_mean,marginal_se,successive_mean,successive_se,z\n";
  for (const auto& s : rep.stats) {
    out += s.name + ',' + io::format_double(s.marginal_mean) + ',' + io::format_double(s.marginal_se) + ',' +
           io::format_double(s.successive_mean) + ',' + io::format_double(s.successive_se) + ',' +
           io::format_double(s.z) + '\n';
    std::printf("%-12s z = %+.3f\n", s.name.c_str(), s.z);
  }
  io::write_atomic(fs::path(a.c.out_dir) / "geweke.csv", out);
  const bool pass = rep.max_abs_z() < a.threshold;
  std::printf("max |z| = %.3f (%s at %.1f)\n", rep.max_abs_z(), pass ? "pass" : "FAIL", a.threshold);
  return 0;
}

// ---- report ----

struct ReportArgs {
  Common c;
  std::vector<std::string> metrics;
};

int run_report(const ReportArgs& a) {
  std::vector<ReplicationMetrics> rows;
  for (const auto& m : a.metrics) {
    auto r = io::read_metrics_csv(m);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  const std::string t1 = io::table1_csv(rows), t2 = io::table2_csv(rows);
  const fs::path out(a.c.out_dir);
  io::write_atomic(out / "table1.csv", t1);
  io::write_atomic(out / "table2.csv", t2);
  std::printf("TPR (FPR)\n%s\nprediction interval coverage (relative width)\n%s", t1.c_str(), t2.c_str());
  return 0;
}

void error_line(int code, const char* kind, const std::string& msg) {
  std::fprintf(stderr, "cme-error code=%d kind=%s message=%s\n", code, kind, json(msg).dump().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian compressed mixed-effects models"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "run simulation scenarios and write metrics.csv");
  add_common(s, sim.c);
  s->add_option("--sigma", sim.sigma, "diagonal | block | toeplitz");
  s->add_option("--x-design", sim.x_design, "independent | toeplitz");
  s->add_option("--m", sim.m, "observations per subject");
  s->add_option("--k1", sim.k1);
  s->add_option("--k2", sim.k2);
  s->add_option("--reps", sim.reps, "replications");
  s->add_option("--iterations", sim.iterations);
  s->add_option("--burn-in", sim.burn_in);
  s->add_option("--tau0-sq", sim.tau0_sq, "true error variance");
  s->add_flag("--no-oracle", sim.no_oracle, "skip the oracle fits");
  s->add_flag("--grid", sim.grid, "run all Sigma x m settings");
  s->add_flag("--k-grid", sim.k_grid, "with --grid, also cross k1, k2 in {3, 7, 14}");

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "fit CME (or the oracle) to a long-format CSV");
  add_common(f, fit.c);
  f->add_option("--data", fit.data, "long CSV: subject, obs, y, x1..xp, z1..zq")->check(CLI::ExistingFile);
  f->add_option("--riboflavin", fit.riboflavin, "table: subject, time, y, gene columns")->check(CLI::ExistingFile);
  f->add_option("--n-train", fit.n_train, "with --riboflavin, subjects kept for training");
  f->add_flag("--oracle", fit.oracle, "fit the Horseshoe model whitened by a known Sigma0");
  f->add_option("--sigma", fit.sigma, "Sigma0 as a q x q CSV (with header)")->check(CLI::ExistingFile);
  f->add_option("--k1", fit.k1);
  f->add_option("--k2", fit.k2);
  f->add_option("--iterations", fit.iterations);
  f->add_option("--burn-in", fit.burn_in);
  f->add_option("--thin", fit.thin);
  f->add_flag("--quiet", fit.quiet);

  PredictArgs pred;
  auto* p = app.add_subcommand("predict", "posterior predictive draws for a test CSV");
  add_common(p, pred.c);
  p->add_option("--draws", pred.draws, "directory written by fit")->required()->check(CLI::ExistingDirectory);
  p->add_option("--data", pred.data, "long CSV (y optional)")->required()->check(CLI::ExistingFile);
  p->add_option("--sigma", pred.sigma, "Sigma0 for oracle runs (defaults to the one used by fit)");

  SelectArgs sel;
  auto* se = app.add_subcommand("select", "sequential 2-means selection on beta draws");
  add_common(se, sel.c);
  se->add_option("--draws", sel.draws, "fit directory or beta_draws.csv")->required()->check(CLI::ExistingPath);
  se->add_option("--tol", sel.tol, "2-means tolerance");

  GewekeArgs gw;
  auto* g = app.add_subcommand("geweke", "joint-distribution check of the sampler");
  add_common(g, gw.c);
  g->add_option("--samples", gw.samples, "draws per arm");
  g->add_option("--threshold", gw.threshold, "pass threshold on |z|");

  ReportArgs rep;
  auto* r = app.add_subcommand("report", "aggregate metrics CSVs into table layouts");
  add_common(r, rep.c);
  r->add_option("--metrics", rep.metrics, "metrics.csv files")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    if (rc != 0) error_line(1, "usage", e.what());
    return rc == 0 ? 0 : 1;
  }

  try {
    fs::create_directories(app.got_subcommand(s)    ? sim.c.out_dir
                           : app.got_subcommand(f)  ? fit.c.out_dir
                           : app.got_subcommand(p)  ? pred.c.out_dir
                           : app.got_subcommand(se) ? sel.c.out_dir
                           : app.got_subcommand(g)  ? gw.c.out_dir
                                                    : rep.c.out_dir);
    if (app.got_subcommand(s)) return run_simulate(sim);
    if (app.got_subcommand(f)) return run_fit(fit);
    if (app.got_subcommand(p)) return run_predict(pred);
    if (app.got_subcommand(se)) return run_select(sel);
    if (app.got_subcommand(g)) return run_geweke(gw);
    return run_report(rep);
  } catch (const ConfigError& e) {
    error_line(1, "config", e.what());
    return 1;
  } catch (const DataError& e) {
    error_line(2, "data", e.what());
    return 2;
  } catch (const ChainError& e) {
    error_line(3, "chain", std::string(e.what()) + " (last good iteration " +
                               std::to_string(e.last_good_iteration()) + ")");
    return 3;
  } catch (const NumericError& e) {
    error_line(3, "numeric", e.what());
    return 3;
  } catch (const json::exception& e) {
    error_line(2, "data", e.what());
    return 2;
  } catch (const fs::filesystem_error& e) {
    error_line(2, "data", e.what());
    return 2;
  }
}
