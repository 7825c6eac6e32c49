// Command-line workflow tying the GDM library together: data simulation,
// model fitting with analytic or permutation inference, cross-validation,
// confounded-scenario and multi-site evaluation protocols.

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "gdm/io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace gdm;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string default_out_dir() {
  if (const char* env = std::getenv("GDM_OUTPUT_DIR")) return env;
  return ".";
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write file '" + path.string() + "'");
  out << j.dump(2) << "\n";
}

struct CommonOpts {
  std::string data;
  std::string features_path, labels_path, covariates_path, site_path;
  std::string out_dir = default_out_dir();
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = library default; protocols run deterministically
  bool zscore_features = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_data = true) {
  if (needs_data) {
    cmd->add_option("--data", o.data, "combined cohort CSV table");
    cmd->add_option("--features", o.features_path,
                    "features CSV (split form, with --labels)");
    cmd->add_option("--labels", o.labels_path, "labels CSV (split form)");
    cmd->add_option("--covariates", o.covariates_path,
                    "covariates CSV (split form)");
    cmd->add_option("--site", o.site_path, "site CSV (split form)");
  }
  cmd->add_option("--out", o.out_dir, "output directory")
      ->envname("GDM_OUTPUT_DIR");
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--threads", o.threads, "worker thread limit");
  cmd->add_flag("--zscore-features", o.zscore_features,
                "z-score features before fitting (recorded in the report)");
}

Cohort load_from(const CommonOpts& o) {
  if (!o.data.empty()) return load_cohort(o.data);
  if (!o.features_path.empty() && !o.labels_path.empty())
    return load_cohort_split(o.features_path, o.labels_path,
                             o.covariates_path, o.site_path);
  throw ValidationError("no input: pass --data or --features/--labels");
}

json config_echo(const CommonOpts& o, const json& extra) {
  json cfg = {{"data", o.data},
              {"out", o.out_dir},
              {"seed", o.seed},
              {"threads", o.threads},
              {"zscore_features", o.zscore_features}};
  cfg.update(extra);
  return cfg;
}

json report_skeleton(const CommonOpts& o, const json& extra) {
  return {{"version", kVersion},
          {"timestamp", timestamp()},
          {"config", config_echo(o, extra)}};
}

Method parse_method(const std::string& name) {
  if (name == "gdm") return Method::Gdm;
  if (name == "ridge") return Method::Ridge;
  if (name == "haufe") return Method::Haufe;
  throw ValidationError("unknown method '" + name + "'");
}

std::vector<Method> parse_methods(const std::string& csv) {
  std::vector<Method> out;
  std::istringstream in(csv);
  std::string tok;
  while (std::getline(in, tok, ',')) out.push_back(parse_method(tok));
  if (out.empty()) throw ValidationError("no methods given");
  return out;
}

void maybe_zscore(Cohort& co, bool enabled) {
  if (!enabled) return;
  const auto scaler = fit_feature_scaler(co.features);
  co.features = apply_feature_scaler(scaler, co.features);
}

void check_q(double q) {
  if (!(q > 0.0 && q < 1.0)) throw ValidationError("fdr_q out of range");
}

int run_simulate(const CommonOpts& o, const GeneratorSpec& spec) {
  const auto synth = generate(spec);
  fs::create_directories(o.out_dir);
  save_cohort(synth.cohort, (fs::path(o.out_dir) / "cohort.csv").string());
  write_truth_csv((fs::path(o.out_dir) / "truth.csv").string(), synth.truth,
                  synth.cohort.feature_names);
  json report = report_skeleton(
      o, {{"protocol", "simulate"},
          {"n", synth.cohort.n()},
          {"d", synth.cohort.d()},
          {"sites", synth.cohort.distinct_sites().size()}});
  write_json(fs::path(o.out_dir) / "report.json", report);
  return 0;
}

int run_fit(const CommonOpts& o, const std::string& method_name,
            double lambda1, double lambda2, const std::string& inference,
            std::int64_t n_perm, const std::string& perm_mode, double fdr_q) {
  check_q(fdr_q);
  const Method method = parse_method(method_name);
  Cohort co = load_from(o);
  maybe_zscore(co, o.zscore_features);

  auto [y, lt] = standardize_labels(co.labels_raw);
  const auto basis =
      build_covariate_basis(co.covariates_raw, co.covariate_names);

  InferenceResult result;
  result.q_level = fdr_q;
  result.method = inference;
  Vector pattern;

  if (method == Method::Gdm) {
    GdmHyperParams hp{lambda1, lambda2};
    const auto model = fit_gdm(co.features, y, basis, hp);
    pattern = model.j;
    fs::create_directories(o.out_dir);
    write_gdm_sidecar_csv((fs::path(o.out_dir) / "sidecar.csv").string(),
                          model, co.feature_names, basis.column_names);
    if (inference == "analytic") {
      const auto null =
          analytic_null(build_q_matrix(co.features, y, basis, hp));
      result.sigma = null.sigma;
      auto pv = analytic_pvalues(model.j, null);
      result.p_raw = pv.p;
      result.zero_sigma_flag = pv.zero_sigma_flag;
    } else {
      const PermMode pm = perm_mode == "fixed-q" ? PermMode::FixedQ
                                                 : PermMode::FullRefit;
      auto [pv, stats] = permutation_pvalues(co.features, y, basis, hp,
                                             n_perm, o.seed, pm);
      result.p_raw = pv.p;
      result.sigma = stats.perm_std;
      result.n_permutations = stats.n_used;
      result.zero_sigma_flag = pv.zero_sigma_flag;
    }
  } else {
    const auto resid = fit_residualizer(co.features, basis);
    const Matrix x_res = apply_residualizer(resid, co.features, basis);
    auto ridge = fit_ridge(x_res, y, lambda1);
    ridge.label_transform = lt;
    pattern = method == Method::Haufe ? haufe_transform(ridge, x_res).a
                                      : ridge.w;
    if (inference != "analytic")
      throw ValidationError(
          "permutation inference is provided for gdm only; ridge and haufe "
          "use the analytic null");
    const auto null = ridge_null(x_res, lambda1);
    result.sigma = null.sigma;
    auto pv = analytic_pvalues(method == Method::Haufe ? ridge.w : pattern,
                               null);
    result.p_raw = pv.p;
    result.zero_sigma_flag = pv.zero_sigma_flag;
  }

  result.j = pattern;
  result.rejected = bh_fdr(result.p_raw, fdr_q);

  fs::create_directories(o.out_dir);
  write_parameters_csv((fs::path(o.out_dir) / "params.csv").string(),
                       co.feature_names, pattern);
  write_inference_csv((fs::path(o.out_dir) / "inference.csv").string(),
                      co.feature_names, result);

  int n_rejected = 0;
  for (bool r : result.rejected) n_rejected += r;
  json report = report_skeleton(
      o, {{"protocol", "fit"},
          {"method", method_name},
          {"lambda1", lambda1},
          {"lambda2", lambda2},
          {"inference", inference},
          {"n_perm", n_perm},
          {"fdr_q", fdr_q}});
  report["n_rejected"] = n_rejected;
  write_json(fs::path(o.out_dir) / "report.json", report);
  return 0;
}

int run_cv(const CommonOpts& o, const std::string& method_name, int folds) {
  const Method method = parse_method(method_name);
  Cohort co = load_from(o);
  maybe_zscore(co, o.zscore_features);
  const auto best =
      cross_validate(co, method, default_grid(method), folds, o.seed);
  fs::create_directories(o.out_dir);
  json report = report_skeleton(
      o, {{"protocol", "cv"}, {"method", method_name}, {"folds", folds}});
  report["chosen"] = hyper_json(best);
  write_json(fs::path(o.out_dir) / "report.json", report);
  std::cout << "lambda1=" << best.lambda1 << " lambda2=" << best.lambda2
            << "\n";
  return 0;
}

int run_scenario(const CommonOpts& o, int case_id, int repeats,
                 double train_fraction, const std::string& methods_csv,
                 const std::string& patient_class) {
  Cohort co = load_from(o);
  maybe_zscore(co, o.zscore_features);
  const auto methods = parse_methods(methods_csv);
  const auto spec =
      ScenarioSpec::for_case(case_id, 0, patient_class, train_fraction);
  const auto reports = repeated_holdout(co, spec, methods, repeats, o.seed);

  json body = report_skeleton(
      o, {{"protocol", "scenario"},
          {"case", case_id},
          {"repeats", repeats},
          {"train_fraction", train_fraction},
          {"methods", methods_csv},
          {"hyper_grid", "lambda in {1e-5..1e2}"},
          {"cv_criterion", "accuracy"}});
  for (const auto& [m, r] : reports)
    body["results"][method_name(m)] = eval_report_json(r);
  fs::create_directories(o.out_dir);
  write_json(fs::path(o.out_dir) / "scenario_report.json", body);
  return 0;
}

int run_multisite(const CommonOpts& o, int resamples, double train_fraction,
                  const std::string& methods_csv) {
  Cohort co = load_from(o);
  maybe_zscore(co, o.zscore_features);
  const auto methods = parse_methods(methods_csv);
  const auto reports =
      multi_site_protocol(co, methods, resamples, train_fraction, o.seed);

  json body = report_skeleton(
      o, {{"protocol", "multisite"},
          {"resamples", resamples},
          {"train_fraction", train_fraction},
          {"methods", methods_csv}});
  for (const auto& [m, r] : reports)
    body["results"][method_name(m)] = multisite_report_json(r);
  fs::create_directories(o.out_dir);
  write_json(fs::path(o.out_dir) / "multisite_report.json", body);
  return 0;
}

int run_permcheck(const CommonOpts& o, double lambda1, double lambda2,
                  const std::string& budgets_csv,
                  const std::string& perm_mode) {
  Cohort co = load_from(o);
  maybe_zscore(co, o.zscore_features);
  auto [y, lt] = standardize_labels(co.labels_raw);
  const auto basis =
      build_covariate_basis(co.covariates_raw, co.covariate_names);
  GdmHyperParams hp{lambda1, lambda2};

  std::vector<std::int64_t> budgets;
  std::istringstream in(budgets_csv);
  std::string tok;
  while (std::getline(in, tok, ',')) budgets.push_back(std::stoll(tok));
  if (budgets.empty()) throw ValidationError("no permutation budgets given");

  const auto model = fit_gdm(co.features, y, basis, hp);
  const auto null = analytic_null(build_q_matrix(co.features, y, basis, hp));
  const auto p_analytic = analytic_pvalues(model.j, null);

  const PermMode pm =
      perm_mode == "fixed-q" ? PermMode::FixedQ : PermMode::FullRefit;
  std::map<std::int64_t, Vector> p_by_budget;
  std::uint64_t tick = 0;
  for (auto b : budgets) {
    auto [pv, stats] = permutation_pvalues(co.features, y, basis, hp, b,
                                           derive_seed(o.seed, tick++), pm);
    p_by_budget[b] = pv.p;
  }
  const auto curve = pvalue_agreement(p_analytic.p, p_by_budget);

  fs::create_directories(o.out_dir);
  write_agreement_csv((fs::path(o.out_dir) / "agreement.csv").string(),
                      curve);
  json report = report_skeleton(
      o, {{"protocol", "permcheck"},
          {"lambda1", lambda1},
          {"lambda2", lambda2},
          {"budgets", budgets},
          {"perm_mode", perm_mode}});
  if (curve.log_log_slope)
    report["log_log_slope"] = *curve.log_log_slope;
  else
    report["log_log_slope"] = nullptr;
  write_json(fs::path(o.out_dir) / "permcheck_report.json", report);
  return 0;
}

int run_report(const std::string& input) {
  std::ifstream in(input);
  if (!in) throw ValidationError("cannot open file '" + input + "'");
  json body = json::parse(in);
  std::cout << "protocol: " << body["config"].value("protocol", "?") << "\n";
  if (body.contains("results")) {
    for (auto& [method, r] : body["results"].items()) {
      std::cout << method << ":";
      if (r.contains("mean_accuracy"))
        std::cout << " mean_accuracy=" << r["mean_accuracy"];
      if (r.contains("reproducibility_mean"))
        std::cout << " repro=" << r["reproducibility_mean"];
      if (r.contains("pairs")) {
        std::cout << " pairs=[";
        for (auto& p : r["pairs"])
          std::cout << " " << p["train_site"].get<std::string>() << "->"
                    << p["test_site"].get<std::string>() << ":"
                    << p["mean_accuracy"];
        std::cout << " ]";
      }
      std::cout << "\n";
    }
  }
  if (body.contains("log_log_slope"))
    std::cout << "log_log_slope: " << body["log_log_slope"] << "\n";
  if (body.contains("chosen"))
    std::cout << "chosen: " << body["chosen"] << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"generative-discriminative machine toolkit"};
  app.require_subcommand(1);

  CommonOpts common;

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic cohort");
  GeneratorSpec gen;
  std::vector<std::int64_t> n_per_site{200};
  std::string effect = "sparse";
  add_common(sim, common, false);
  sim->add_option("--n-per-site", n_per_site, "subjects per site");
  sim->add_option("--d", gen.d, "feature count");
  sim->add_option("--effect", effect, "effect pattern: sparse|smooth");
  sim->add_option("--effect-support", gen.effect_support,
                  "features carrying group signal");
  sim->add_option("--effect-amplitude", gen.effect_amplitude);
  sim->add_option("--age-effect", gen.age_effect_amplitude);
  sim->add_option("--age-coupling", gen.age_group_coupling,
                  "group mean-age difference in years");
  sim->add_option("--site-offsets", gen.site_offsets_amplitude);
  sim->add_option("--noise-std", gen.noise_std);

  // fit
  auto* fit = app.add_subcommand("fit", "fit one model and run inference");
  std::string method = "gdm", inference = "analytic", perm_mode = "full-refit";
  double lambda1 = 1.0, lambda2 = 1.0, fdr_q = 0.05;
  std::int64_t n_perm = 1000;
  add_common(fit, common);
  fit->add_option("--method", method, "gdm|ridge|haufe");
  fit->add_option("--lambda1", lambda1);
  fit->add_option("--lambda2", lambda2);
  fit->add_option("--inference", inference, "analytic|permutation");
  fit->add_option("--n-perm", n_perm);
  fit->add_option("--perm-mode", perm_mode, "full-refit|fixed-q");
  fit->add_option("--fdr-q", fdr_q);

  // cv
  auto* cv = app.add_subcommand("cv", "inner cross-validation over the grid");
  int folds = 5;
  add_common(cv, common);
  cv->add_option("--method", method, "gdm|ridge|haufe");
  cv->add_option("--folds", folds);

  // scenario
  auto* scen = app.add_subcommand("scenario",
                                  "confounded holdout protocol (cases 1-4)");
  int case_id = 1, repeats = 100;
  double train_fraction = 0.5;
  std::string methods_csv = "gdm,ridge,haufe", patient_class = "patient";
  add_common(scen, common);
  scen->add_option("--case", case_id, "confounding case 1..4");
  scen->add_option("--repeats", repeats);
  scen->add_option("--train-fraction", train_fraction);
  scen->add_option("--methods", methods_csv);
  scen->add_option("--patient-class", patient_class);

  // multisite
  auto* ms = app.add_subcommand("multisite",
                                "train on one site, test on the others");
  int resamples = 100;
  double ms_fraction = 0.9;
  add_common(ms, common);
  ms->add_option("--resamples", resamples);
  ms->add_option("--train-fraction", ms_fraction);
  ms->add_option("--methods", methods_csv);

  // permcheck
  auto* pc = app.add_subcommand(
      "permcheck", "analytic vs permutation p-value agreement");
  std::string budgets = "10,100,1000,10000";
  add_common(pc, common);
  pc->add_option("--lambda1", lambda1);
  pc->add_option("--lambda2", lambda2);
  pc->add_option("--budgets", budgets, "comma-separated permutation budgets");
  pc->add_option("--perm-mode", perm_mode, "full-refit|fixed-q");

  // report
  auto* rep = app.add_subcommand("report", "summarize a JSON report");
  std::string report_input;
  rep->add_option("--input", report_input, "report JSON path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "{\"error\":\"" << e.what() << "\",\"exit_code\":2}\n";
    return 2;
  }

  try {
    if (sim->parsed()) {
      gen.seed = common.seed;
      gen.n_per_site.clear();
      for (auto n : n_per_site) gen.n_per_site.push_back(n);
      gen.effect_pattern = effect == "smooth" ? EffectPattern::SmoothBlock
                                              : EffectPattern::Sparse;
      return run_simulate(common, gen);
    }
    if (fit->parsed())
      return run_fit(common, method, lambda1, lambda2, inference, n_perm,
                     perm_mode, fdr_q);
    if (cv->parsed()) return run_cv(common, method, folds);
    if (scen->parsed())
      return run_scenario(common, case_id, repeats, train_fraction,
                          methods_csv, patient_class);
    if (ms->parsed())
      return run_multisite(common, resamples, ms_fraction, methods_csv);
    if (pc->parsed())
      return run_permcheck(common, lambda1, lambda2, budgets, perm_mode);
    if (rep->parsed()) return run_report(report_input);
  } catch (const ValidationError& e) {
    std::cerr << "{\"error\":\"" << e.what() << "\",\"exit_code\":2}\n";
    return 2;
  } catch (const DimensionError& e) {
    std::cerr << "{\"error\":\"" << e.what() << "\",\"exit_code\":2}\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "{\"error\":\"" << e.what() << "\",\"exit_code\":1}\n";
    return 1;
  }
  return 2;
}
