// Command-line driver: selection, IV and mediation fits, simulation studies.

#include "tsvs/data_model.hpp"
#include "tsvs/error.hpp"
#include "tsvs/iv.hpp"
#include "tsvs/lasso.hpp"
#include "tsvs/mediation.hpp"
#include "tsvs/report.hpp"
#include "tsvs/semms.hpp"
#include "tsvs/sim.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace tsvs;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4, kEmptySelection = 5 };

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return kUsage;
    case ErrorKind::MissingColumn:
    case ErrorKind::ParseError:
    case ErrorKind::EmptyData:
    case ErrorKind::ConstantColumn:
    case ErrorKind::Io: return kData;
    case ErrorKind::EmptySelection: return kEmptySelection;
    default: return kNumerical;
  }
}

void error_record(std::string_view kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

// Writes to the named file, or stdout when the name is empty.
void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path);
  out << text;
}

std::vector<int> indices_of(const Dataset& d, const std::vector<std::string>& names) {
  std::vector<int> out;
  for (const auto& n : names) out.push_back(d.column_index(n));
  return out;
}

// Every column not already claimed, in file order.
std::vector<int> remaining(const Dataset& d, const std::vector<int>& taken) {
  std::vector<int> out;
  for (int j = 0; j < d.cols(); ++j)
    if (std::find(taken.begin(), taken.end(), j) == taken.end()) out.push_back(j);
  return out;
}

std::vector<std::string> names_of(const Dataset& d, const std::vector<int>& cols) {
  std::vector<std::string> out;
  for (int j : cols) out.push_back(d.column_names()[j]);
  return out;
}

Matrix columns(const Dataset& d, const std::vector<int>& cols) { return d.predictors()(Eigen::all, cols); }

std::string json_text(const json& j) { return j.dump(2) + "\n"; }

// ------------------------------------------------------------------ select

struct SelectOptions {
  std::string data;
  std::string response;
  std::string method = "semms";
  std::vector<std::string> lock;
  double lockout = 0.7;
  int initial_screen = 0;
  double pseudocount = 0.0;
  int folds = 10;
  std::uint64_t seed = 0;
  std::string format = "json";
  std::string output;
  std::string edges;
};

void cmd_select(const SelectOptions& o) {
  const Dataset d = load_csv(o.data, o.response, o.lock);
  const auto& names = d.column_names();
  const Vector corr_y = [&] {
    Matrix Xy(d.rows(), d.cols() + 1);
    Xy << d.predictors(), d.response();
    return Vector(correlations_with(Xy, d.cols()).head(d.cols()));
  }();

  struct Node {
    bool selected = false;
    bool locked_in = false;
    bool locked_out = false;
    std::string trigger;
    double r = 0.0;
    double coefficient = 0.0;
    int sign = 0;
  };
  std::vector<Node> nodes(static_cast<std::size_t>(d.cols()));
  json report{{"version", report::kVersion}, {"method", o.method}, {"response", o.response}};

  if (o.method == "semms") {
    semms::SemmsConfig cfg;
    cfg.lockout_threshold = o.lockout;
    cfg.initial_screen = o.initial_screen;
    cfg.prior_pseudocount = o.pseudocount;
    const auto r = semms::semms_fit(d, cfg);
    for (int j : r.selected) nodes[j].selected = true;
    for (int j : r.locked_in) nodes[j].locked_in = true;
    for (const auto& lo : r.locked_out) {
      nodes[lo.index].locked_out = true;
      nodes[lo.index].trigger = names[lo.trigger];
      nodes[lo.index].r = lo.r;
    }
    for (std::size_t i = 0; i < r.refit_columns.size(); ++i)
      nodes[r.refit_columns[i]].coefficient = r.ols_refit.coefficients(static_cast<Eigen::Index>(i) + 1);
    for (const auto& [j, s] : r.signs) nodes[j].sign = s;
    report["intercept"] = r.ols_refit.coefficients(0);
    report["mixture"] = {{"p_L", r.mixture.p_left}, {"p_0", r.mixture.p_null}, {"p_R", r.mixture.p_right},
                         {"mu", r.mixture.mu},      {"sigma2", r.mixture.sigma2}, {"sigma2_e", r.mixture.sigma2_e}};
    report["final_loglik"] = r.final_loglik;
    report["converged"] = r.converged;
  } else if (o.method == "lasso") {
    if (!o.lock.empty()) fail(ErrorKind::InvalidArgument, "--lock is only supported by --method semms");
    lasso::LassoConfig cfg;
    cfg.folds = o.folds;
    cfg.cv_seed = o.seed;
    const auto fit = lasso::cv_select(d.predictors(), d.response(), cfg);
    for (int j : fit.support) {
      nodes[j].selected = true;
      nodes[j].coefficient = fit.coefficients(j);
      nodes[j].sign = fit.coefficients(j) > 0 ? 1 : -1;
    }
    report["intercept"] = fit.intercept;
    report["lambda"] = fit.lambda;
  } else {
    fail(ErrorKind::InvalidArgument, "--method must be semms or lasso");
  }

  json selected = json::array(), locked_in = json::array(), locked_out = json::array();
  json coefficients = json::object();
  for (int j = 0; j < d.cols(); ++j) {
    const Node& n = nodes[j];
    if (n.selected) selected.push_back(names[j]);
    if (n.locked_in) locked_in.push_back(names[j]);
    if (n.locked_out) locked_out.push_back({{"name", names[j]}, {"trigger", n.trigger}, {"r", n.r}});
    if (n.selected || n.locked_in) coefficients[names[j]] = n.coefficient;
  }
  report["selected"] = selected;
  report["locked_in"] = locked_in;
  report["locked_out"] = locked_out;
  report["coefficients"] = coefficients;

  if (o.format == "json") {
    emit(o.output, json_text(report));
  } else {
    std::ostringstream out;
    out << "name,selected,locked_in,locked_out,trigger,coefficient,sign,corr_with_response\n";
    for (int j = 0; j < d.cols(); ++j) {
      const Node& n = nodes[j];
      out << names[j] << ',' << n.selected << ',' << n.locked_in << ',' << n.locked_out << ',' << n.trigger << ','
          << report::format_number(n.coefficient) << ',' << n.sign << ',' << report::format_number(corr_y(j))
          << '\n';
    }
    emit(o.output, out.str());
  }

  if (!o.edges.empty()) {
    // Response to each model variable, and each locked-out variable to its trigger.
    std::ostringstream out;
    out << "source,target,weight,sign,kind\n";
    for (int j = 0; j < d.cols(); ++j) {
      const Node& n = nodes[j];
      if (n.selected || n.locked_in)
        out << o.response << ',' << names[j] << ',' << report::format_number(corr_y(j)) << ',' << n.sign << ','
            << (n.selected ? "selected" : "locked_in") << '\n';
    }
    for (int j = 0; j < d.cols(); ++j) {
      const Node& n = nodes[j];
      if (n.locked_out)
        out << n.trigger << ',' << names[j] << ',' << report::format_number(n.r) << ',' << (n.r > 0 ? 1 : -1)
            << ",locked_out\n";
    }
    emit(o.edges, out.str());
  }
}

// ------------------------------------------------------------------ fit-iv

struct FitIvOptions {
  std::string data;
  std::string response;
  std::string endog;
  std::vector<std::string> exog;
  std::vector<std::string> instruments;
  std::string selector = "semms";
  std::string robust = "hc0";
  double beta0 = 0.0;
  double fuller_a = 1.0;
  int initial_screen = 5;
  double pseudocount = 8.0;
  std::uint64_t seed = 0;
  std::string format = "json";
  std::string output;
};

json test_json(const iv::TestResult& t) {
  json j{{"stat", t.stat}, {"df1", t.df1}, {"p", t.p}};
  if (t.df2 > 0) j["df2"] = t.df2;
  return j;
}

void cmd_fit_iv(const FitIvOptions& o) {
  const Dataset d = load_csv(o.data, o.response);
  const int endog = d.column_index(o.endog);
  const std::vector<int> exog = indices_of(d, o.exog);
  std::vector<int> taken = exog;
  taken.push_back(endog);
  const std::vector<int> candidates = o.instruments.empty() ? remaining(d, taken) : indices_of(d, o.instruments);
  if (candidates.empty()) fail(ErrorKind::InvalidArgument, "no candidate instruments");
  const iv::RobustFlavor flavor = o.robust == "hc1" ? iv::RobustFlavor::HC1 : iv::RobustFlavor::HC0;
  if (o.robust != "hc0" && o.robust != "hc1") fail(ErrorKind::InvalidArgument, "--robust must be hc0 or hc1");

  const Vector x = d.predictors().col(endog);
  std::vector<int> chosen;
  if (o.selector == "none") {
    chosen = candidates;
  } else if (o.selector == "semms") {
    std::vector<int> cols = candidates;
    cols.insert(cols.end(), exog.begin(), exog.end());
    IndexSet locked;
    for (std::size_t i = candidates.size(); i < cols.size(); ++i) locked.insert(static_cast<int>(i));
    semms::SemmsConfig cfg;
    cfg.initial_screen = o.initial_screen;
    cfg.prior_pseudocount = o.pseudocount;
    const auto r = semms::semms_fit(Dataset(columns(d, cols), x, names_of(d, cols), locked), cfg);
    for (int j : r.selected) chosen.push_back(cols[j]);
  } else if (o.selector == "lasso") {
    lasso::LassoConfig cfg;
    cfg.cv_seed = o.seed;
    for (int j : lasso::cv_select(columns(d, candidates), x, cfg).support) chosen.push_back(candidates[j]);
  } else {
    fail(ErrorKind::InvalidArgument, "--selector must be semms, lasso or none");
  }
  if (chosen.empty()) fail(ErrorKind::EmptySelection, "the selector returned no instruments");

  iv::IvProblem p;
  p.Z = columns(d, chosen);
  p.X_endog = x;
  p.X_exog.resize(d.rows(), 1 + static_cast<Eigen::Index>(exog.size()));
  p.X_exog.col(0).setOnes();
  for (std::size_t i = 0; i < exog.size(); ++i) p.X_exog.col(static_cast<Eigen::Index>(i) + 1) = d.predictors().col(exog[i]);
  p.y = d.response();

  std::vector<std::string> terms{o.endog, "(intercept)"};
  for (const auto& n : o.exog) terms.push_back(n);

  const auto diag = iv::diagnose(p, Vector::Constant(1, o.beta0));
  const std::vector<iv::KClassEstimate> estimates{iv::ols(p, flavor), iv::tsls(p, flavor), iv::liml(p, flavor),
                                                  iv::fuller(p, o.fuller_a, flavor)};

  json report{{"version", report::kVersion}, {"response", o.response}, {"endogenous", o.endog},
              {"exogenous", o.exog},         {"selector", o.selector}, {"instruments", names_of(d, chosen)},
              {"n", p.n()},                  {"robust", o.robust}};
  report["first_stage"] = {{"f", diag.first_stage_f},
                           {"df1", diag.first_stage_df.first},
                           {"df2", diag.first_stage_df.second},
                           {"p", diag.first_stage_p}};
  report["sargan"] = diag.sargan ? test_json(*diag.sargan) : json("n/a");
  report["anderson_rubin"] = test_json(diag.anderson_rubin);
  report["anderson_rubin"]["beta0"] = o.beta0;
  json est = json::array();
  for (const auto& e : estimates) {
    json coefs = json::array();
    for (std::size_t i = 0; i < terms.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      coefs.push_back({{"term", terms[i]},
                       {"estimate", e.beta(k)},
                       {"se", e.se_classical(k)},
                       {"t", e.t_classical(k)},
                       {"p", e.p_classical(k)},
                       {"se_robust", e.se_robust(k)},
                       {"t_robust", e.t_robust(k)},
                       {"p_robust", e.p_robust(k)},
                       {"ci_95", {e.ci_95[i].lower, e.ci_95[i].upper}}});
    }
    est.push_back({{"method", iv::to_string(e.method)}, {"k", e.k}, {"df_resid", e.df_resid}, {"coefficients", coefs}});
  }
  report["estimates"] = est;

  if (o.format == "json") {
    emit(o.output, json_text(report));
    return;
  }
  std::ostringstream out;
  out << "# instruments = ";
  for (std::size_t i = 0; i < chosen.size(); ++i) out << (i ? "," : "") << d.column_names()[chosen[i]];
  out << "\n# first_stage_f = " << report::format_number(diag.first_stage_f) << " on " << diag.first_stage_df.first
      << " and " << diag.first_stage_df.second << " df, p = " << report::format_number(diag.first_stage_p) << '\n';
  if (diag.sargan)
    out << "# sargan = " << report::format_number(diag.sargan->stat) << " on " << diag.sargan->df1
        << " df, p = " << report::format_number(diag.sargan->p) << '\n';
  else
    out << "# sargan = n/a\n";
  out << "# anderson_rubin_p = " << report::format_number(diag.anderson_rubin.p) << '\n';
  out << "method,k,term,estimate,se,t,p,se_robust,t_robust,p_robust,ci_lower,ci_upper\n";
  for (const auto& e : estimates) {
    for (std::size_t i = 0; i < terms.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      out << iv::to_string(e.method) << ',' << report::format_number(e.k) << ',' << terms[i] << ','
          << report::format_number(e.beta(k)) << ',' << report::format_number(e.se_classical(k)) << ','
          << report::format_number(e.t_classical(k)) << ',' << report::format_number(e.p_classical(k)) << ','
          << report::format_number(e.se_robust(k)) << ',' << report::format_number(e.t_robust(k)) << ','
          << report::format_number(e.p_robust(k)) << ',' << report::format_number(e.ci_95[i].lower) << ','
          << report::format_number(e.ci_95[i].upper) << '\n';
    }
  }
  emit(o.output, out.str());
}

// ------------------------------------------------------------ fit-mediation

struct FitMediationOptions {
  std::string data;
  std::string response;
  std::vector<std::string> exposures;
  std::vector<std::string> mediators;
  std::string scenario = "multiple_M";
  std::string selector = "semms";
  double alpha = 0.05;
  int initial_screen = 5;
  double pseudocount = 8.0;
  std::uint64_t seed = 0;
  std::string output;
};

json path_json(const std::string& from, const std::string& to, const mediation::PathEstimate& p) {
  return {{"from", from}, {"to", to}, {"estimate", p.estimate}, {"se", p.se}, {"t", p.t}, {"p", p.p}};
}

void cmd_fit_mediation(const FitMediationOptions& o) {
  const Dataset d = load_csv(o.data, o.response);
  mediation::MediationDesign design;
  design.y = d.response();
  design.selector = o.selector == "semms" ? mediation::Selector::Semms : mediation::Selector::Lasso;
  if (o.selector != "semms" && o.selector != "lasso") fail(ErrorKind::InvalidArgument, "--selector must be semms or lasso");
  design.semms.initial_screen = o.initial_screen;
  design.semms.prior_pseudocount = o.pseudocount;
  design.lasso.cv_seed = o.seed;

  std::vector<int> xs, ms;
  if (o.scenario == "multiple_M") {
    if (o.exposures.size() != 1) fail(ErrorKind::InvalidArgument, "multiple_M needs exactly one --exposure");
    design.scenario = mediation::Scenario::MultipleM;
    xs = indices_of(d, o.exposures);
    ms = o.mediators.empty() ? remaining(d, xs) : indices_of(d, o.mediators);
  } else if (o.scenario == "multiple_X") {
    if (o.mediators.size() != 1) fail(ErrorKind::InvalidArgument, "multiple_X needs exactly one --mediators column");
    design.scenario = mediation::Scenario::MultipleX;
    ms = indices_of(d, o.mediators);
    xs = o.exposures.empty() ? remaining(d, ms) : indices_of(d, o.exposures);
  } else {
    fail(ErrorKind::InvalidArgument, "--scenario must be multiple_M or multiple_X");
  }
  design.x = columns(d, xs);
  design.mediators = columns(d, ms);

  const bool multiple_m = design.scenario == mediation::Scenario::MultipleM;
  const auto sel = multiple_m ? mediation::select_mediators(design) : mediation::select_main_effects(design);
  if (sel.selected.empty()) fail(ErrorKind::EmptySelection, "the selector returned no variables");
  const std::vector<int> pool = multiple_m ? ms : xs;
  std::vector<int> chosen;
  for (int j : sel.selected) chosen.push_back(pool[j]);
  if (multiple_m) ms = chosen;
  else xs = chosen;

  const auto fit = mediation::mediation_fit(d.response(), columns(d, xs), columns(d, ms), o.alpha);
  const auto x_names = names_of(d, xs);
  const auto m_names = names_of(d, ms);
  json a = json::array(), b = json::array(), c = json::array(), total = json::array(), indirect = json::array();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j < ms.size(); ++j) {
      a.push_back(path_json(x_names[i], m_names[j], fit.a[i][j]));
      indirect.push_back({{"from", x_names[i]}, {"via", m_names[j]}, {"estimate", fit.indirect[i][j]}});
    }
    c.push_back(path_json(x_names[i], o.response, fit.c_prime[i]));
    total.push_back(path_json(x_names[i], o.response, fit.total[i]));
  }
  for (std::size_t j = 0; j < ms.size(); ++j) b.push_back(path_json(m_names[j], o.response, fit.b[j]));

  json locked_out = json::array();
  for (const auto& lo : sel.locked_out) {
    if (lo.index >= static_cast<int>(pool.size()) || lo.trigger >= static_cast<int>(pool.size())) continue;
    locked_out.push_back({{"name", d.column_names()[pool[lo.index]]},
                          {"trigger", d.column_names()[pool[lo.trigger]]},
                          {"r", lo.r}});
  }
  const json report{{"version", report::kVersion},
                    {"response", o.response},
                    {"scenario", o.scenario},
                    {"selector", o.selector},
                    {"alpha", o.alpha},
                    {"exposures", x_names},
                    {"mediators", m_names},
                    {"locked_out", locked_out},
                    {"a", a},
                    {"b", b},
                    {"c_prime", c},
                    {"total", total},
                    {"indirect", indirect},
                    {"classification", mediation::to_string(fit.classification)},
                    {"df_resid", fit.df_resid}};
  emit(o.output, json_text(report));
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  std::string config;
  std::vector<std::string> set;
  int B = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 1;
  std::string format = "csv";
  std::string output;
};

report::KeyValues overrides(const SimulateOptions& o) {
  report::KeyValues kv = o.config.empty() ? report::KeyValues{} : report::read_key_values(o.config);
  std::string text;
  for (const auto& s : o.set) text += s + "\n";
  for (const auto& [k, v] : report::parse_key_values(text)) kv[k] = v;
  if (o.B > 0) kv["B"] = std::to_string(o.B);
  if (o.seed_given) kv["seed"] = std::to_string(o.seed);
  return kv;
}

void cmd_simulate_iv(const SimulateOptions& o) {
  const auto cfg = report::iv_config_from(overrides(o));
  cfg.spec.validate();
  const auto m = sim::run_iv_study(cfg.spec, cfg.selectors, cfg.estimators, o.threads);
  std::ostringstream out;
  if (o.format == "json") out << json_text(report::to_json(cfg, m));
  else report::write_csv(out, cfg, m);
  emit(o.output, out.str());
}

void cmd_simulate_mediation(const SimulateOptions& o) {
  const auto cfg = report::mediation_config_from(overrides(o));
  cfg.spec.validate();
  const auto m = sim::run_mediation_study(cfg.spec, cfg.selectors, o.threads);
  std::ostringstream out;
  if (o.format == "json") out << json_text(report::to_json(cfg, m));
  else report::write_csv(out, cfg, m);
  emit(o.output, out.str());
}

void add_simulate_options(CLI::App* sub, SimulateOptions& o) {
  sub->add_option("--config", o.config, "key = value config file")->check(CLI::ExistingFile);
  sub->add_option("--set", o.set, "override one config key (key=value)");
  sub->add_option("--B", o.B, "number of replications")->check(CLI::PositiveNumber);
  sub->add_option("--seed", o.seed, "master seed")->each([&o](const std::string&) { o.seed_given = true; });
  sub->add_option("--threads", o.threads, "worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
  sub->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  sub->add_option("--output,-o", o.output, "output file (default stdout)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variable selection for two-stage models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(report::kVersion));

  SelectOptions sel;
  auto* select = app.add_subcommand("select", "select predictors of a response with SEMMS or the lasso");
  select->add_option("--data", sel.data, "input CSV")->required()->check(CLI::ExistingFile);
  select->add_option("--response", sel.response, "response column")->required();
  select->add_option("--method", sel.method, "semms or lasso")->check(CLI::IsMember({"semms", "lasso"}));
  select->add_option("--lock", sel.lock, "columns kept in every model (semms)")->delimiter(',');
  select->add_option("--lockout", sel.lockout, "lock-out correlation threshold");
  select->add_option("--initial-screen", sel.initial_screen, "candidates placed in the starting model (semms)");
  select->add_option("--pseudocount", sel.pseudocount, "pseudo-count on the mixture proportions (semms)");
  select->add_option("--folds", sel.folds, "cross-validation folds (lasso)");
  select->add_option("--seed", sel.seed, "fold assignment seed (lasso)");
  select->add_option("--format", sel.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  select->add_option("--output,-o", sel.output, "output file (default stdout)");
  select->add_option("--edges", sel.edges, "write the node/edge list CSV here");

  FitIvOptions fiv;
  auto* fit_iv = app.add_subcommand("fit-iv", "select instruments, then fit OLS, TSLS, LIML and Fuller");
  fit_iv->add_option("--data", fiv.data, "input CSV")->required()->check(CLI::ExistingFile);
  fit_iv->add_option("--response", fiv.response, "outcome column")->required();
  fit_iv->add_option("--endog", fiv.endog, "endogenous regressor column")->required();
  fit_iv->add_option("--exog", fiv.exog, "exogenous controls (an intercept is always added)")->delimiter(',');
  fit_iv->add_option("--instruments", fiv.instruments, "candidate instruments (default: all other columns)")
      ->delimiter(',');
  fit_iv->add_option("--selector", fiv.selector, "semms, lasso or none")
      ->check(CLI::IsMember({"semms", "lasso", "none"}));
  fit_iv->add_option("--robust", fiv.robust, "hc0 or hc1")->check(CLI::IsMember({"hc0", "hc1"}));
  fit_iv->add_option("--beta0", fiv.beta0, "null value for the Anderson-Rubin test");
  fit_iv->add_option("--fuller-a", fiv.fuller_a, "Fuller constant");
  fit_iv->add_option("--initial-screen", fiv.initial_screen, "SEMMS starting candidates");
  fit_iv->add_option("--pseudocount", fiv.pseudocount, "SEMMS pseudo-count");
  fit_iv->add_option("--seed", fiv.seed, "fold assignment seed (lasso)");
  fit_iv->add_option("--format", fiv.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  fit_iv->add_option("--output,-o", fiv.output, "output file (default stdout)");

  FitMediationOptions fmed;
  auto* fit_med = app.add_subcommand("fit-mediation", "select mediators or exposures, then fit the mediation paths");
  fit_med->add_option("--data", fmed.data, "input CSV")->required()->check(CLI::ExistingFile);
  fit_med->add_option("--response", fmed.response, "outcome column")->required();
  fit_med->add_option("--exposure", fmed.exposures, "exposure column(s)")->delimiter(',');
  fit_med->add_option("--mediators", fmed.mediators, "mediator column(s)")->delimiter(',');
  fit_med->add_option("--scenario", fmed.scenario, "multiple_M or multiple_X")
      ->check(CLI::IsMember({"multiple_M", "multiple_X"}));
  fit_med->add_option("--selector", fmed.selector, "semms or lasso")->check(CLI::IsMember({"semms", "lasso"}));
  fit_med->add_option("--alpha", fmed.alpha, "significance level")->check(CLI::Range(0.0, 1.0));
  fit_med->add_option("--initial-screen", fmed.initial_screen, "SEMMS starting candidates");
  fit_med->add_option("--pseudocount", fmed.pseudocount, "SEMMS pseudo-count");
  fit_med->add_option("--seed", fmed.seed, "fold assignment seed (lasso)");
  fit_med->add_option("--output,-o", fmed.output, "output file (default stdout)");

  SimulateOptions siv, smed;
  auto* sim_iv = app.add_subcommand("simulate-iv", "Monte Carlo study of the IV cut-off design");
  add_simulate_options(sim_iv, siv);
  auto* sim_med = app.add_subcommand("simulate-mediation", "Monte Carlo study of the mediation scenarios");
  add_simulate_options(sim_med, smed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*select) cmd_select(sel);
    else if (*fit_iv) cmd_fit_iv(fiv);
    else if (*fit_med) cmd_fit_mediation(fmed);
    else if (*sim_iv) cmd_simulate_iv(siv);
    else if (*sim_med) cmd_simulate_mediation(smed);
  } catch (const Error& e) {
    error_record(to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    error_record("Internal", e.what());
    return kNumerical;
  }
  return kOk;
}
