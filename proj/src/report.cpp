#include "tsvs/report.hpp"

#include "tsvs/error.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace tsvs::report {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  fail(ErrorKind::InvalidArgument, key + ": expected a number, got '" + v + "'");
}

long long to_integer(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used == v.size()) return i;
  } catch (const std::exception&) {
  }
  fail(ErrorKind::InvalidArgument, key + ": expected an integer, got '" + v + "'");
}

std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using Setter = std::function<void(const std::string&, const std::string&)>;

void apply_settings(const KeyValues& kv, const std::map<std::string, Setter>& setters) {
  for (const auto& [key, value] : kv) {
    const auto it = setters.find(key);
    if (it == setters.end()) fail(ErrorKind::InvalidArgument, "unknown config key '" + key + "'");
    it->second(key, value);
  }
}

void selector_setters(sim::Selectors& s, std::map<std::string, Setter>& setters) {
  setters["selectors"] = [&s](const std::string& key, const std::string& v) {
    s.semms = s.lasso = false;
    for (const auto& name : split_list(v)) {
      if (name == "semms") s.semms = true;
      else if (name == "lasso") s.lasso = true;
      else fail(ErrorKind::InvalidArgument, key + ": unknown selector '" + name + "'");
    }
  };
  setters["semms.lockout_threshold"] = [&s](const std::string& k, const std::string& v) {
    s.semms_config.lockout_threshold = to_double(k, v);
  };
  setters["semms.initial_screen"] = [&s](const std::string& k, const std::string& v) {
    s.semms_config.initial_screen = static_cast<int>(to_integer(k, v));
  };
  setters["semms.prior_pseudocount"] = [&s](const std::string& k, const std::string& v) {
    s.semms_config.prior_pseudocount = to_double(k, v);
  };
  setters["lasso.folds"] = [&s](const std::string& k, const std::string& v) {
    s.lasso_config.folds = static_cast<int>(to_integer(k, v));
  };
  setters["lasso.n_lambdas"] = [&s](const std::string& k, const std::string& v) {
    s.lasso_config.n_lambdas = static_cast<int>(to_integer(k, v));
  };
  setters["lasso.lambda_min_ratio"] = [&s](const std::string& k, const std::string& v) {
    s.lasso_config.lambda_min_ratio = to_double(k, v);
  };
}

void selector_values(const sim::Selectors& s, KeyValues& kv) {
  std::string names;
  if (s.semms) names = "semms";
  if (s.lasso) names += names.empty() ? "lasso" : ",lasso";
  kv["selectors"] = names;
  kv["semms.lockout_threshold"] = exact(s.semms_config.lockout_threshold);
  kv["semms.initial_screen"] = std::to_string(s.semms_config.initial_screen);
  kv["semms.prior_pseudocount"] = exact(s.semms_config.prior_pseudocount);
  kv["lasso.folds"] = std::to_string(s.lasso_config.folds);
  kv["lasso.n_lambdas"] = std::to_string(s.lasso_config.n_lambdas);
  kv["lasso.lambda_min_ratio"] = exact(s.lasso_config.lambda_min_ratio);
}

void write_metadata(std::ostream& out, const KeyValues& kv) {
  out << "# version = " << kVersion << '\n';
  for (const auto& [k, v] : kv) out << "# " << k << " = " << v << '\n';
}

nlohmann::json number(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::ParseError, "line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) fail(ErrorKind::ParseError, "line " + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, value).second)
      fail(ErrorKind::ParseError, "line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_key_values(buf.str());
}

IvStudyConfig iv_config_from(const KeyValues& kv, IvStudyConfig c) {
  auto& s = c.spec;
  std::map<std::string, Setter> set;
  set["n"] = [&](const std::string& k, const std::string& v) { s.n = static_cast<int>(to_integer(k, v)); };
  set["P"] = [&](const std::string& k, const std::string& v) { s.P = static_cast<int>(to_integer(k, v)); };
  set["L"] = [&](const std::string& k, const std::string& v) { s.L = static_cast<int>(to_integer(k, v)); };
  set["mu2"] = [&](const std::string& k, const std::string& v) { s.mu2 = to_double(k, v); };
  set["beta"] = [&](const std::string& k, const std::string& v) { s.beta = to_double(k, v); };
  set["rho"] = [&](const std::string& k, const std::string& v) { s.rho = to_double(k, v); };
  set["endog_corr"] = [&](const std::string& k, const std::string& v) { s.endog_corr = to_double(k, v); };
  set["B"] = [&](const std::string& k, const std::string& v) { s.B = static_cast<int>(to_integer(k, v)); };
  set["seed"] = [&](const std::string& k, const std::string& v) {
    s.master_seed = static_cast<std::uint64_t>(to_integer(k, v));
  };
  set["scale"] = [&](const std::string& k, const std::string& v) {
    if (v == "n") s.scale = sim::ConcentrationScale::SampleSize;
    else if (v == "P") s.scale = sim::ConcentrationScale::Instruments;
    else fail(ErrorKind::InvalidArgument, k + ": expected n or P");
  };
  set["estimators"] = [&](const std::string& k, const std::string& v) {
    c.estimators = {false, false, false};
    for (const auto& name : split_list(v)) {
      if (name == "tsls") c.estimators.tsls = true;
      else if (name == "fuller") c.estimators.fuller = true;
      else if (name == "liml") c.estimators.liml = true;
      else fail(ErrorKind::InvalidArgument, k + ": unknown estimator '" + name + "'");
    }
  };
  selector_setters(c.selectors, set);
  apply_settings(kv, set);
  return c;
}

MediationStudyConfig mediation_config_from(const KeyValues& kv, MediationStudyConfig c) {
  auto& s = c.spec;
  std::map<std::string, Setter> set;
  set["scenario"] = [&](const std::string& k, const std::string& v) {
    if (v == "multiple_M") s.scenario = mediation::Scenario::MultipleM;
    else if (v == "multiple_X") s.scenario = mediation::Scenario::MultipleX;
    else fail(ErrorKind::InvalidArgument, k + ": expected multiple_M or multiple_X");
  };
  set["setting"] = [&](const std::string& k, const std::string& v) { s.setting = static_cast<int>(to_integer(k, v)); };
  set["beta1"] = [&](const std::string& k, const std::string& v) { s.beta1 = to_double(k, v); };
  set["beta2"] = [&](const std::string& k, const std::string& v) { s.beta2 = to_double(k, v); };
  set["N"] = [&](const std::string& k, const std::string& v) { s.N = static_cast<int>(to_integer(k, v)); };
  set["P"] = [&](const std::string& k, const std::string& v) { s.P = static_cast<int>(to_integer(k, v)); };
  set["rho"] = [&](const std::string& k, const std::string& v) {
    if (v == "none") s.rho.reset();
    else s.rho = to_double(k, v);
  };
  set["error_variance"] = [&](const std::string& k, const std::string& v) { s.error_variance = to_double(k, v); };
  set["B"] = [&](const std::string& k, const std::string& v) { s.B = static_cast<int>(to_integer(k, v)); };
  set["seed"] = [&](const std::string& k, const std::string& v) {
    s.master_seed = static_cast<std::uint64_t>(to_integer(k, v));
  };
  selector_setters(c.selectors, set);
  apply_settings(kv, set);
  return c;
}

KeyValues to_key_values(const IvStudyConfig& c) {
  const auto& s = c.spec;
  KeyValues kv;
  kv["n"] = std::to_string(s.n);
  kv["P"] = std::to_string(s.P);
  kv["L"] = std::to_string(s.L);
  kv["mu2"] = exact(s.mu2);
  kv["beta"] = exact(s.beta);
  kv["rho"] = exact(s.rho);
  kv["endog_corr"] = exact(s.endog_corr);
  kv["B"] = std::to_string(s.B);
  kv["seed"] = std::to_string(s.master_seed);
  kv["scale"] = s.scale == sim::ConcentrationScale::SampleSize ? "n" : "P";
  std::string est;
  for (auto [on, name] : {std::pair{c.estimators.tsls, "tsls"}, std::pair{c.estimators.fuller, "fuller"},
                          std::pair{c.estimators.liml, "liml"}}) {
    if (on) est += est.empty() ? name : std::string(",") + name;
  }
  kv["estimators"] = est;
  selector_values(c.selectors, kv);
  return kv;
}

KeyValues to_key_values(const MediationStudyConfig& c) {
  const auto& s = c.spec;
  KeyValues kv;
  kv["scenario"] = s.scenario == mediation::Scenario::MultipleM ? "multiple_M" : "multiple_X";
  kv["setting"] = std::to_string(s.setting);
  kv["beta1"] = exact(s.beta1);
  kv["beta2"] = exact(s.beta2);
  kv["N"] = std::to_string(s.N);
  kv["P"] = std::to_string(s.P);
  kv["rho"] = s.rho ? exact(*s.rho) : "none";
  kv["error_variance"] = exact(s.error_variance);
  kv["B"] = std::to_string(s.B);
  kv["seed"] = std::to_string(s.master_seed);
  selector_values(c.selectors, kv);
  return kv;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_csv(std::ostream& out, const IvStudyConfig& config, const sim::IvStudyMetrics& m) {
  write_metadata(out, to_key_values(config));
  out << "selector,estimator,n_zero,failures,contributing,bias,mad,tp,fp,mean_p,cp\n";
  for (const auto& r : m.rows) {
    out << r.selector << ',' << r.estimator << ',' << r.n_zero << ',' << r.failures << ',' << r.contributing
        << ',' << format_number(r.bias) << ',' << format_number(r.mad) << ',' << format_number(r.tp) << ','
        << format_number(r.fp) << ',' << format_number(r.mean_p) << ',' << format_number(r.cp) << '\n';
  }
}

void write_csv(std::ostream& out, const MediationStudyConfig& config, const sim::MediationStudyMetrics& m) {
  write_metadata(out, to_key_values(config));
  out << "selector,n_zero,failures,contributing,tp,fp,b_rate,c_prime_rate,b_rate_all,bias,mad,cp\n";
  for (const auto& r : m.rows) {
    out << r.selector << ',' << r.n_zero << ',' << r.failures << ',' << r.contributing << ','
        << format_number(r.tp) << ',' << format_number(r.fp) << ',' << format_number(r.b_rate) << ','
        << format_number(r.c_prime_rate) << ',' << format_number(r.b_rate_all) << ',' << format_number(r.bias)
        << ',' << format_number(r.mad) << ',' << format_number(r.cp) << '\n';
  }
}

nlohmann::json to_json(const IvStudyConfig& config, const sim::IvStudyMetrics& m) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["config"] = to_key_values(config);
  j["rows"] = nlohmann::json::array();
  for (const auto& r : m.rows) {
    j["rows"].push_back({{"selector", r.selector},
                         {"estimator", r.estimator},
                         {"n_zero", r.n_zero},
                         {"failures", r.failures},
                         {"contributing", r.contributing},
                         {"bias", number(r.bias)},
                         {"mad", number(r.mad)},
                         {"tp", number(r.tp)},
                         {"fp", number(r.fp)},
                         {"mean_p", number(r.mean_p)},
                         {"cp", number(r.cp)}});
  }
  return j;
}

nlohmann::json to_json(const MediationStudyConfig& config, const sim::MediationStudyMetrics& m) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["config"] = to_key_values(config);
  j["rows"] = nlohmann::json::array();
  for (const auto& r : m.rows) {
    j["rows"].push_back({{"selector", r.selector},
                         {"n_zero", r.n_zero},
                         {"failures", r.failures},
                         {"contributing", r.contributing},
                         {"tp", number(r.tp)},
                         {"fp", number(r.fp)},
                         {"b_rate", number(r.b_rate)},
                         {"c_prime_rate", number(r.c_prime_rate)},
                         {"b_rate_all", number(r.b_rate_all)},
                         {"bias", number(r.bias)},
                         {"mad", number(r.mad)},
                         {"cp", number(r.cp)}});
  }
  return j;
}

}  // namespace tsvs::report
