#include "uavsec/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace uavsec {

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double linear_to_db(double lin) { return 10.0 * std::log10(lin); }
double dbm_to_watt(double dbm) { return std::pow(10.0, dbm / 10.0) * 1e-3; }
double watt_to_dbm(double w) { return 10.0 * std::log10(w / 1e-3); }

namespace {

bool finite(double x) { return std::isfinite(x); }

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

struct KvDoc {
  std::map<std::string, std::string> kv;

  bool has(const std::string& key) const { return kv.count(key) > 0; }

  double number(const std::string& key) const {
    const std::string& v = kv.at(key);
    size_t pos = 0;
    double x = std::stod(v, &pos);
    while (pos < v.size() && std::isspace(static_cast<unsigned char>(v[pos]))) pos++;
    if (pos != v.size()) throw ScenarioError("bad number for key '" + key + "': " + v);
    return x;
  }

  std::vector<double> numbers(const std::string& key) const {
    std::vector<double> out;
    std::istringstream ss(kv.at(key));
    std::string tok;
    while (ss >> tok) {
      if (tok == ";" || tok == ",") continue;
      // strip trailing separators
      while (!tok.empty() && (tok.back() == ',' || tok.back() == ';')) tok.pop_back();
      if (tok.empty()) continue;
      out.push_back(std::stod(tok));
    }
    return out;
  }
};

KvDoc parse_kv(const std::string& text) {
  KvDoc doc;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ScenarioError("parse error at line " + std::to_string(lineno) + ": expected key = value");
    auto trim = [](std::string s) {
      auto a = s.find_first_not_of(" \t\r");
      auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw ScenarioError("parse error at line " + std::to_string(lineno) + ": empty key");
    doc.kv[key] = val;
  }
  return doc;
}

// Reads `key`, or `key_db` / `key_dbm` converted to linear. Linear wins if both
// forms are present.
bool read_power(const KvDoc& d, const std::string& key, bool dbm, double* out) {
  if (d.has(key)) {
    *out = d.number(key);
    return true;
  }
  const std::string suffixed = key + (dbm ? "_dbm" : "_db");
  if (d.has(suffixed)) {
    *out = dbm ? dbm_to_watt(d.number(suffixed)) : db_to_linear(d.number(suffixed));
    return true;
  }
  return false;
}

bool read_power_list(const KvDoc& d, const std::string& key, bool dbm, std::vector<double>* out) {
  if (d.has(key)) {
    *out = d.numbers(key);
    return true;
  }
  const std::string suffixed = key + (dbm ? "_dbm" : "_db");
  if (d.has(suffixed)) {
    *out = d.numbers(suffixed);
    for (double& x : *out) x = dbm ? dbm_to_watt(x) : db_to_linear(x);
    return true;
  }
  return false;
}

}  // namespace

std::vector<std::string> validate(const Scenario& s) {
  std::vector<std::string> errs;
  const int K = s.num_sn();
  if (K < 1) errs.push_back("sn_positions: need at least one SN");
  for (int k = 0; k < K; k++) {
    if (!finite(s.sn_positions[k].x()) || !finite(s.sn_positions[k].y()))
      errs.push_back("sn_positions[" + std::to_string(k) + "] must be finite");
  }
  if (s.n_slots < 2) errs.push_back("n_slots must be >= 2");
  if (!(s.slot_len > 0)) errs.push_back("slot_len must be positive");
  if (s.n_slots >= 2 && s.slot_len > 0) {
    const double t = s.n_slots * s.slot_len;
    if (std::abs(s.flight_period - t) > 1e-9 * std::max(1.0, std::abs(t)))
      errs.push_back("flight_period must equal n_slots * slot_len");
  }
  if (!(s.uav_altitude > 0)) errs.push_back("uav_altitude must be positive");
  if (s.v_max < 0 || !finite(s.v_max)) errs.push_back("v_max must be nonnegative and finite");
  if (!(s.p_an_max > 0)) errs.push_back("p_an_max must be positive");
  if (!(s.beta0 > 0)) errs.push_back("beta0 must be positive");
  if (!(s.lambda_self > 0)) errs.push_back("lambda_self must be positive");
  if (!(s.rho_si > 0 && s.rho_si <= 1)) errs.push_back("rho_si must be in (0,1]");
  if (!(s.noise_uav > 0)) errs.push_back("noise_uav must be positive");
  if (s.sn_tx_power.size() != K) {
    errs.push_back("sn_tx_power must have one entry per SN");
  } else {
    for (int k = 0; k < K; k++)
      if (!(s.sn_tx_power(k) > 0)) errs.push_back("sn_tx_power[" + std::to_string(k) + "] must be positive");
  }
  if (s.noise_sn.size() != K) {
    errs.push_back("noise_sn must have one entry per SN");
  } else {
    for (int m = 0; m < K; m++)
      if (!(s.noise_sn(m) > 0)) errs.push_back("noise_sn[" + std::to_string(m) + "] must be positive");
  }
  if (s.lambda_eve.rows() != K || s.lambda_eve.cols() != K) {
    errs.push_back("lambda_eve must be K x K");
  } else {
    for (int k = 0; k < K; k++)
      for (int m = 0; m < K; m++)
        if (m != k && !(s.lambda_eve(k, m) > 0))
          errs.push_back("lambda_eve(" + std::to_string(k) + "," + std::to_string(m) + ") must be positive");
  }
  if (!(s.eps_rop > 0 && s.eps_rop < 1)) errs.push_back("eps_rop must be in (0,1)");
  if (!(s.eps_sop > 0 && s.eps_sop < 1)) errs.push_back("eps_sop must be in (0,1)");
  return errs;
}

void validate_or_throw(const Scenario& s) {
  auto errs = validate(s);
  if (!errs.empty()) {
    std::string msg = "invalid scenario:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw ScenarioError(msg);
  }
}

Scenario load_scenario(const std::string& config_text) {
  KvDoc d = parse_kv(config_text);
  Scenario s;

  if (!d.has("sn_positions")) throw ScenarioError("missing key: sn_positions");
  {
    auto xs = d.numbers("sn_positions");
    if (xs.size() % 2 != 0) throw ScenarioError("sn_positions needs an even count of coordinates");
    for (size_t i = 0; i + 1 < xs.size(); i += 2) s.sn_positions.push_back(Vec2(xs[i], xs[i + 1]));
  }
  const int K = s.num_sn();

  auto require = [&](const char* key, double* out) {
    if (!d.has(key)) throw ScenarioError(std::string("missing key: ") + key);
    *out = d.number(key);
  };
  require("uav_altitude", &s.uav_altitude);
  require("flight_period", &s.flight_period);
  {
    double n = 0;
    require("n_slots", &n);
    s.n_slots = static_cast<int>(n);
  }
  require("slot_len", &s.slot_len);
  require("v_max", &s.v_max);

  if (!read_power(d, "p_an_max", true, &s.p_an_max)) throw ScenarioError("missing key: p_an_max (or p_an_max_dbm)");
  if (!read_power(d, "beta0", false, &s.beta0)) throw ScenarioError("missing key: beta0 (or beta0_db)");
  if (!read_power(d, "lambda_self", false, &s.lambda_self)) throw ScenarioError("missing key: lambda_self (or lambda_self_db)");
  if (!read_power(d, "rho_si", false, &s.rho_si)) throw ScenarioError("missing key: rho_si (or rho_si_db)");
  if (!read_power(d, "noise_uav", true, &s.noise_uav)) throw ScenarioError("missing key: noise_uav (or noise_uav_dbm)");

  std::vector<double> v;
  if (!read_power_list(d, "sn_tx_power", true, &v)) throw ScenarioError("missing key: sn_tx_power (or sn_tx_power_dbm)");
  if (v.size() == 1) v.assign(K, v[0]);
  if (static_cast<int>(v.size()) != K) throw ScenarioError("sn_tx_power: expected 1 or K values");
  s.sn_tx_power = Eigen::Map<Eigen::VectorXd>(v.data(), v.size());

  if (!read_power_list(d, "noise_sn", true, &v)) throw ScenarioError("missing key: noise_sn (or noise_sn_dbm)");
  if (v.size() == 1) v.assign(K, v[0]);
  if (static_cast<int>(v.size()) != K) throw ScenarioError("noise_sn: expected 1 or K values");
  s.noise_sn = Eigen::Map<Eigen::VectorXd>(v.data(), v.size());

  if (!read_power_list(d, "lambda_eve", false, &v)) throw ScenarioError("missing key: lambda_eve (or lambda_eve_db)");
  if (v.size() == 1) {
    s.lambda_eve = Eigen::MatrixXd::Constant(K, K, v[0]);
  } else if (static_cast<int>(v.size()) == K * K) {
    s.lambda_eve = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(v.data(), K, K);
  } else {
    throw ScenarioError("lambda_eve: expected 1 or K*K values");
  }

  require("eps_rop", &s.eps_rop);
  require("eps_sop", &s.eps_sop);

  validate_or_throw(s);
  return s;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_scenario(ss.str());
}

std::string serialize_scenario(const Scenario& s) {
  std::ostringstream out;
  out << "sn_positions =";
  for (const auto& w : s.sn_positions) out << " " << fmt(w.x()) << " " << fmt(w.y()) << ";";
  out << "\n";
  out << "sn_tx_power =";
  for (int k = 0; k < s.sn_tx_power.size(); k++) out << " " << fmt(s.sn_tx_power(k));
  out << "\n";
  out << "uav_altitude = " << fmt(s.uav_altitude) << "\n";
  out << "flight_period = " << fmt(s.flight_period) << "\n";
  out << "n_slots = " << s.n_slots << "\n";
  out << "slot_len = " << fmt(s.slot_len) << "\n";
  out << "v_max = " << fmt(s.v_max) << "\n";
  out << "p_an_max = " << fmt(s.p_an_max) << "\n";
  out << "beta0 = " << fmt(s.beta0) << "\n";
  out << "lambda_self = " << fmt(s.lambda_self) << "\n";
  out << "rho_si = " << fmt(s.rho_si) << "\n";
  out << "lambda_eve =";
  for (int k = 0; k < s.lambda_eve.rows(); k++)
    for (int m = 0; m < s.lambda_eve.cols(); m++) out << " " << fmt(s.lambda_eve(k, m));
  out << "\n";
  out << "noise_uav = " << fmt(s.noise_uav) << "\n";
  out << "noise_sn =";
  for (int m = 0; m < s.noise_sn.size(); m++) out << " " << fmt(s.noise_sn(m));
  out << "\n";
  out << "eps_rop = " << fmt(s.eps_rop) << "\n";
  out << "eps_sop = " << fmt(s.eps_sop) << "\n";
  return out.str();
}

Scenario benchmark_scenario() {
  Scenario s;
  s.sn_positions = {Vec2(-240, -160), Vec2(160, -160), Vec2(240, 80), Vec2(0, 160)};
  const int K = 4;
  s.sn_tx_power = Eigen::VectorXd::Constant(K, dbm_to_watt(30.0));
  s.uav_altitude = 100.0;
  s.flight_period = 210.0;
  s.n_slots = 210;
  s.slot_len = 1.0;
  s.v_max = 10.0;
  s.p_an_max = dbm_to_watt(36.0);
  s.beta0 = db_to_linear(-60.0);
  s.lambda_self = db_to_linear(-60.0);
  s.rho_si = db_to_linear(-60.0);
  // channel gain plus ~50 dB ground-to-ground path loss at the ~400 m
  // inter-node spacing; keeps eavesdropper links weaker than the uplink
  s.lambda_eve = Eigen::MatrixXd::Constant(K, K, db_to_linear(-110.0));
  s.noise_uav = dbm_to_watt(-110.0);
  s.noise_sn = Eigen::VectorXd::Constant(K, dbm_to_watt(-110.0));
  s.eps_rop = 0.05;
  s.eps_sop = 0.05;
  return s;
}

}  // namespace uavsec
