// Experiment runner: threshold construction, threshold-to-threshold and
// flat-start campaigns, analytic curve tables and the property/statistics
// suite. Exit codes: 0 ok, 1 a check failed (or a run aborted), 2 bad
// configuration.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cdw/analytic.hpp"
#include "cdw/checks.hpp"
#include "cdw/full_model.hpp"
#include "cdw/oracle.hpp"
#include "cdw/parallel.hpp"
#include "cdw/statistics.hpp"
#include "cdw/toy_model.hpp"

namespace {

using namespace cdw;
using json = nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command;
  std::string model = "toy";
  std::string L_text = "256";
  double lambda = 100.0;
  std::uint64_t seed = 1;
  std::size_t n = 100;
  std::string u_text = "0,0.5,1,2,5,10,30,100";
  std::string fit_text = "30,100";
  std::size_t s_points = 100;
  std::string out = ".";
  std::size_t workers = 1;
  bool oracle_check = false;
  bool correspondence_check = false;
  bool truncated_kernel = false;
  std::string fault;

  std::vector<std::size_t> L;
  std::vector<double> u_grid;
  double fit_lo = 0.0;
  double fit_hi = 0.0;
};

template <class T>
std::vector<T> parse_list(const std::string& text, const std::string& what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::stringstream one(item);
    T v{};
    if (!(one >> v) || !(one >> std::ws).eof()) throw ConfigError(what + ": cannot parse '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(what + " is empty");
  return out;
}

void validate(RunConfig& c) {
  if (c.model != "toy" && c.model != "full") throw ConfigError("model must be toy or full, got '" + c.model + "'");
  if (c.L_text.find('-') != std::string::npos) throw ConfigError("L must be positive");
  c.L = parse_list<std::size_t>(c.L_text, "L");
  for (auto L : c.L) {
    if (L < 3) throw ConfigError("L must be at least 3");
  }
  c.u_grid = parse_list<double>(c.u_text, "u-grid");
  for (std::size_t k = 0; k < c.u_grid.size(); ++k) {
    if (!(c.u_grid[k] >= 0.0) || !std::isfinite(c.u_grid[k])) throw ConfigError("u-grid values must be nonnegative");
    if (k > 0 && !(c.u_grid[k] > c.u_grid[k - 1])) throw ConfigError("u-grid must be strictly ascending");
  }
  const auto fit = parse_list<double>(c.fit_text, "fit-range");
  if (fit.size() != 2 || !(fit[0] > 0.0) || !(fit[1] > fit[0])) throw ConfigError("fit-range must be lo,hi with 0 < lo < hi");
  c.fit_lo = fit[0];
  c.fit_hi = fit[1];
  if (!(c.lambda > 0.0) || !std::isfinite(c.lambda)) throw ConfigError("lambda must be positive");
  if (c.n < 1) throw ConfigError("n must be at least 1");
  if (c.workers < 1) throw ConfigError("workers must be at least 1");
  if (c.s_points < 2) throw ConfigError("s-points must be at least 2");
  if (!c.fault.empty() && c.fault != "sum") throw ConfigError("unknown fault '" + c.fault + "'");
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Provenance lines for every output file. The worker count is left out on
// purpose: it does not change any result.
std::string header(const RunConfig& c) {
  std::ostringstream h;
  h << "# cdw_cli " << c.command << "\n";
  h << "# schema_version " << kSchemaVersion << "\n";
  h << "# model " << c.model << "\n";
  h << "# L " << c.L_text << "\n";
  h << "# lambda " << num(c.lambda) << "\n";
  h << "# seed " << c.seed << "\n";
  h << "# n " << c.n << "\n";
  h << "# u-grid " << c.u_text << "\n";
  h << "# fit-range " << c.fit_text << "\n";
  h << "# s-points " << c.s_points << "\n";
  h << "# truncated-kernel " << (c.truncated_kernel ? "true" : "false") << "\n";
  h << "# realization seed = stream_seed(seed, index)\n";
  return h.str();
}

json config_json(const RunConfig& c) {
  return json{{"model", c.model},         {"L", c.L},
              {"lambda", c.lambda},       {"seed", c.seed},
              {"n", c.n},                 {"u_grid", c.u_grid},
              {"fit_range", {c.fit_lo, c.fit_hi}},
              {"truncated_kernel", c.truncated_kernel}};
}

void write_file(const RunConfig& c, const std::string& name, const std::string& body) {
  const auto path = std::filesystem::path(c.out) / name;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << body;
  std::cout << "wrote " << path.string() << "\n";
}

void write_csv(const RunConfig& c, const std::string& name, const std::string& columns, const std::string& rows) {
  write_file(c, name, header(c) + columns + "\n" + rows);
}

void write_json(const RunConfig& c, const std::string& name, json body) {
  json doc{{"schema_version", kSchemaVersion}, {"command", c.command}, {"config", config_json(c)}};
  for (auto& [k, v] : body.items()) doc[k] = v;
  write_file(c, name, doc.dump(2) + "\n");
}

// Log-log slope over the grid points inside [lo, hi].
double fitted_slope(const std::vector<double>& u, const std::vector<double>& y, double lo, double hi) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t k = 0; k < u.size(); ++k) {
    if (u[k] >= lo && u[k] <= hi && y[k] > 0.0) {
      xs.push_back(u[k]);
      ys.push_back(y[k]);
    }
  }
  return xs.size() >= 2 ? stats::loglog_slope(xs, ys) : std::nan("");
}

// threshold ----------------------------------------------------------------

struct ThresholdRecord {
  std::int64_t S = 0;
  std::size_t k_plus = 0;
  std::size_t k_minus = 0;
  std::size_t top_plus = 0;
  double z_max = 0.0;
  double F_th = 0.0;
  IntField m_plus;
  IntField m_minus;
  std::vector<double> z_plus;
};

std::size_t argmax(const RealField& y) {
  return static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
}

ThresholdRecord threshold_record(const Disorder& d, const ModelParams& p, bool full_model) {
  ThresholdRecord rec;
  rec.S = d.S;
  // k+- are the defect sites of the closed construction and depend on the
  // disorder only; top_plus is where the model's coordinate peaks at m+
  rec.k_plus = toy::positive_index(d);
  rec.k_minus = toy::negative_index(d);
  if (!full_model) {
    const auto plus = toy::positive_threshold(d);
    const auto minus = toy::negative_threshold(d);
    const auto tf = toy::threshold_max_and_force(d, p);
    rec.top_plus = argmax(plus.z);
    rec.z_max = tf.z_plus_max;
    rec.F_th = tf.F_th;
    rec.m_plus = plus.m;
    rec.m_minus = minus.m;
    rec.z_plus = plus.z.values();
    return rec;
  }
  const auto th = full::threshold_full(d, p);
  const auto y = full::well_coords_full(th.m_plus, d, p);
  rec.top_plus = argmax(y);
  rec.z_max = y.values()[rec.top_plus];
  rec.F_th = th.F_th;
  rec.m_plus = th.m_plus;
  rec.z_plus = y.values();
  // negative threshold through alpha -> -alpha, m -> -m
  RealField neg = d.alpha;
  for (auto& a : neg) a = -a;
  const auto dn = Disorder::from_alpha(std::move(neg));
  const auto thn = full::threshold_full(dn, p);
  IntField mm = thn.m_plus;
  for (auto& v : mm) v = -v;
  rec.m_minus = min_normalized(std::move(mm));
  return rec;
}

int cmd_threshold(const RunConfig& c) {
  const bool full_model = c.model == "full";
  std::string summary;
  std::string fields;
  json brute{{"checked", 0}, {"mismatches", 0}, {"skipped_large_L", 0}};
  json agreement = json::array();
  std::size_t brute_bad = 0;
  for (std::size_t L : c.L) {
    const auto p = ModelParams::make(L, c.lambda, 0.0, c.truncated_kernel);
    const auto recs = parallel_map(c.n, c.workers, [&](std::size_t r) {
      return threshold_record(stats::realization(c.seed, r, L), p, full_model);
    });
    for (std::size_t r = 0; r < c.n; ++r) {
      const auto& rec = recs[r];
      summary += std::to_string(L) + "," + std::to_string(r) + "," + std::to_string(rec.S) + "," +
                 std::to_string(rec.k_plus) + "," + std::to_string(rec.k_minus) + "," + std::to_string(rec.top_plus) + "," + num(rec.z_max) + "," +
                 num(rec.F_th) + "\n";
      for (std::size_t i = 0; i < L; ++i) {
        fields += std::to_string(L) + "," + std::to_string(r) + "," + std::to_string(i) + "," +
                  std::to_string(rec.m_plus.values()[i]) + "," + std::to_string(rec.m_minus.values()[i]) + "," +
                  num(rec.z_plus[i]) + "\n";
      }
    }
    if (!c.oracle_check) continue;

    // exhaustive search where it is affordable
    const std::size_t brute_max = full_model ? 8 : oracle::kBruteMaxL;
    if (L <= brute_max) {
      const auto bad = parallel_map(c.n, c.workers, [&](std::size_t r) {
        const auto d = stats::realization(c.seed, r, L);
        if (full_model) return oracle::brute_threshold_full(d, p, 3) != recs[r].m_plus;
        const auto b = oracle::brute_threshold(d, 3);
        return b.m_plus != recs[r].m_plus || b.m_minus != recs[r].m_minus;
      });
      const auto count = static_cast<std::size_t>(std::count(bad.begin(), bad.end(), true));
      brute["checked"] = brute["checked"].get<std::size_t>() + c.n;
      brute["mismatches"] = brute["mismatches"].get<std::size_t>() + count;
      brute_bad += count;
    } else {
      brute["skipped_large_L"] = brute["skipped_large_L"].get<std::size_t>() + c.n;
    }

    // toy against full m+ at this lambda
    const auto other = parallel_map(c.n, c.workers, [&](std::size_t r) {
      const auto d = stats::realization(c.seed, r, L);
      return full_model ? toy::positive_threshold(d).m : full::threshold_full(d, p).m_plus;
    });
    json exceptions = json::array();
    std::size_t agree = 0;
    for (std::size_t r = 0; r < c.n; ++r) {
      if (other[r] == recs[r].m_plus) {
        ++agree;
      } else {
        exceptions.push_back(r);
      }
    }
    agreement.push_back({{"L", L}, {"lambda", c.lambda}, {"eta_L", p.eta * static_cast<double>(L)},
                         {"total", c.n}, {"agree", agree}, {"exceptions", exceptions}});
  }
  write_csv(c, "threshold_summary.csv", "L,realization,S,k_plus,k_minus,top_plus,z_plus_max,F_th", summary);
  write_csv(c, "threshold_fields.csv", "L,realization,site,m_plus,m_minus,z_plus", fields);
  if (c.oracle_check) {
    write_json(c, "threshold_check.json", json{{"brute_force", brute}, {"toy_vs_full", agreement}});
    if (brute_bad > 0) {
      std::cerr << brute_bad << " thresholds differ from exhaustive search\n";
      return 1;
    }
  }
  return 0;
}

// t2t ----------------------------------------------------------------------

int cmd_t2t(const RunConfig& c) {
  if (c.model != "toy") throw ConfigError("t2t runs on the toy model only");
  std::string events;
  std::string sigma;
  std::string counts;
  json corr = json::array();
  json fits = json::array();
  std::vector<double> lnL;
  std::vector<double> mean_events;
  bool corr_ok = true;
  for (std::size_t L : c.L) {
    const double dL = static_cast<double>(L);
    const auto traces = parallel_map(c.n, c.workers, [&](std::size_t r) {
      return toy::t2t_events(stats::realization(c.seed, r, L));
    });
    stats::SigmaSamples samples{L, c.u_grid, std::vector<std::vector<double>>(c.u_grid.size()), {}};
    for (std::size_t r = 0; r < c.n; ++r) {
      const auto& tr = traces[r];
      for (std::size_t t = 0; t < tr.events.size(); ++t) {
        const auto& e = tr.events[t];
        events += std::to_string(L) + "," + std::to_string(r) + "," + std::to_string(t + 1) + "," +
                  std::to_string(e.init_site) + "," + std::to_string(e.i_L) + "," + std::to_string(e.i_R) + "," +
                  std::to_string(e.size) + "," + std::to_string(e.sigma_cum) + "," + num(e.X_after) + "\n";
      }
      for (std::size_t k = 0; k < c.u_grid.size(); ++k) {
        samples.scaled[k].push_back(static_cast<double>(toy::observables_at(tr, c.u_grid[k] / dL).Sigma) / (dL * dL));
      }
      samples.event_counts.push_back(static_cast<double>(tr.events.size()));
    }
    std::vector<double> means;
    for (const auto& row : stats::summarize_sigma(samples)) {
      sigma += std::to_string(L) + "," + num(row.u) + "," + num(row.mean) + "," + num(row.se) + "," +
               std::to_string(row.n) + "," + num(row.phi) + "," + num(row.se > 0 ? (row.mean - row.phi) / row.se : 0.0) +
               "\n";
      means.push_back(row.mean);
    }
    const auto ev = stats::mean_se(samples.event_counts);
    counts += std::to_string(L) + "," + num(std::log(dL)) + "," + num(ev.mean) + "," + num(ev.se) + "," +
              std::to_string(ev.n) + "\n";
    lnL.push_back(std::log(dL));
    mean_events.push_back(ev.mean);
    fits.push_back({{"L", L}, {"slope", fitted_slope(c.u_grid, means, c.fit_lo, c.fit_hi)}});

    if (c.correspondence_check) {
      const auto reps = parallel_map(c.n, c.workers, [&](std::size_t r) {
        const auto rep = oracle::correspondence_check(stats::realization(c.seed, r, L));
        return rep.ok && rep.topples == rep.sigma_total ? std::string() : (rep.message.empty() ? "count" : rep.message);
      });
      json failures = json::array();
      for (std::size_t r = 0; r < c.n; ++r) {
        if (!reps[r].empty()) failures.push_back({{"realization", r}, {"message", reps[r]}});
      }
      corr_ok = corr_ok && failures.empty();
      corr.push_back({{"L", L}, {"checked", c.n}, {"failures", failures}});
    }
  }
  write_csv(c, "t2t_events.csv", "L,realization,tau,init_site,i_L,i_R,size,sigma_cum,X_after", events);
  write_csv(c, "t2t_sigma.csv", "L,u,mean,se,n,phi,z_score", sigma);
  write_csv(c, "t2t_event_counts.csv", "L,ln_L,mean_events,se,n", counts);
  json summary{{"sigma_loglog_slope", fits}};
  if (lnL.size() >= 2) {
    // events ~ a + b ln L
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double m = static_cast<double>(lnL.size());
    for (std::size_t k = 0; k < lnL.size(); ++k) {
      sx += lnL[k];
      sy += mean_events[k];
      sxx += lnL[k] * lnL[k];
      sxy += lnL[k] * mean_events[k];
    }
    const double b = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    summary["events_vs_lnL"] = {{"slope", b}, {"intercept", (sy - b * sx) / m}};
  }
  if (c.correspondence_check) summary["correspondence"] = corr;
  write_json(c, "t2t_summary.json", summary);
  return corr_ok ? 0 : 1;
}

// flat ---------------------------------------------------------------------

int cmd_flat(const RunConfig& c) {
  if (c.model != "toy") throw ConfigError("flat runs on the toy model only");
  std::string table;
  std::string dist;
  json fits = json::array();
  for (std::size_t L : c.L) {
    const double dL = static_cast<double>(L);
    const auto traces = parallel_map(c.n, c.workers, [&](std::size_t r) {
      return toy::flat_evolve(stats::realization(c.seed, r, L)).trace;
    });
    stats::FlatSamples samples{L, c.u_grid, std::vector<std::vector<double>>(c.u_grid.size()), {}};
    for (std::size_t r = 0; r < c.n; ++r) {
      const auto& tr = traces[r];
      for (std::size_t k = 0; k < c.u_grid.size(); ++k) samples.P[k].push_back(toy::observables_at(tr, c.u_grid[k] / dL).P);
      samples.event_counts.push_back(static_cast<double>(tr.events.size()));
      const double P0 = static_cast<double>(tr.total()) / dL;
      dist += std::to_string(L) + "," + std::to_string(r) + "," + std::to_string(tr.events.size()) + "," + num(P0) +
              "," + num(P0 / std::pow(dL, 1.5)) + "\n";
    }
    std::vector<double> means;
    for (const auto& row : stats::summarize_flat(samples)) {
      table += std::to_string(L) + "," + num(row.u) + "," + num(row.mean_P) + "," + num(row.se) + "," +
               std::to_string(row.n) + "," + num(row.collapse_x) + "," + num(row.collapse_y) + "\n";
      means.push_back(row.mean_P);
    }
    fits.push_back({{"L", L},
                    {"slope", fitted_slope(c.u_grid, means, c.fit_lo, c.fit_hi)},
                    {"mean_events", stats::mean_se(samples.event_counts).mean}});
  }
  write_csv(c, "flat_scaling.csv", "L,u,mean_P,se,n,X_sqrtL,P_over_L32", table);
  write_csv(c, "flat_P.csv", "L,realization,events,P,P_over_L32", dist);
  write_json(c, "flat_summary.json", json{{"P_loglog_slope", fits}});
  return 0;
}

// curves -------------------------------------------------------------------

int cmd_curves(const RunConfig& c) {
  std::string phi;
  for (double u : c.u_grid) phi += num(u) + "," + num(analytic::phi(u)) + "," + num(u * u * analytic::phi(u)) + "\n";
  write_csv(c, "curve_phi.csv", "u,phi,u2_phi", phi);

  std::string density;
  std::string norm;
  const double h = 0.25 / static_cast<double>(c.s_points);
  for (double u : c.u_grid) {
    const analytic::SigmaLimitCdf cdf(u);
    for (std::size_t k = 0; k < c.s_points; ++k) {
      const double s = (static_cast<double>(k) + 0.5) * h;
      density += num(u) + "," + num(s) + "," + num(analytic::p_u_density(u, s)) + "," + num(cdf(s)) + "\n";
    }
    // mean of s on v = 2 sqrt(s), which removes the logarithm at s = 0
    const double mean = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [&](double v) {
          const double s = 0.25 * v * v;
          return s > 0.0 && s < 0.25 ? s * analytic::p_u_density(u, s) * 0.5 * v : 0.0;
        },
        0.0, 1.0, 10, 1e-8);
    norm += num(u) + "," + num(cdf.total()) + "," + num(mean) + "," + num(analytic::phi(u)) + "\n";
  }
  write_csv(c, "curve_density.csv", "u,s,p_u,cdf", density);
  write_csv(c, "curve_normalization.csv", "u,mass,mean,phi", norm);

  std::string k0;
  for (int k = 0; k <= 60; ++k) {
    const double a = 0.01 * std::pow(10.0, k / 20.0);
    k0 += num(a) + "," + num(analytic::bessel_k0(2.0 * std::sqrt(a))) + "," + num(analytic::k0_density(a)) + "," +
          num(analytic::k0_cdf(a)) + "\n";
  }
  write_csv(c, "curve_k0.csv", "a,K0_2sqrt_a,density,cdf", k0);

  std::string cov;
  for (int k = 0; k <= 100; ++k) {
    const double t = k / 100.0;
    cov += num(t) + "," + num(analytic::bridge_covariance(t)) + "," + num(analytic::polar_covariance(t)) + "\n";
  }
  write_csv(c, "curve_covariance.csv", "t,bridge,polarization", cov);
  return 0;
}

// test ---------------------------------------------------------------------

std::vector<stats::TestResult> run_suite(const RunConfig& c) {
  using stats::TestResult;
  std::vector<TestResult> out;
  auto add = [&](std::vector<TestResult> rs) { out.insert(out.end(), rs.begin(), rs.end()); };
  const auto s = c.seed;
  add(checks::conservation(100000, s, c.fault == "sum"));
  add({checks::oracle_equivalence(200, s + 1)});
  add({checks::fixed_family_toy(1000, 64, s + 2)});
  add({checks::fixed_family_full(100, 64, 100.0, s + 3)});
  add({checks::wave_aggregation(1000, s + 4)});
  add(checks::forced_avalanche_bounds(1000, s + 5));
  add({checks::noncrossing(1000, s + 6)});
  add({checks::k_relation(1000, s + 7)});
  add({checks::record_extents(1000, s + 8)});
  add({checks::correspondence(1000, 64, s + 9)});

  const std::size_t w = c.workers;
  {
    const auto rep = stats::test_S_clt({1024, 10000, s + 10, w});
    const double rel = std::abs(rep.variance.mean - 1.0 / 12.0) * 12.0;
    out.push_back({"S_variance", rel, 0.1, rel <= 0.1,
                   "relative deviation of var(S / sqrt L) from 1/12 at L = 1024, n = 10000; se " + num(rep.variance.se)});
    out.push_back({"S_defect_rule", rep.defect_rule ? 0.0 : 1.0, 0.0, rep.defect_rule, "defect count is |S| or |S| + 2"});
    out.push_back({"S_normality", rep.ks_normal, 0.02, rep.ks_normal < 0.02, "lattice KS vs N(0, 1/12)"});
  }
  {
    const auto rep = stats::test_exchangeability({64, 4000, s + 11, w});
    const bool ok = rep.lags_flat && rep.sites_flat;
    out.push_back({"exchangeability", ok ? 0.0 : 1.0, 0.0, ok, "pair moments flat in lag and site moments equal within 3 se"});
    const double crit = 1.63 / std::sqrt(4000.0);
    out.push_back({"omega_marginal_uniform", rep.omega_ks, crit, rep.omega_ks < crit, "KS of omega_0 vs uniform, 1% level"});
  }
  {
    const auto rep = stats::test_d_uniform({32, 20000, s + 12, w});
    out.push_back({"d_uniform", rep.spacing.p_value, 0.01, rep.spacing.p_value > 0.01, "chi-square p-value, L = 32"});
    out.push_back({"d_independent_of_omega", rep.independence.p_value, 0.01, rep.independence.p_value > 0.01,
                   "chi-square p-value of d bins x max-omega bins"});
  }
  {
    const auto rep = stats::strain_bridge_check({1024, 1000, s + 13, w}, {0.0, 0.5});
    const double r0 = std::abs(rep.cov[0].mean * 12.0 - 1.0);
    const double r5 = std::abs(rep.cov[1].mean * -24.0 - 1.0);
    out.push_back({"bridge_cov0", r0, 0.1, r0 <= 0.1, "relative deviation of cov(0) from 1/12 at L = 1024"});
    out.push_back({"bridge_cov_half", r5, 0.15, r5 <= 0.15, "relative deviation of cov(1/2) from -1/24"});
    out.push_back({"strains_sum_to_zero", rep.strains_sum_to_zero ? 0.0 : 1.0, 0.0, rep.strains_sum_to_zero, ""});
  }
  {
    const auto rows = stats::estimate_sigma_scaling({1024, 2000, s + 14, w}, {0.0, 0.5, 1.0, 2.0, 5.0, 10.0});
    double worst = 0.0;
    for (const auto& r : rows) worst = std::max(worst, std::abs(r.mean - r.phi) / r.se);
    out.push_back({"sigma_vs_phi", worst, 4.0, worst <= 4.0, "max |mean - phi| / se over u in [0, 10], L = 1024"});
  }
  return out;
}

int cmd_test(const RunConfig& c) {
  const auto results = run_suite(c);
  json tests = json::array();
  bool all = true;
  for (const auto& r : results) {
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << " statistic=" << num(r.statistic)
              << " threshold=" << num(r.threshold) << "\n";
    tests.push_back({{"name", r.name}, {"statistic", r.statistic}, {"threshold", r.threshold}, {"pass", r.pass},
                     {"detail", r.detail}});
    all = all && r.pass;
  }
  json body{{"tests", tests}, {"all_passed", all}};
  if (!c.fault.empty()) body["injected_fault"] = c.fault;
  write_json(c, "test_report.json", body);
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  CLI::App app{"Charge-density-wave depinning experiments"};
  app.set_config("--config", "", "key = value file; command-line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1, 1);
  app.add_option("--model", cfg.model, "toy or full")->capture_default_str();
  app.add_option("--L", cfg.L_text, "lattice size, or a comma list")->capture_default_str();
  app.add_option("--lambda", cfg.lambda, "pinning strength")->capture_default_str();
  app.add_option("--seed", cfg.seed, "master seed")->capture_default_str();
  app.add_option("--n", cfg.n, "realizations per L")->capture_default_str();
  app.add_option("--u-grid", cfg.u_text, "comma list of u = X L, ascending")->capture_default_str();
  app.add_option("--fit-range", cfg.fit_text, "u range lo,hi for log-log slopes")->capture_default_str();
  app.add_option("--s-points", cfg.s_points, "density table points")->capture_default_str();
  app.add_option("--out", cfg.out, "output directory")->capture_default_str();
  app.add_option("--workers", cfg.workers, "worker threads")->capture_default_str();
  app.add_flag("--oracle-check", cfg.oracle_check, "cross-check thresholds (exhaustive at small L, toy vs full)");
  app.add_flag("--correspondence-check", cfg.correspondence_check, "check the sandpile correspondence per realization");
  app.add_flag("--truncated-kernel", cfg.truncated_kernel, "nearest-image jump kernel in the full model");
  app.add_option("--inject-fault", cfg.fault, "corrupt an update to exercise the test suite")->group("");

  const std::pair<const char*, const char*> commands[] = {
      {"threshold", "positive/negative thresholds, S and F_th per realization"},
      {"t2t", "threshold-to-threshold avalanches and Sigma(u) vs Phi"},
      {"flat", "flat start to threshold, polarization P(u)"},
      {"curves", "tabulate the limit curves"},
      {"test", "run the property and statistical suite"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  cfg.command = app.get_subcommands().front()->get_name();
  try {
    validate(cfg);
    std::filesystem::create_directories(cfg.out);
    if (cfg.command == "threshold") return cmd_threshold(cfg);
    if (cfg.command == "t2t") return cmd_t2t(cfg);
    if (cfg.command == "flat") return cmd_flat(cfg);
    if (cfg.command == "curves") return cmd_curves(cfg);
    return cmd_test(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const cdw::DomainError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
