#include "occtool/control_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>

#include <Eigen/Dense>

#include "occtool/csv.hpp"
#include "occtool/errors.hpp"
#include "occtool/time_util.hpp"

namespace occtool {

void ZoneModel::validate() const {
  if (!(std::abs(a) < 1.0))
    throw InputError("zone model unstable: |a| must be < 1, got a=" + std::to_string(a));
}

void ControlConfig::validate() const {
  if (dt_seconds <= 0.0) throw InputError("dt_seconds must be positive");
  if (horizon < 1) throw InputError("horizon must be >= 1");
  if (!(heat_min_c <= heat_max_c) || !(cool_min_c <= cool_max_c))
    throw InputError("setpoint bounds must be ordered");
  if (!(heat_max_c < cool_min_c))
    throw InputError("heating upper bound must stay below cooling lower bound");
  if (grid_step_c <= 0.0) throw InputError("grid_step_c must be positive");
  if (kappa_kwh_per_deg < 0.0) throw InputError("kappa must be non-negative");
  if (w_comfort < 0.0 || w_energy < 0.0) throw InputError("cost weights must be non-negative");
  if (!(baseline_heat_c >= heat_min_c && baseline_heat_c <= heat_max_c &&
        baseline_cool_c >= cool_min_c && baseline_cool_c <= cool_max_c))
    throw InputError("baseline setpoints must lie within the MPC bounds");
}

void ComfortParams::validate() const {
  if (met <= 0.0 || clo_winter <= 0.0 || clo_summer <= 0.0 || air_speed_ms <= 0.0)
    throw InputError("comfort parameters must be positive");
  if (!(rh_percent > 0.0 && rh_percent < 100.0))
    throw InputError("relative humidity must be in (0,100)");
}

double predict_zone(const ZoneModel& model, double t_z, double t_out, double u, double n) {
  return model.a * t_z + model.b * t_out + model.c * u + model.d * n;
}

double midpoint(double t_htg, double t_clg) {
  if (t_htg > t_clg) throw InputError("heating setpoint above cooling setpoint");
  return (t_htg + t_clg) / 2.0;
}

ZoneModel identify_model(const std::vector<IdentificationSample>& data) {
  if (data.size() < 50)
    throw InputError("identification needs at least 50 steps, got " +
                     std::to_string(data.size()));
  Eigen::MatrixXd x(data.size(), 4);
  Eigen::VectorXd y(data.size());
  for (size_t i = 0; i < data.size(); ++i) {
    x(i, 0) = data[i].t_z;
    x(i, 1) = data[i].t_out;
    x(i, 2) = data[i].u;
    x(i, 3) = data[i].n;
    y(i) = data[i].t_z_next;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-8);
  if (qr.rank() < 4)
    throw InputError("rank-deficient regressors: inputs lack persistent excitation");
  const Eigen::VectorXd beta = qr.solve(y);
  ZoneModel m;
  m.a = beta(0);
  m.b = beta(1);
  m.c = beta(2);
  m.d = beta(3);
  m.validate();
  return m;
}

double ppd_from_pmv(double pmv) {
  return 100.0 - 95.0 * std::exp(-0.03353 * std::pow(pmv, 4) - 0.2179 * pmv * pmv);
}

std::pair<double, double> pmv_ppd(double t_air_c, double met, double clo, double rh_percent,
                                  double air_speed_ms) {
  const double ta = t_air_c;
  const double tr = t_air_c;  // mean radiant temperature assumed equal to air
  const double pa = rh_percent * 10.0 * std::exp(16.6536 - 4030.183 / (ta + 235.0));
  const double icl = 0.155 * clo;
  const double m = met * 58.15;
  const double mw = m;  // no external work
  const double fcl = icl < 0.078 ? 1.0 + 1.29 * icl : 1.05 + 0.645 * icl;
  const double hcf = 12.1 * std::sqrt(air_speed_ms);
  const double taa = ta + 273.0;
  const double tra = tr + 273.0;

  // Fixed-point iteration for the clothing surface temperature.
  double tcla = taa + (35.5 - ta) / (3.5 * icl + 0.1);
  const double p1 = icl * fcl;
  const double p2 = p1 * 3.96;
  const double p3 = p1 * 100.0;
  const double p4 = p1 * taa;
  const double p5 = 308.7 - 0.028 * mw + p2 * std::pow(tra / 100.0, 4);
  double xn = tcla / 100.0;
  double xf = tcla / 50.0;
  double hc = hcf;
  const double eps = 1e-5;
  int iterations = 0;
  while (std::abs(xn - xf) > eps) {
    if (++iterations > 150) {
      char msg[160];
      std::snprintf(msg, sizeof(msg),
                    "PMV iteration failed to converge for t_air=%.3f met=%.3f clo=%.3f "
                    "rh=%.1f v=%.3f",
                    t_air_c, met, clo, rh_percent, air_speed_ms);
      throw std::runtime_error(msg);
    }
    xf = (xf + xn) / 2.0;
    const double hcn = 2.38 * std::pow(std::abs(100.0 * xf - taa), 0.25);
    hc = std::max(hcf, hcn);
    xn = (p5 + p4 * hc - p2 * std::pow(xf, 4)) / (100.0 + p3 * hc);
  }
  const double tcl = 100.0 * xn - 273.0;

  const double hl1 = 3.05 * 0.001 * (5733.0 - 6.99 * mw - pa);
  const double hl2 = mw > 58.15 ? 0.42 * (mw - 58.15) : 0.0;
  const double hl3 = 1.7 * 1e-5 * m * (5867.0 - pa);
  const double hl4 = 0.0014 * m * (34.0 - ta);
  const double hl5 = 3.96 * fcl * (std::pow(xn, 4) - std::pow(tra / 100.0, 4));
  const double hl6 = fcl * hc * (tcl - ta);
  const double ts = 0.303 * std::exp(-0.036 * m) + 0.028;

  double pmv = ts * (mw - hl1 - hl2 - hl3 - hl4 - hl5 - hl6);
  pmv = std::clamp(pmv, -3.5, 3.5);
  return {pmv, ppd_from_pmv(pmv)};
}

MpcPlan mpc_step(const ZoneModel& model, double t_z, std::span<const double> t_out_forecast,
                 std::span<const int64_t> n_forecast, const ControlConfig& cfg) {
  if (static_cast<int>(t_out_forecast.size()) < cfg.horizon ||
      static_cast<int>(n_forecast.size()) < cfg.horizon)
    throw InputError("forecasts must cover the full prediction horizon");

  const auto grid = [&](double lo, double hi) {
    std::vector<double> out;
    const int steps = static_cast<int>(std::floor((hi - lo) / cfg.grid_step_c + 1e-9));
    for (int i = 0; i <= steps; ++i) out.push_back(lo + i * cfg.grid_step_c);
    if (out.empty() || out.back() < hi - 1e-9) out.push_back(hi);
    return out;
  };
  const std::vector<double> heat = grid(cfg.heat_min_c, cfg.heat_max_c);
  std::vector<double> cool = grid(cfg.cool_min_c, cfg.cool_max_c);
  std::reverse(cool.begin(), cool.end());  // highest cooling first for tie-breaking

  MpcPlan best;
  bool have_best = false;
  for (double h : heat) {
    for (double c : cool) {
      const double u = midpoint(h, c);
      double t = t_z;
      double cost = 0.0;
      for (int j = 0; j < cfg.horizon; ++j) {
        const bool occupied = n_forecast[j] >= 1;
        if (occupied)
          cost += cfg.w_comfort * (t - cfg.comfort_target_c) * (t - cfg.comfort_target_c);
        cost += cfg.w_energy * std::abs(model.c * (u - t));
        t = predict_zone(model, t, t_out_forecast[j], u, static_cast<double>(n_forecast[j]));
      }
      // Strict improvement keeps the first-seen minimizer, i.e. the lowest
      // heating then highest cooling setpoint among (near-)ties.
      if (!have_best || cost < best.cost - 1e-9) {
        best.cost = cost;
        best.sequence.assign(static_cast<size_t>(cfg.horizon), {h, c});
        have_best = true;
      }
    }
  }
  return best;
}

std::pair<double, double> baseline_step(const ControlConfig& cfg) {
  return {cfg.baseline_heat_c, cfg.baseline_cool_c};
}

ControllerKind controller_kind_from_string(const std::string& s) {
  if (s == "baseline") return ControllerKind::baseline;
  if (s == "mpc") return ControllerKind::mpc;
  throw InputError("unknown controller: '" + s + "' (want baseline or mpc)");
}

SimResult simulate(const std::vector<IntervalSample>& occupancy_true,
                   const std::vector<IntervalSample>& occupancy_measured,
                   const WeatherSeries& weather, const ZoneModel& model, ControllerKind controller,
                   const ControlConfig& cfg, const ComfortParams& comfort, MpcObserver* observer) {
  model.validate();
  cfg.validate();
  comfort.validate();
  if (occupancy_true.size() != occupancy_measured.size())
    throw InputError("true and measured occupancy series differ in length");
  for (size_t i = 0; i < occupancy_true.size(); ++i) {
    if (occupancy_true[i].k != occupancy_measured[i].k)
      throw InputError("true and measured occupancy series are misaligned at position " +
                       std::to_string(i));
    if (i > 0 && occupancy_true[i].k != occupancy_true[i - 1].k + 1)
      throw InputError("occupancy series has a coverage gap after interval " +
                       std::to_string(occupancy_true[i - 1].k));
  }

  SimResult result;
  if (occupancy_true.empty()) return result;

  const size_t n_steps = occupancy_true.size();
  double t_z = cfg.t_initial_c;
  double ppd_sum = 0.0, ppd_occ_sum = 0.0;
  int64_t occ_steps = 0;

  std::vector<double> t_out_fc(static_cast<size_t>(cfg.horizon));
  std::vector<int64_t> n_fc(static_cast<size_t>(cfg.horizon));

  for (size_t i = 0; i < n_steps; ++i) {
    const auto& truth = occupancy_true[i];
    const double ts = truth.start_ts;
    const double t_out = weather.lookup(ts);

    std::pair<double, double> setpoints;
    if (controller == ControllerKind::baseline) {
      setpoints = baseline_step(cfg);
    } else {
      for (int j = 0; j < cfg.horizon; ++j) {
        // Forecasts clamp at the end of the available series.
        const size_t idx = std::min(i + static_cast<size_t>(j), n_steps - 1);
        t_out_fc[static_cast<size_t>(j)] = weather.lookup(ts + j * cfg.dt_seconds);
        n_fc[static_cast<size_t>(j)] =
            cfg.persistence_forecast ? occupancy_measured[i].n : occupancy_measured[idx].n;
      }
      MpcPlan plan = mpc_step(model, t_z, t_out_fc, n_fc, cfg);
      setpoints = plan.sequence.front();  // receding horizon: apply the first pair only
      if (observer) observer->on_plan(truth.k, plan, setpoints);
    }

    ControlStep step;
    step.k = truth.k;
    step.ts = ts;
    step.t_htg = setpoints.first;
    step.t_clg = setpoints.second;
    step.t_mid = midpoint(setpoints.first, setpoints.second);
    step.t_z = t_z;
    step.t_out = t_out;
    step.n = truth.n;
    step.q = model.c * (step.t_mid - t_z);
    step.e_heat = cfg.kappa_kwh_per_deg * std::max(0.0, step.q);
    step.e_cool = cfg.kappa_kwh_per_deg * std::max(0.0, -step.q);

    int year;
    unsigned month, day;
    civil_from_days(static_cast<int64_t>(std::floor(ts / 86400.0)), year, month, day);
    const auto [pmv, ppd] =
        pmv_ppd(t_z, comfort.met, comfort.clo_for_month(month), comfort.rh_percent,
                comfort.air_speed_ms);
    step.pmv = pmv;
    step.ppd = ppd;

    ppd_sum += ppd;
    if (truth.n >= 1) {
      ppd_occ_sum += ppd;
      ++occ_steps;
    }
    result.totals.e_heat_kwh += step.e_heat;
    result.totals.e_cool_kwh += step.e_cool;

    result.steps.push_back(step);
    t_z = predict_zone(model, t_z, t_out, step.t_mid, static_cast<double>(truth.n));
  }

  result.totals.e_total_kwh = result.totals.e_heat_kwh + result.totals.e_cool_kwh;
  result.totals.steps = static_cast<int64_t>(n_steps);
  result.totals.mean_ppd = ppd_sum / static_cast<double>(n_steps);
  result.totals.mean_ppd_occupied =
      occ_steps > 0 ? ppd_occ_sum / static_cast<double>(occ_steps) : 0.0;
  return result;
}

double savings_percent(double baseline_kwh, double case_kwh) {
  if (!(baseline_kwh > 0.0)) throw InputError("baseline energy must be positive");
  return round_half_up(100.0 * (baseline_kwh - case_kwh) / baseline_kwh, 2);
}

std::vector<MonthlyRollup> monthly_rollup(const std::vector<ControlStep>& steps) {
  std::map<std::pair<int, unsigned>, MonthlyRollup> months;
  std::map<std::pair<int, unsigned>, int64_t> counts;
  for (const auto& s : steps) {
    int year;
    unsigned month, day;
    civil_from_days(static_cast<int64_t>(std::floor(s.ts / 86400.0)), year, month, day);
    auto& row = months[{year, month}];
    row.year = year;
    row.month = month;
    row.e_heat_kwh += s.e_heat;
    row.e_cool_kwh += s.e_cool;
    row.mean_ppd += s.ppd;
    ++counts[{year, month}];
  }
  std::vector<MonthlyRollup> out;
  for (auto& [key, row] : months) {
    row.mean_ppd /= static_cast<double>(counts[key]);
    out.push_back(row);
  }
  return out;
}

namespace {

double temperature_value(const std::string& key, double value) {
  if (key.size() > 2 && key.rfind("_f") == key.size() - 2) return fahrenheit_to_celsius(value);
  return value;
}

}  // namespace

SimConfig parse_sim_config(std::istream& in) {
  SimConfig cfg;
  std::string line, section;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      if (section != "zone" && section != "control" && section != "comfort")
        throw InputError("line " + std::to_string(line_no) + ": unknown section [" + section +
                         "]");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw InputError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string raw = trim(t.substr(eq + 1));

    if (section == "zone") {
      const double v = parse_double_field(raw, key, line_no);
      if (key == "a")
        cfg.zone.a = v;
      else if (key == "b")
        cfg.zone.b = v;
      else if (key == "c")
        cfg.zone.c = v;
      else if (key == "d")
        cfg.zone.d = v;
      else
        throw InputError("line " + std::to_string(line_no) + ": unknown zone key '" + key + "'");
    } else if (section == "control") {
      if (key == "forecast") {
        if (raw == "perfect")
          cfg.control.persistence_forecast = false;
        else if (raw == "persistence")
          cfg.control.persistence_forecast = true;
        else
          throw InputError("line " + std::to_string(line_no) +
                           ": forecast must be perfect or persistence");
        continue;
      }
      const double v = parse_double_field(raw, key, line_no);
      const double tv = temperature_value(key, v);
      if (key == "dt_seconds")
        cfg.control.dt_seconds = v;
      else if (key == "horizon")
        cfg.control.horizon = static_cast<int>(v);
      else if (key == "heat_min_c" || key == "heat_min_f")
        cfg.control.heat_min_c = tv;
      else if (key == "heat_max_c" || key == "heat_max_f")
        cfg.control.heat_max_c = tv;
      else if (key == "cool_min_c" || key == "cool_min_f")
        cfg.control.cool_min_c = tv;
      else if (key == "cool_max_c" || key == "cool_max_f")
        cfg.control.cool_max_c = tv;
      else if (key == "comfort_target_c" || key == "comfort_target_f")
        cfg.control.comfort_target_c = tv;
      else if (key == "w_comfort")
        cfg.control.w_comfort = v;
      else if (key == "w_energy")
        cfg.control.w_energy = v;
      else if (key == "grid_step_c" || key == "grid_step_f")
        cfg.control.grid_step_c = key == "grid_step_f" ? v * 5.0 / 9.0 : v;
      else if (key == "kappa")
        cfg.control.kappa_kwh_per_deg = v;
      else if (key == "t_initial_c" || key == "t_initial_f")
        cfg.control.t_initial_c = tv;
      else if (key == "baseline_heat_c" || key == "baseline_heat_f")
        cfg.control.baseline_heat_c = tv;
      else if (key == "baseline_cool_c" || key == "baseline_cool_f")
        cfg.control.baseline_cool_c = tv;
      else
        throw InputError("line " + std::to_string(line_no) + ": unknown control key '" + key +
                         "'");
    } else if (section == "comfort") {
      const double v = parse_double_field(raw, key, line_no);
      if (key == "met")
        cfg.comfort.met = v;
      else if (key == "clo_winter")
        cfg.comfort.clo_winter = v;
      else if (key == "clo_summer")
        cfg.comfort.clo_summer = v;
      else if (key == "rh")
        cfg.comfort.rh_percent = v;
      else if (key == "air_speed")
        cfg.comfort.air_speed_ms = v;
      else
        throw InputError("line " + std::to_string(line_no) + ": unknown comfort key '" + key +
                         "'");
    } else {
      throw InputError("line " + std::to_string(line_no) + ": key outside any section");
    }
  }
  cfg.zone.validate();
  cfg.control.validate();
  cfg.comfort.validate();
  return cfg;
}

void write_steps_csv(std::ostream& out, const std::vector<ControlStep>& steps) {
  out << "k,ts,t_htg,t_clg,t_mid,t_z,t_out,n,q,e_heat,e_cool,pmv,ppd\n";
  char buf[320];
  for (const auto& s : steps) {
    std::snprintf(buf, sizeof(buf),
                  "%lld,%s,%.4f,%.4f,%.4f,%.4f,%.4f,%lld,%.6f,%.6f,%.6f,%.4f,%.4f\n",
                  static_cast<long long>(s.k), format_iso8601(s.ts).c_str(), s.t_htg, s.t_clg,
                  s.t_mid, s.t_z, s.t_out, static_cast<long long>(s.n), s.q, s.e_heat, s.e_cool,
                  s.pmv, s.ppd);
    out << buf;
  }
}

std::vector<ControlStep> read_steps_csv(std::istream& in) {
  std::vector<ControlStep> out;
  CsvReader reader(in);
  std::vector<std::string> fields;
  size_t line_no = 0;
  bool saw_header = false;
  while (reader.next(fields, line_no)) {
    if (!saw_header) {
      saw_header = true;
      if (!fields.empty() && fields[0] == "k") continue;
    }
    if (fields.size() != 13)
      throw InputError("line " + std::to_string(line_no) + ": expected 13 step columns");
    ControlStep s;
    s.k = parse_int_field(fields[0], "k", line_no);
    s.ts = parse_iso8601(fields[1]);
    s.t_htg = parse_double_field(fields[2], "t_htg", line_no);
    s.t_clg = parse_double_field(fields[3], "t_clg", line_no);
    s.t_mid = parse_double_field(fields[4], "t_mid", line_no);
    s.t_z = parse_double_field(fields[5], "t_z", line_no);
    s.t_out = parse_double_field(fields[6], "t_out", line_no);
    s.n = parse_int_field(fields[7], "n", line_no);
    s.q = parse_double_field(fields[8], "q", line_no);
    s.e_heat = parse_double_field(fields[9], "e_heat", line_no);
    s.e_cool = parse_double_field(fields[10], "e_cool", line_no);
    s.pmv = parse_double_field(fields[11], "pmv", line_no);
    s.ppd = parse_double_field(fields[12], "ppd", line_no);
    out.push_back(s);
  }
  return out;
}

}  // namespace occtool
