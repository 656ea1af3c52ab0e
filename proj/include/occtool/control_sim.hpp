#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "occtool/occupancy_signal.hpp"
#include "occtool/types.hpp"

namespace occtool {

// Discrete-time zone model: T_z[k+1] = a*T_z[k] + b*T_out[k] + c*u[k] + d*n[k].
struct ZoneModel {
  double a = 0.9;
  double b = 0.05;
  double c = 0.04;
  double d = 0.1;

  void validate() const;  // |a| < 1 required
};

struct ControlConfig {
  double dt_seconds = 300.0;
  int horizon = 12;
  // Setpoint bounds, 60-70 F heating and 75-80 F cooling, stored in C.
  double heat_min_c = (60.0 - 32.0) * 5.0 / 9.0;
  double heat_max_c = (70.0 - 32.0) * 5.0 / 9.0;
  double cool_min_c = (75.0 - 32.0) * 5.0 / 9.0;
  double cool_max_c = (80.0 - 32.0) * 5.0 / 9.0;
  double comfort_target_c = 22.5;
  double w_comfort = 1.0;
  double w_energy = 0.5;
  double grid_step_c = 5.0 / 9.0;        // 1 F
  double kappa_kwh_per_deg = 1.0;        // energy proxy scale per degree-step
  double t_initial_c = 22.5;
  // Fixed dual-setpoint schedule used by the baseline controller (70/75 F).
  double baseline_heat_c = (70.0 - 32.0) * 5.0 / 9.0;
  double baseline_cool_c = (75.0 - 32.0) * 5.0 / 9.0;
  bool persistence_forecast = false;     // default: perfect foresight

  void validate() const;
};

struct ComfortParams {
  double met = 1.1;
  double clo_winter = 1.0;
  double clo_summer = 0.5;  // months 6-8
  double rh_percent = 50.0;
  double air_speed_ms = 0.1;

  void validate() const;
  double clo_for_month(unsigned month) const {
    return (month >= 6 && month <= 8) ? clo_summer : clo_winter;
  }
};

struct ControlStep {
  int64_t k = 0;
  double ts = 0.0;
  double t_htg = 0.0;
  double t_clg = 0.0;
  double t_mid = 0.0;
  double t_z = 0.0;    // zone temperature the controller observed this step
  double t_out = 0.0;
  int64_t n = 0;       // true occupancy driving the plant
  double q = 0.0;      // signed conditioning effort c*(t_mid - t_z)
  double e_heat = 0.0;
  double e_cool = 0.0;
  double pmv = 0.0;
  double ppd = 0.0;
};

struct SimTotals {
  double e_heat_kwh = 0.0;
  double e_cool_kwh = 0.0;
  double e_total_kwh = 0.0;
  double mean_ppd = 0.0;           // over all steps
  double mean_ppd_occupied = 0.0;  // over steps with true occupancy
  int64_t steps = 0;
};

struct SimResult {
  std::vector<ControlStep> steps;
  SimTotals totals;
};

double predict_zone(const ZoneModel& model, double t_z, double t_out, double u, double n);
double midpoint(double t_htg, double t_clg);

// Least-squares fit of (a,b,c,d) from one-step transitions. Needs >= 50 rows,
// full-rank regressors, and a stable result.
struct IdentificationSample {
  double t_z, t_out, u, n, t_z_next;
};
ZoneModel identify_model(const std::vector<IdentificationSample>& data);

// Fanger comfort. ppd_from_pmv is the closed-form curve; pmv_ppd solves the
// clothing-surface heat balance by fixed-point iteration (tol 1e-5, max 150
// rounds) with mean radiant temperature taken equal to air temperature.
double ppd_from_pmv(double pmv);
std::pair<double, double> pmv_ppd(double t_air_c, double met, double clo, double rh_percent,
                                  double air_speed_ms);

struct MpcPlan {
  std::vector<std::pair<double, double>> sequence;  // (t_htg, t_clg) per horizon step
  double cost = 0.0;
};

// Enumerates constant setpoint pairs on the bound grid, rolls the zone model
// over the horizon under each, and scores comfort (occupied deviation from
// the target) plus the conditioning-effort proxy. Ties go to the most
// energy-conserving pair: lowest heating setpoint, then highest cooling.
MpcPlan mpc_step(const ZoneModel& model, double t_z, std::span<const double> t_out_forecast,
                 std::span<const int64_t> n_forecast, const ControlConfig& cfg);

std::pair<double, double> baseline_step(const ControlConfig& cfg);

enum class ControllerKind { baseline, mpc };
ControllerKind controller_kind_from_string(const std::string& s);

// Hook for auditing the receding-horizon behavior.
class MpcObserver {
 public:
  virtual ~MpcObserver() = default;
  virtual void on_plan(int64_t k, const MpcPlan& plan,
                       const std::pair<double, double>& applied) = 0;
};

// Closed-loop simulation. The controller sees `occupancy_measured`; the plant
// and the comfort accounting run on `occupancy_true`. Both series must share
// the same interval index range with no gaps.
SimResult simulate(const std::vector<IntervalSample>& occupancy_true,
                   const std::vector<IntervalSample>& occupancy_measured,
                   const WeatherSeries& weather, const ZoneModel& model, ControllerKind controller,
                   const ControlConfig& cfg, const ComfortParams& comfort,
                   MpcObserver* observer = nullptr);

double savings_percent(double baseline_kwh, double case_kwh);  // half-up, 2 decimals

struct MonthlyRollup {
  int year = 0;
  unsigned month = 0;
  double e_heat_kwh = 0.0;
  double e_cool_kwh = 0.0;
  double mean_ppd = 0.0;
};
std::vector<MonthlyRollup> monthly_rollup(const std::vector<ControlStep>& steps);

// Simulation config file: "[zone] / [control] / [comfort]" sections of
// key = value lines; temperatures accept _c or _f keys.
struct SimConfig {
  ZoneModel zone;
  ControlConfig control;
  ComfortParams comfort;
};
SimConfig parse_sim_config(std::istream& in);

void write_steps_csv(std::ostream& out, const std::vector<ControlStep>& steps);
std::vector<ControlStep> read_steps_csv(std::istream& in);

}  // namespace occtool
