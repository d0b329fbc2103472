#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "greybox/timeseries.h"

namespace greybox {

enum class ModelOrder { kSM1, kSM2, kSM4 };

std::string_view to_string(ModelOrder order);
ModelOrder parse_model_order(std::string_view text);

int state_count(ModelOrder order);      // 1, 2, 4
int parameter_count(ModelOrder order);  // 5, 7, 12
int disturbance_count(ModelOrder order);

// Ordered parameter names, e.g. SM1: R_win, C_in, A_ih, B_ac, D_solar.
const std::vector<std::string>& parameter_names(ModelOrder order);
// State labels, T_z first.
const std::vector<std::string>& state_labels(ModelOrder order);
// Disturbance vector ordering; each label is also the table column it reads.
//   SM4: Q_IHL, Q_solar, T_sol_w, T_sol_r, T_am
//   SM2: Q_IHL, Q_solar, T_sol_w, T_am
//   SM1: Q_IHL, Q_solar, T_am
const std::vector<std::string>& disturbance_labels(ModelOrder order);

enum class ParameterKind { kResistance, kCapacitance, kGain };

ParameterKind parameter_kind(std::string_view name);
std::string_view unit_of(ParameterKind kind);

class ParameterVector {
 public:
  ParameterVector(ModelOrder order, Eigen::VectorXd values);
  static ParameterVector from_map(ModelOrder order,
                                  const std::map<std::string, double>& values);

  ModelOrder order() const { return order_; }
  const Eigen::VectorXd& values() const { return values_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  double operator[](std::string_view name) const;
  ParameterVector with(std::string_view name, double value) const;

  // Resistances and capacitances > 0, everything finite.
  // Throws NonPositiveParameter.
  void validate() const;

  bool operator==(const ParameterVector& other) const {
    return order_ == other.order_ && values_ == other.values_;
  }

 private:
  std::size_t index_of(std::string_view name) const;

  ModelOrder order_;
  Eigen::VectorXd values_;
};

// Flat "name: value  # unit" document with round-trip exact values.
std::string to_text(const ParameterVector& theta);
ParameterVector parameters_from_text(std::string_view text);

// dx/dt = A x + B u + D w,  y = C x
struct StateSpaceModel {
  ModelOrder order;
  Eigen::MatrixXd A;
  Eigen::VectorXd B;
  Eigen::MatrixXd D;
  Eigen::RowVectorXd C;
};

StateSpaceModel assemble(const ParameterVector& theta);

// Forward-Euler counterpart: A_d = I + t_s A, B_d = t_s B, D_d = t_s D.
struct DiscreteModel {
  ModelOrder order;
  Eigen::MatrixXd Ad;
  Eigen::VectorXd Bd;
  Eigen::MatrixXd Dd;
  Eigen::RowVectorXd C;
  double t_s = 0.0;
  double spectral_radius = 0.0;
  bool stable = false;
};

// Throws UnstableDiscretization when the spectral radius of A_d is >= 1,
// unless allow_unstable is set.
DiscreteModel discretize(const StateSpaceModel& model, double t_s,
                         bool allow_unstable = false);

// N x n_w disturbance matrix read from the table columns named by
// disturbance_labels(order).
Eigen::MatrixXd disturbances(ModelOrder order, const TimeSeriesTable& table);

// --- House electrical relations --------------------------------------------

struct HouseElectricalParams {
  double cop = 3.5;
  double power_factor = 0.95;

  void validate() const;
  bool operator==(const HouseElectricalParams&) const = default;
};

// P_HVAC = |Q_HVAC| / COP
double hvac_power(double q_hvac, const HouseElectricalParams& elec);
double total_power(double p_hvac, double p_other);
// Q = P tan(acos(pf))
double reactive_power(double p, double power_factor);

// Synthetic ground-truth house, not measured values.
ParameterVector default_sm4_truth();

// Shortest decimal that parses back to exactly `value`.
std::string format_exact(double value);

}  // namespace greybox
