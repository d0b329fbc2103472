#include "greybox/rc_model.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "greybox/error.h"

namespace greybox {

namespace {

const std::vector<std::string> kSm1Params = {"R_win", "C_in", "A_ih", "B_ac",
                                             "D_solar"};
const std::vector<std::string> kSm2Params = {"R_w",  "R_win", "C_in",   "C_w",
                                             "A_ih", "B_ac",  "D_solar"};
const std::vector<std::string> kSm4Params = {
    "R_w",  "R_attic", "R_im",    "R_win", "R_roof", "C_in",
    "C_w",  "C_attic", "C_im",    "A_in",  "B_in",   "D_im"};

const std::vector<std::string> kSm1States = {"T_z"};
const std::vector<std::string> kSm2States = {"T_z", "T_wall"};
const std::vector<std::string> kSm4States = {"T_z", "T_wall", "T_attic",
                                             "T_im"};

const std::vector<std::string> kSm1Dist = {"Q_IHL", "Q_solar", "T_am"};
const std::vector<std::string> kSm2Dist = {"Q_IHL", "Q_solar", "T_sol_w",
                                           "T_am"};
const std::vector<std::string> kSm4Dist = {"Q_IHL", "Q_solar", "T_sol_w",
                                           "T_sol_r", "T_am"};

}  // namespace

std::string_view to_string(ModelOrder order) {
  switch (order) {
    case ModelOrder::kSM1: return "SM1";
    case ModelOrder::kSM2: return "SM2";
    case ModelOrder::kSM4: return "SM4";
  }
  return "?";
}

ModelOrder parse_model_order(std::string_view text) {
  if (text == "SM1") return ModelOrder::kSM1;
  if (text == "SM2") return ModelOrder::kSM2;
  if (text == "SM4") return ModelOrder::kSM4;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown model order '" + std::string(text) + "'");
}

int state_count(ModelOrder order) {
  return static_cast<int>(state_labels(order).size());
}
int parameter_count(ModelOrder order) {
  return static_cast<int>(parameter_names(order).size());
}
int disturbance_count(ModelOrder order) {
  return static_cast<int>(disturbance_labels(order).size());
}

const std::vector<std::string>& parameter_names(ModelOrder order) {
  switch (order) {
    case ModelOrder::kSM1: return kSm1Params;
    case ModelOrder::kSM2: return kSm2Params;
    case ModelOrder::kSM4: return kSm4Params;
  }
  return kSm1Params;
}

const std::vector<std::string>& state_labels(ModelOrder order) {
  switch (order) {
    case ModelOrder::kSM1: return kSm1States;
    case ModelOrder::kSM2: return kSm2States;
    case ModelOrder::kSM4: return kSm4States;
  }
  return kSm1States;
}

const std::vector<std::string>& disturbance_labels(ModelOrder order) {
  switch (order) {
    case ModelOrder::kSM1: return kSm1Dist;
    case ModelOrder::kSM2: return kSm2Dist;
    case ModelOrder::kSM4: return kSm4Dist;
  }
  return kSm1Dist;
}

ParameterKind parameter_kind(std::string_view name) {
  if (name.starts_with("R_")) return ParameterKind::kResistance;
  if (name.starts_with("C_")) return ParameterKind::kCapacitance;
  return ParameterKind::kGain;
}

std::string_view unit_of(ParameterKind kind) {
  switch (kind) {
    case ParameterKind::kResistance: return "K/W";
    case ParameterKind::kCapacitance: return "J/K";
    case ParameterKind::kGain: return "-";
  }
  return "";
}

// --- ParameterVector -------------------------------------------------------

ParameterVector::ParameterVector(ModelOrder order, Eigen::VectorXd values)
    : order_(order), values_(std::move(values)) {
  if (values_.size() != parameter_count(order_)) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(to_string(order_)) + " takes " +
                    std::to_string(parameter_count(order_)) + " parameters, got " +
                    std::to_string(values_.size()));
  }
}

ParameterVector ParameterVector::from_map(
    ModelOrder order, const std::map<std::string, double>& values) {
  const auto& names = parameter_names(order);
  Eigen::VectorXd v(static_cast<Eigen::Index>(names.size()));
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto it = values.find(names[i]);
    if (it == values.end()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "missing parameter '" + names[i] + "' for " +
                      std::string(to_string(order)));
    }
    v[static_cast<Eigen::Index>(i)] = it->second;
  }
  for (const auto& [name, value] : values) {
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "unknown parameter '" + name + "' for " +
                      std::string(to_string(order)));
    }
  }
  return ParameterVector(order, std::move(v));
}

std::size_t ParameterVector::index_of(std::string_view name) const {
  const auto& names = parameter_names(order_);
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  throw Error(ErrorCode::kInvalidArgument,
              std::string(to_string(order_)) + " has no parameter '" +
                  std::string(name) + "'");
}

double ParameterVector::operator[](std::string_view name) const {
  return values_[static_cast<Eigen::Index>(index_of(name))];
}

ParameterVector ParameterVector::with(std::string_view name, double value) const {
  ParameterVector copy = *this;
  copy.values_[static_cast<Eigen::Index>(index_of(name))] = value;
  return copy;
}

void ParameterVector::validate() const {
  const auto& names = parameter_names(order_);
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double v = values_[static_cast<Eigen::Index>(i)];
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kNonPositiveParameter,
                  names[i] + " is not finite");
    }
    if (parameter_kind(names[i]) != ParameterKind::kGain && !(v > 0.0)) {
      throw Error(ErrorCode::kNonPositiveParameter,
                  names[i] + " = " + format_exact(v) + " must be > 0");
    }
  }
}

std::string format_exact(double value) {
  char buf[40];
  const auto result = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, result.ptr);
}

std::string to_text(const ParameterVector& theta) {
  std::ostringstream out;
  out << "order: " << to_string(theta.order()) << '\n';
  const auto& names = parameter_names(theta.order());
  for (std::size_t i = 0; i < names.size(); ++i) {
    out << names[i] << ": "
        << format_exact(theta.values()[static_cast<Eigen::Index>(i)]) << "  # "
        << unit_of(parameter_kind(names[i])) << '\n';
  }
  return out.str();
}

ParameterVector parameters_from_text(std::string_view text) {
  YAML::Node doc;
  try {
    doc = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kConfig, std::string("parameter document: ") + e.what());
  }
  if (!doc.IsMap() || !doc["order"]) {
    throw Error(ErrorCode::kConfig, "parameter document needs an 'order' key");
  }
  const ModelOrder order = parse_model_order(doc["order"].as<std::string>());
  std::map<std::string, double> values;
  for (const auto& kv : doc) {
    const auto key = kv.first.as<std::string>();
    if (key == "order") continue;
    try {
      values[key] = kv.second.as<double>();
    } catch (const YAML::Exception&) {
      throw Error(ErrorCode::kConfig, "parameter '" + key + "' is not a number");
    }
  }
  return ParameterVector::from_map(order, values);
}

// --- Assembly --------------------------------------------------------------

StateSpaceModel assemble(const ParameterVector& theta) {
  theta.validate();
  const ModelOrder order = theta.order();
  const int n = state_count(order);
  StateSpaceModel m{order, Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n),
                    Eigen::MatrixXd::Zero(n, disturbance_count(order)),
                    Eigen::RowVectorXd::Zero(n)};
  m.C(0) = 1.0;

  switch (order) {
    case ModelOrder::kSM1: {
      const double r_win = theta["R_win"], c_in = theta["C_in"];
      m.A(0, 0) = -1.0 / (r_win * c_in);
      m.B(0) = theta["B_ac"] / c_in;
      m.D(0, 0) = theta["A_ih"] / c_in;
      m.D(0, 1) = theta["D_solar"] / c_in;
      m.D(0, 2) = 1.0 / (r_win * c_in);
      break;
    }
    case ModelOrder::kSM2: {
      const double half_w = 0.5 * theta["R_w"];
      const double r_win = theta["R_win"];
      const double c_in = theta["C_in"], c_w = theta["C_w"];
      m.A(0, 0) = -(1.0 / half_w + 1.0 / r_win) / c_in;
      m.A(0, 1) = 1.0 / (half_w * c_in);
      m.B(0) = theta["B_ac"] / c_in;
      m.D(0, 0) = theta["A_ih"] / c_in;
      m.D(0, 3) = 1.0 / (r_win * c_in);
      // Wall node between the zone and the sol-air surface, R_w/2 each side.
      m.A(1, 0) = 1.0 / (half_w * c_w);
      m.A(1, 1) = -2.0 / (half_w * c_w);
      m.D(1, 1) = theta["D_solar"] / c_w;
      m.D(1, 2) = 1.0 / (half_w * c_w);
      break;
    }
    case ModelOrder::kSM4: {
      const double half_w = 0.5 * theta["R_w"];
      const double r_attic = theta["R_attic"], r_im = theta["R_im"];
      const double r_win = theta["R_win"], r_roof = theta["R_roof"];
      const double c_in = theta["C_in"], c_w = theta["C_w"];
      const double c_attic = theta["C_attic"], c_im = theta["C_im"];
      // Zone air.
      m.A(0, 0) = -(1.0 / half_w + 1.0 / r_attic + 1.0 / r_im + 1.0 / r_win) / c_in;
      m.A(0, 1) = 1.0 / (half_w * c_in);
      m.A(0, 2) = 1.0 / (r_attic * c_in);
      m.A(0, 3) = 1.0 / (r_im * c_in);
      m.B(0) = theta["B_in"] / c_in;
      m.D(0, 0) = theta["A_in"] / c_in;
      m.D(0, 4) = 1.0 / (r_win * c_in);
      // Wall.
      m.A(1, 0) = 1.0 / (half_w * c_w);
      m.A(1, 1) = -2.0 / (half_w * c_w);
      m.D(1, 2) = 1.0 / (half_w * c_w);
      // Attic.
      m.A(2, 0) = 1.0 / (r_attic * c_attic);
      m.A(2, 2) = -(1.0 / r_roof + 1.0 / r_attic) / c_attic;
      m.D(2, 3) = 1.0 / (r_roof * c_attic);
      // Internal mass, relaxing towards the zone (passive sign).
      m.A(3, 0) = 1.0 / (r_im * c_im);
      m.A(3, 3) = -1.0 / (r_im * c_im);
      m.D(3, 1) = theta["D_im"] / c_im;
      break;
    }
  }
  return m;
}

DiscreteModel discretize(const StateSpaceModel& model, double t_s,
                         bool allow_unstable) {
  if (!(t_s > 0.0) || !std::isfinite(t_s)) {
    throw Error(ErrorCode::kInvalidArgument, "t_s must be > 0");
  }
  const auto n = model.A.rows();
  DiscreteModel d{model.order,
                  Eigen::MatrixXd::Identity(n, n) + t_s * model.A,
                  t_s * model.B,
                  t_s * model.D,
                  model.C,
                  t_s,
                  0.0,
                  false};
  if (n == 1) {
    d.spectral_radius = std::abs(d.Ad(0, 0));
  } else {
    const Eigen::EigenSolver<Eigen::MatrixXd> solver(d.Ad, false);
    d.spectral_radius = solver.eigenvalues().cwiseAbs().maxCoeff();
  }
  d.stable = std::isfinite(d.spectral_radius) && d.spectral_radius < 1.0;
  if (!d.stable && !allow_unstable) {
    throw Error(ErrorCode::kUnstableDiscretization,
                "spectral radius of A_d is " + format_exact(d.spectral_radius) +
                    " at t_s = " + format_exact(t_s) + " s");
  }
  return d;
}

Eigen::MatrixXd disturbances(ModelOrder order, const TimeSeriesTable& table) {
  const auto& labels = disturbance_labels(order);
  const auto n = static_cast<Eigen::Index>(table.size());
  Eigen::MatrixXd w(n, static_cast<Eigen::Index>(labels.size()));
  for (std::size_t j = 0; j < labels.size(); ++j) {
    const auto column = table.column(labels[j]);
    for (Eigen::Index k = 0; k < n; ++k) {
      w(k, static_cast<Eigen::Index>(j)) = column[static_cast<std::size_t>(k)];
    }
  }
  return w;
}

// --- Electrical ------------------------------------------------------------

void HouseElectricalParams::validate() const {
  if (!(cop > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "COP must be > 0");
  }
  if (!(power_factor > 0.0 && power_factor <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "power factor must be in (0, 1]");
  }
}

double hvac_power(double q_hvac, const HouseElectricalParams& elec) {
  return std::abs(q_hvac) / elec.cop;
}

double total_power(double p_hvac, double p_other) { return p_hvac + p_other; }

double reactive_power(double p, double power_factor) {
  return p * std::tan(std::acos(power_factor));
}

ParameterVector default_sm4_truth() {
  return ParameterVector::from_map(ModelOrder::kSM4,
                                   {{"R_w", 0.004},
                                    {"R_attic", 0.003},
                                    {"R_im", 0.001},
                                    {"R_win", 0.01},
                                    {"R_roof", 0.002},
                                    {"C_in", 1.0e7},
                                    {"C_w", 3.0e7},
                                    {"C_attic", 3.0e6},
                                    {"C_im", 2.0e7},
                                    {"A_in", 1.0},
                                    {"B_in", 1.0},
                                    {"D_im", 1.0}});
}

}  // namespace greybox
