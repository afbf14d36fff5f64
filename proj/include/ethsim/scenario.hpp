#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ethsim/collapse.hpp"
#include "ethsim/models.hpp"

namespace ethsim {

// Scenario validation failure carrying every issue found, each prefixed with
// the JSON path of the offending field.
class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

struct ModelSpec {
  std::string type;  // explicitU | measurement | weakCoupling | strongCoupling | detector | thermal
  std::optional<Matrix> unitary;          // explicitU
  std::vector<Matrix> field_unitaries;    // measurement
  std::vector<Matrix> atom_projections;   // measurement
  double epsilon = 0.0;                   // weakCoupling / strongCoupling / detector / thermal
  std::uint64_t seed = 0;                 // generator seed for built models
  std::vector<long> partition_ranks;      // weakCoupling / thermal (optional)
  long weak_dim = 0;                      // detector
  long split = 0;                         // detector J; 0 means weak_dim
  double delta = 0.0;                     // detector
  std::vector<double> thermal_weights;    // thermal
  std::vector<long> thermal_ranks;        // thermal
};

struct PropagatorSpec {
  std::string type;  // identity | random | explicit
  std::uint64_t seed = 0;
  std::optional<Matrix> matrix;
};

struct InitialStateSpec {
  std::string type;  // basis | maximallyMixed | explicit
  long index = 0;
  std::optional<Matrix> matrix;
};

struct FieldSpec {
  std::string type;  // vacuum | explicit | thermal
  std::vector<int> entries;
};

struct ToleranceSpec {
  double unitarity = 1e-10;
  double hermiticity = 1e-10;
  double cluster = 1e-8;
  double prune = 1e-9;
};

struct Scenario {
  std::string name;
  long field_dim = 0;       // N
  long atom_dim = 0;        // M
  long partition_size = 0;  // L
  ModelSpec model;
  PropagatorSpec propagator;
  InitialStateSpec initial_state;
  FieldSpec field;
  long steps = 0;
  long trials = 1;
  std::uint64_t master_seed = 0;
  ToleranceSpec tolerances;
  std::string log_mode = "full";  // full | summaryOnly

  Tolerances tolerances_runtime() const;
};

Matrix matrix_from_json(const nlohmann::json& j, const std::string& path);
nlohmann::json matrix_to_json(const Matrix& m);

Scenario parse_scenario_json(const nlohmann::json& j);
Scenario parse_scenario_file(const std::string& path);
nlohmann::json scenario_to_json(const Scenario& s);

// Runtime objects built from a validated scenario.
struct CompiledScenario {
  Scenario scenario;
  std::optional<MeasurementModel> model;       // absent for explicitU
  std::optional<DetectorModel> detector;       // detector scenarios
  std::optional<ThermalEnvironment> thermal;   // thermal scenarios
  UnitaryMatrix interaction;                   // U on C^N ⊗ C^M
  KrausFamily kraus;
  UnitaryMatrix propagator;                    // V
  DensityMatrix initial_state;
  FieldSequence field;
  Tolerances tol;
};

CompiledScenario compile_scenario(const Scenario& s);

}  // namespace ethsim
