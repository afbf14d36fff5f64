#include "ethsim/scenario.hpp"

#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace ethsim {

using nlohmann::json;

namespace {

std::string join_issues(const std::vector<std::string>& issues) {
  std::ostringstream os;
  os << "scenario validation failed (" << issues.size() << " issue(s)):";
  for (const auto& issue : issues) os << "\n  - " << issue;
  return os.str();
}

}  // namespace

ScenarioError::ScenarioError(std::vector<std::string> issues)
    : std::runtime_error(join_issues(issues)), issues_(std::move(issues)) {}

Matrix matrix_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty())
    throw ScenarioError({path + ": expected a non-empty array of rows"});
  const std::size_t rows = j.size();
  std::size_t cols = 0;
  Matrix out;
  for (std::size_t i = 0; i < rows; ++i) {
    const json& row = j[i];
    if (!row.is_array() || row.empty())
      throw ScenarioError({path + "[" + std::to_string(i) + "]: expected a row array"});
    if (i == 0) {
      cols = row.size();
      out = Matrix::Zero(long(rows), long(cols));
    } else if (row.size() != cols) {
      throw ScenarioError({path + "[" + std::to_string(i) + "]: ragged row"});
    }
    for (std::size_t k = 0; k < cols; ++k) {
      const json& entry = row[k];
      if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number() ||
          !entry[1].is_number())
        throw ScenarioError({path + "[" + std::to_string(i) + "][" + std::to_string(k) +
                             "]: expected [re, im]"});
      out(long(i), long(k)) = Complex(entry[0].get<double>(), entry[1].get<double>());
    }
  }
  return out;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (long i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (long k = 0; k < m.cols(); ++k)
      row.push_back(json::array({m(i, k).real(), m(i, k).imag()}));
    rows.push_back(std::move(row));
  }
  return rows;
}

Tolerances Scenario::tolerances_runtime() const {
  Tolerances t;
  t.unitarity = tolerances.unitarity;
  t.hermiticity = tolerances.hermiticity;
  t.trace = tolerances.hermiticity;
  t.positivity = tolerances.hermiticity;
  t.cluster = tolerances.cluster;
  return t;
}

namespace {

class Checker {
 public:
  explicit Checker(const json& j) : root_(j) {}

  std::vector<std::string>& issues() { return issues_; }

  bool has(const std::string& key) const { return root_.contains(key); }

  template <class T>
  T get(const json& j, const std::string& path, const std::string& key, T fallback,
        bool required) {
    if (!j.contains(key)) {
      if (required) issues_.push_back(path + key + ": missing");
      return fallback;
    }
    try {
      return j.at(key).get<T>();
    } catch (const json::exception&) {
      issues_.push_back(path + key + ": wrong type");
      return fallback;
    }
  }

  void add(const std::string& issue) { issues_.push_back(issue); }

 private:
  const json& root_;
  std::vector<std::string> issues_;
};

std::vector<long> near_equal_ranks(long total, long blocks) {
  std::vector<long> ranks(std::size_t(blocks), total / blocks);
  for (long i = 0; i < total % blocks; ++i) ranks[std::size_t(i)] += 1;
  return ranks;
}

}  // namespace

Scenario parse_scenario_json(const json& j) {
  if (!j.is_object()) throw ScenarioError({"$: scenario must be a JSON object"});
  Checker c(j);
  Scenario s;
  s.name = c.get<std::string>(j, "", "name", "unnamed", false);
  s.field_dim = c.get<long>(j, "", "N", 0, true);
  s.atom_dim = c.get<long>(j, "", "M", 0, true);
  s.partition_size = c.get<long>(j, "", "L", std::max(1l, s.atom_dim), false);
  s.steps = c.get<long>(j, "", "steps", 0, true);
  s.trials = c.get<long>(j, "", "trials", 1, false);
  s.master_seed = c.get<std::uint64_t>(j, "", "masterSeed", 0, false);
  s.log_mode = c.get<std::string>(j, "", "log", "full", false);

  if (s.field_dim < 1) c.add("N: must be a positive integer");
  if (s.atom_dim < 1) c.add("M: must be a positive integer");
  if (s.partition_size < 1 || s.partition_size > std::max(1l, s.atom_dim))
    c.add("L: must lie in [1, M]");
  if (s.steps < 0) c.add("steps: must be >= 0");
  if (s.trials < 1) c.add("trials: must be >= 1");
  if (s.log_mode != "full" && s.log_mode != "summaryOnly")
    c.add("log: must be \"full\" or \"summaryOnly\"");

  if (j.contains("tolerances")) {
    const json& t = j.at("tolerances");
    s.tolerances.unitarity = c.get<double>(t, "tolerances.", "unitarity", 1e-10, false);
    s.tolerances.hermiticity = c.get<double>(t, "tolerances.", "hermiticity", 1e-10, false);
    s.tolerances.cluster = c.get<double>(t, "tolerances.", "cluster", 1e-8, false);
    s.tolerances.prune = c.get<double>(t, "tolerances.", "pruneBelow", 1e-9, false);
    if (s.tolerances.unitarity <= 0 || s.tolerances.hermiticity <= 0 ||
        s.tolerances.cluster <= 0 || s.tolerances.prune < 0)
      c.add("tolerances: must be positive (pruneBelow >= 0)");
  }

  // --- model ---
  if (!j.contains("model")) {
    c.add("model: missing");
  } else {
    const json& m = j.at("model");
    s.model.type = c.get<std::string>(m, "model.", "type", "", true);
    if (s.model.type == "explicitU") {
      if (m.contains("U")) {
        try {
          s.model.unitary = matrix_from_json(m.at("U"), "model.U");
        } catch (const ScenarioError& e) {
          for (const auto& issue : e.issues()) c.add(issue);
        }
        if (s.model.unitary && (s.model.unitary->rows() != s.field_dim * s.atom_dim ||
                                s.model.unitary->cols() != s.field_dim * s.atom_dim))
          c.add("model.U: expected " + std::to_string(s.field_dim * s.atom_dim) +
                "x" + std::to_string(s.field_dim * s.atom_dim));
      } else {
        c.add("model.U: missing");
      }
    } else if (s.model.type == "measurement") {
      const auto read_list = [&](const char* key, std::vector<Matrix>& dst, long dim) {
        if (!m.contains(key) || !m.at(key).is_array()) {
          c.add(std::string("model.") + key + ": missing array");
          return;
        }
        const json& list = m.at(key);
        for (std::size_t i = 0; i < list.size(); ++i) {
          const std::string path = std::string("model.") + key + "[" + std::to_string(i) + "]";
          try {
            Matrix mat = matrix_from_json(list[i], path);
            if (mat.rows() != dim || mat.cols() != dim)
              c.add(path + ": expected " + std::to_string(dim) + "x" + std::to_string(dim));
            dst.push_back(std::move(mat));
          } catch (const ScenarioError& e) {
            for (const auto& issue : e.issues()) c.add(issue);
          }
        }
        if (long(list.size()) != s.partition_size)
          c.add(std::string("model.") + key + ": expected L = " +
                std::to_string(s.partition_size) + " entries");
      };
      read_list("T", s.model.field_unitaries, s.field_dim);
      read_list("Q", s.model.atom_projections, s.atom_dim);
    } else if (s.model.type == "weakCoupling" || s.model.type == "strongCoupling" ||
               s.model.type == "thermal") {
      s.model.epsilon = c.get<double>(m, "model.", "epsilon", 0.0, s.model.type != "thermal");
      s.model.seed = c.get<std::uint64_t>(m, "model.", "seed", 0, false);
      if (s.model.epsilon < 0.0 || s.model.epsilon >= 1.0)
        c.add("model.epsilon: must lie in [0, 1)");
      if (m.contains("partitionRanks")) {
        s.model.partition_ranks = c.get<std::vector<long>>(m, "model.", "partitionRanks", {},
                                                           false);
        if (long(s.model.partition_ranks.size()) != s.partition_size)
          c.add("model.partitionRanks: expected L entries");
        else if (std::accumulate(s.model.partition_ranks.begin(),
                                 s.model.partition_ranks.end(), 0l) != s.atom_dim)
          c.add("model.partitionRanks: must sum to M");
      }
      if (s.model.type == "strongCoupling") {
        if (s.partition_size != s.atom_dim) c.add("L: strongCoupling requires L = M");
        if (s.field_dim < s.atom_dim) c.add("N: strongCoupling requires N >= M");
        if (!s.model.partition_ranks.empty())
          c.add("model.partitionRanks: strongCoupling uses rank-1 projections only");
      }
      if (s.model.type == "thermal") {
        s.model.thermal_weights =
            c.get<std::vector<double>>(m, "model.", "weights", {}, true);
        s.model.thermal_ranks = c.get<std::vector<long>>(m, "model.", "ranks", {}, true);
        double sum = 0.0;
        for (std::size_t k = 0; k < s.model.thermal_weights.size(); ++k) {
          if (s.model.thermal_weights[k] <= 0.0) c.add("model.weights: must be > 0");
          if (k > 0 && s.model.thermal_weights[k] >= s.model.thermal_weights[k - 1])
            c.add("model.weights: must be strictly descending");
          sum += s.model.thermal_weights[k];
        }
        if (!s.model.thermal_weights.empty() && std::abs(sum - 1.0) > 1e-10)
          c.add("model.weights: must sum to 1");
        if (s.model.thermal_ranks.size() != s.model.thermal_weights.size())
          c.add("model.ranks: expected one rank per weight");
        long rank_sum = 0;
        for (long r : s.model.thermal_ranks) {
          if (r < 1) c.add("model.ranks: ranks must be positive");
          rank_sum += r;
        }
        if (rank_sum > s.field_dim) c.add("model.ranks: ranks sum exceeds N");
      }
    } else if (s.model.type == "detector") {
      s.model.weak_dim = c.get<long>(m, "model.", "weakDim", 0, true);
      s.model.split = c.get<long>(m, "model.", "J", 0, false);
      s.model.delta = c.get<double>(m, "model.", "delta", 0.0, true);
      s.model.epsilon = c.get<double>(m, "model.", "epsilon", 0.0, true);
      s.model.seed = c.get<std::uint64_t>(m, "model.", "seed", 0, false);
      if (s.model.weak_dim < 1 || s.model.weak_dim >= s.atom_dim)
        c.add("model.weakDim: must lie in [1, M)");
      if (s.model.split == 0) s.model.split = s.model.weak_dim;
      if (s.model.split < 1 || s.model.split > s.model.weak_dim)
        c.add("model.J: must lie in [1, weakDim]");
      if (s.model.delta < 0.0 || s.model.delta >= 1.0) c.add("model.delta: must lie in [0, 1)");
      if (s.model.epsilon < 0.0 || s.model.epsilon >= 1.0)
        c.add("model.epsilon: must lie in [0, 1)");
      const long strong_dim = s.atom_dim - s.model.weak_dim;
      if (s.partition_size != s.model.split + strong_dim)
        c.add("L: detector requires L = J + (M - weakDim)");
      if (s.field_dim != strong_dim + 1)
        c.add("N: detector construction requires N = (M - weakDim) + 1");
    } else {
      c.add("model.type: unknown type \"" + s.model.type + "\"");
    }
  }

  // --- propagator ---
  if (!j.contains("V")) {
    c.add("V: missing");
  } else {
    const json& v = j.at("V");
    s.propagator.type = c.get<std::string>(v, "V.", "type", "", true);
    if (s.propagator.type == "random") {
      s.propagator.seed = c.get<std::uint64_t>(v, "V.", "seed", 0, false);
    } else if (s.propagator.type == "explicit") {
      if (v.contains("matrix")) {
        try {
          s.propagator.matrix = matrix_from_json(v.at("matrix"), "V.matrix");
          if (s.propagator.matrix->rows() != s.atom_dim ||
              s.propagator.matrix->cols() != s.atom_dim)
            c.add("V.matrix: expected MxM");
        } catch (const ScenarioError& e) {
          for (const auto& issue : e.issues()) c.add(issue);
        }
      } else {
        c.add("V.matrix: missing");
      }
    } else if (s.propagator.type != "identity") {
      c.add("V.type: unknown type \"" + s.propagator.type + "\"");
    }
  }

  // --- initial state ---
  if (!j.contains("initialState")) {
    c.add("initialState: missing");
  } else {
    const json& init = j.at("initialState");
    s.initial_state.type = c.get<std::string>(init, "initialState.", "type", "", true);
    if (s.initial_state.type == "basis") {
      s.initial_state.index = c.get<long>(init, "initialState.", "index", 0, false);
      if (s.initial_state.index < 0 || s.initial_state.index >= s.atom_dim)
        c.add("initialState.index: must lie in [0, M)");
    } else if (s.initial_state.type == "explicit") {
      if (init.contains("matrix")) {
        try {
          s.initial_state.matrix = matrix_from_json(init.at("matrix"), "initialState.matrix");
          if (s.initial_state.matrix->rows() != s.atom_dim ||
              s.initial_state.matrix->cols() != s.atom_dim)
            c.add("initialState.matrix: expected MxM");
        } catch (const ScenarioError& e) {
          for (const auto& issue : e.issues()) c.add(issue);
        }
      } else {
        c.add("initialState.matrix: missing");
      }
    } else if (s.initial_state.type != "maximallyMixed") {
      c.add("initialState.type: unknown type \"" + s.initial_state.type + "\"");
    }
  }

  // --- field sequence ---
  if (!j.contains("fieldSequence")) {
    c.add("fieldSequence: missing");
  } else {
    const json& f = j.at("fieldSequence");
    s.field.type = c.get<std::string>(f, "fieldSequence.", "type", "", true);
    if (s.field.type == "explicit") {
      s.field.entries = c.get<std::vector<int>>(f, "fieldSequence.", "k", {}, true);
      for (std::size_t i = 0; i < s.field.entries.size(); ++i)
        if (s.field.entries[i] < 0 || s.field.entries[i] >= s.field_dim)
          c.add("fieldSequence.k[" + std::to_string(i) + "]: out of range [0, N)");
      if (long(s.field.entries.size()) < s.steps)
        c.add("fieldSequence.k: horizon shorter than steps");
    } else if (s.field.type != "vacuum" && s.field.type != "thermal") {
      c.add("fieldSequence.type: unknown type \"" + s.field.type + "\"");
    }
  }
  if ((s.field.type == "thermal") != (s.model.type == "thermal"))
    c.add("fieldSequence.type: \"thermal\" is required exactly when model.type is \"thermal\"");
  if (s.model.type == "detector" && s.propagator.type != "identity")
    c.add("V.type: detector scenarios construct their own propagator; set type \"identity\"");

  if (!c.issues().empty()) throw ScenarioError(c.issues());
  return s;
}

Scenario parse_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError({path + ": cannot open"});
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ScenarioError({path + ": " + e.what()});
  }
  return parse_scenario_json(j);
}

json scenario_to_json(const Scenario& s) {
  json j;
  j["name"] = s.name;
  j["N"] = s.field_dim;
  j["M"] = s.atom_dim;
  j["L"] = s.partition_size;
  j["steps"] = s.steps;
  j["trials"] = s.trials;
  j["masterSeed"] = s.master_seed;
  j["log"] = s.log_mode;
  j["tolerances"] = {{"unitarity", s.tolerances.unitarity},
                     {"hermiticity", s.tolerances.hermiticity},
                     {"cluster", s.tolerances.cluster},
                     {"pruneBelow", s.tolerances.prune}};

  json m;
  m["type"] = s.model.type;
  if (s.model.type == "explicitU") {
    m["U"] = matrix_to_json(*s.model.unitary);
  } else if (s.model.type == "measurement") {
    json ts = json::array(), qs = json::array();
    for (const Matrix& t : s.model.field_unitaries) ts.push_back(matrix_to_json(t));
    for (const Matrix& q : s.model.atom_projections) qs.push_back(matrix_to_json(q));
    m["T"] = std::move(ts);
    m["Q"] = std::move(qs);
  } else if (s.model.type == "weakCoupling" || s.model.type == "strongCoupling") {
    m["epsilon"] = s.model.epsilon;
    m["seed"] = s.model.seed;
    if (!s.model.partition_ranks.empty()) m["partitionRanks"] = s.model.partition_ranks;
  } else if (s.model.type == "detector") {
    m["weakDim"] = s.model.weak_dim;
    m["J"] = s.model.split;
    m["delta"] = s.model.delta;
    m["epsilon"] = s.model.epsilon;
    m["seed"] = s.model.seed;
  } else if (s.model.type == "thermal") {
    m["epsilon"] = s.model.epsilon;
    m["seed"] = s.model.seed;
    m["weights"] = s.model.thermal_weights;
    m["ranks"] = s.model.thermal_ranks;
    if (!s.model.partition_ranks.empty()) m["partitionRanks"] = s.model.partition_ranks;
  }
  j["model"] = std::move(m);

  json v;
  v["type"] = s.propagator.type;
  if (s.propagator.type == "random") v["seed"] = s.propagator.seed;
  if (s.propagator.type == "explicit") v["matrix"] = matrix_to_json(*s.propagator.matrix);
  j["V"] = std::move(v);

  json init;
  init["type"] = s.initial_state.type;
  if (s.initial_state.type == "basis") init["index"] = s.initial_state.index;
  if (s.initial_state.type == "explicit")
    init["matrix"] = matrix_to_json(*s.initial_state.matrix);
  j["initialState"] = std::move(init);

  json f;
  f["type"] = s.field.type;
  if (s.field.type == "explicit") f["k"] = s.field.entries;
  j["fieldSequence"] = std::move(f);
  return j;
}

CompiledScenario compile_scenario(const Scenario& s) {
  const Tolerances tol = s.tolerances_runtime();

  // Propagator first; built models embed it.
  Matrix v_mat;
  if (s.propagator.type == "identity") {
    v_mat = Matrix::Identity(s.atom_dim, s.atom_dim);
  } else if (s.propagator.type == "random") {
    RngStream rng(s.propagator.seed, 1);
    v_mat = random_unitary(rng, s.atom_dim).mat();
  } else {
    v_mat = *s.propagator.matrix;
  }
  UnitaryMatrix v(v_mat, tol.unitarity);

  std::optional<MeasurementModel> model;
  std::optional<DetectorModel> detector;
  std::optional<ThermalEnvironment> thermal;

  if (s.model.type == "measurement") {
    std::vector<UnitaryMatrix> ts;
    std::vector<Projection> qs;
    for (const Matrix& t : s.model.field_unitaries) ts.emplace_back(t, tol.unitarity);
    for (const Matrix& q : s.model.atom_projections) qs.emplace_back(q);
    model.emplace(s.field_dim, std::move(ts), std::move(qs), v);
  } else if (s.model.type == "weakCoupling" || s.model.type == "thermal") {
    std::vector<long> ranks = s.model.partition_ranks;
    if (ranks.empty()) ranks = near_equal_ranks(s.atom_dim, s.partition_size);
    RngStream rng(s.model.seed, 2);
    if (s.model.type == "weakCoupling") {
      model.emplace(weak_coupling_family(s.field_dim, ranks, v, s.model.epsilon, rng));
    } else {
      // Thermal interactions: Haar field unitaries over the block partition.
      std::vector<UnitaryMatrix> ts;
      for (long m = 0; m < s.partition_size; ++m) ts.push_back(random_unitary(rng, s.field_dim));
      model.emplace(s.field_dim, std::move(ts), basis_block_partition(s.atom_dim, ranks), v);
      RngStream env_rng(s.model.seed, 3);
      const UnitaryMatrix frame = random_unitary(env_rng, s.field_dim);
      std::vector<Projection> ps;
      long offset = 0;
      for (long rank : s.model.thermal_ranks) {
        ps.push_back(Projection::span(frame.mat().block(0, offset, s.field_dim, rank)));
        offset += rank;
      }
      thermal.emplace(std::move(ps), s.model.thermal_weights);
    }
  } else if (s.model.type == "strongCoupling") {
    RngStream rng(s.model.seed, 2);
    model.emplace(strong_coupling_model(s.field_dim, s.atom_dim, s.model.epsilon, v, rng));
  } else if (s.model.type == "detector") {
    detector = make_detector_model(s.model.weak_dim, s.atom_dim - s.model.weak_dim,
                                   s.model.split, s.model.delta, s.model.epsilon, s.model.seed);
    model = detector->model;
    v = detector->model.atom_propagator();
  }

  UnitaryMatrix interaction =
      model ? build_measurement_unitary(*model)
            : UnitaryMatrix(*s.model.unitary, tol.unitarity);
  KrausFamily kraus = KrausFamily::from_unitary(interaction, s.field_dim, s.atom_dim);

  DensityMatrix initial = [&] {
    if (s.initial_state.type == "basis")
      return DensityMatrix::basis_projector(s.atom_dim, s.initial_state.index);
    if (s.initial_state.type == "maximallyMixed")
      return DensityMatrix::maximally_mixed(s.atom_dim);
    return DensityMatrix(*s.initial_state.matrix, tol);
  }();

  FieldSequence field = s.field.type == "explicit"
                            ? FieldSequence(s.field.entries, s.field_dim)
                            : FieldSequence::vacuum(s.field_dim, s.steps);

  return CompiledScenario{s,
                          std::move(model),
                          std::move(detector),
                          std::move(thermal),
                          std::move(interaction),
                          std::move(kraus),
                          std::move(v),
                          std::move(initial),
                          std::move(field),
                          tol};
}

}  // namespace ethsim
