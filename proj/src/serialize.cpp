#include "stratreg/serialize.hpp"

#include <fstream>
#include <stdexcept>

namespace stratreg {

json vector_to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vector vector_from_json(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("expected a JSON array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j.at(i).get<double>();
  return v;
}

json to_json(const Scenario& s) {
  json loading = json::array();
  for (Eigen::Index i = 0; i < s.features.loading.rows(); ++i) {
    loading.push_back(vector_to_json(s.features.loading.row(i).transpose()));
  }
  json costs = json::array();
  for (const auto& t : s.costs.types) costs.push_back({{"c", vector_to_json(t.c)}, {"B", t.budget}, {"pi", t.prob}});
  return {{"name", s.name},
          {"d", s.d()},
          {"r", s.features.r()},
          {"beta_star", vector_to_json(s.model.beta_star)},
          {"sigma", s.model.sigma},
          {"noise_kind", to_string(s.model.noise_kind)},
          {"loading", loading},
          {"cost_types", costs}};
}

Scenario scenario_from_json(const json& j) {
  try {
    Scenario s;
    s.name = j.at("name").get<std::string>();
    s.model.beta_star = vector_from_json(j.at("beta_star"));
    s.model.sigma = j.at("sigma").get<double>();
    s.model.noise_kind = noise_kind_from_string(j.value("noise_kind", std::string("uniform")));

    const auto d = j.at("d").get<std::size_t>();
    const auto r = j.at("r").get<std::size_t>();
    const json& rows = j.at("loading");
    if (rows.size() != d) throw std::invalid_argument("loading must have d rows");
    s.features.loading.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(r));
    for (std::size_t i = 0; i < d; ++i) {
      const Vector row = vector_from_json(rows.at(i));
      if (static_cast<std::size_t>(row.size()) != r) throw std::invalid_argument("loading rows must have r entries");
      s.features.loading.row(static_cast<Eigen::Index>(i)) = row.transpose();
    }
    for (const auto& t : j.at("cost_types")) {
      s.costs.types.push_back(CostType{vector_from_json(t.at("c")), t.at("B").get<double>(), t.at("pi").get<double>()});
    }
    if (static_cast<std::size_t>(s.model.beta_star.size()) != d) throw std::invalid_argument("beta_star must have d entries");
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed scenario JSON: ") + e.what());
  }
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open scenario file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("cannot parse " + path.string() + ": " + e.what());
  }
  return scenario_from_json(j);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void save_scenario(const Scenario& s, const std::filesystem::path& path) { write_text(path, to_json(s).dump(2) + "\n"); }

json to_json(const LearnerConfig& c) {
  json j = {{"epoch_size", c.epoch_size},
            {"num_epochs", c.num_epochs},
            {"alpha", c.alpha},
            {"mode", to_string(c.lse_tie_rule)},
            {"agent_tie_rule", to_string(c.agent_tie_rule)},
            {"keep_observations", c.keep_observations},
            {"rel_tol", c.rel_tol}};
  j["beta0"] = c.beta0 ? vector_to_json(*c.beta0) : json(nullptr);
  return j;
}

json to_json(const Observation& o) {
  json delta = o.delta.index ? json{{"index", *o.delta.index}, {"amount", o.delta.amount}}
                             : json{{"index", nullptr}, {"amount", 0.0}};
  return {{"t", o.t},   {"epoch", o.epoch},     {"x", vector_to_json(o.x)}, {"delta", delta},
          {"x_bar", vector_to_json(o.x_bar)}, {"y_bar", o.y_bar}, {"eps", o.eps}};
}

json to_json(const EpochEntry& e) {
  return {{"E", e.epoch},
          {"tau", e.tau},
          {"beta_hat", vector_to_json(e.beta_hat)},
          {"D", e.modified},
          {"err_D", e.err_modified},
          {"err_full", e.err_full},
          {"rank_U", e.rank_u},
          {"min_eig_V", e.min_eig_v}};
}

json to_json(const RunRecord& r) {
  json epochs = json::array();
  for (const auto& e : r.epochs) epochs.push_back(to_json(e));
  json j = {{"scenario", r.scenario}, {"config", to_json(r.config)}, {"seed", r.seed}, {"epochs", epochs}};
  if (r.has_observations) {
    json obs = json::array();
    for (const auto& o : r.observations) obs.push_back(to_json(o));
    j["observations"] = std::move(obs);
  }
  return j;
}

json to_json(const InstanceConstants& c) {
  return {{"k_prime", c.k_prime},         {"k_big", c.k_big},   {"lambda_sigma", c.lambda_sigma},
          {"lambda", c.lambda},           {"gamma", c.gamma},   {"kappa_prime", c.kappa_prime},
          {"kappa", c.kappa},             {"max_ratio", c.max_ratio}, {"lambda_r", c.lambda_r},
          {"min_mod_moment", c.min_mod_moment}};
}

json to_json(const BoundCheckReport& r) {
  return {{"trials", r.trials},
          {"violations", r.violations},
          {"delta", r.delta},
          {"bound", r.bound},
          {"mean_abs_sum", r.mean_abs_sum},
          {"max_abs_sum", r.max_abs_sum},
          {"violation_rate", r.violation_rate},
          {"allowed_rate", r.allowed_rate},
          {"pass", r.pass}};
}

json to_json(const ConcentrationReport& r) {
  json noise = json::array();
  for (const auto& f : r.noise) {
    noise.push_back({{"feature", f.feature}, {"correlation", f.correlation}, {"bound", f.bound}, {"pass", f.pass}});
  }
  return {{"tau", r.tau},
          {"epoch_size", r.epoch_size},
          {"delta", r.delta},
          {"noise_correlation", noise},
          {"noise_pass", r.noise_pass},
          {"restricted_min_eig", r.restricted_min_eig},
          {"restricted_lower_bound", r.restricted_lower},
          {"restricted_pass", r.restricted_pass},
          {"foc_residual", r.foc},
          {"pass", r.pass}};
}

}  // namespace stratreg
