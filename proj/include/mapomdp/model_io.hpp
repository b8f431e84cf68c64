#pragma once

// Canonical JSON form of a model and the file-format dispatching loader.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "mapomdp/cassandra.hpp"
#include "mapomdp/pomdp.hpp"

namespace mapomdp {

using ordered_json = nlohmann::ordered_json;

inline ordered_json to_json(const Pomdp& model) {
  const auto& d = model.data();
  const std::size_t n = model.num_states();
  ordered_json j;
  j["states"] = d.states;
  j["actions"] = d.actions;
  j["observations"] = d.observations;
  j["rewardValues"] = d.reward_values;
  ordered_json transition = ordered_json::array();
  for (const auto& t : d.transition) {
    ordered_json rows = ordered_json::array();
    for (std::size_t s = 0; s < n; ++s) {
      ordered_json row = ordered_json::array();
      for (std::size_t next = 0; next < n; ++next) row.push_back(t(s, next));
      rows.push_back(std::move(row));
    }
    transition.push_back(std::move(rows));
  }
  j["transition"] = std::move(transition);
  ordered_json kernel = ordered_json::array();
  for (std::size_t a = 0; a < model.num_actions(); ++a) {
    ordered_json by_state = ordered_json::array();
    for (std::size_t s = 0; s < n; ++s) {
      ordered_json by_next = ordered_json::array();
      for (std::size_t next = 0; next < n; ++next) {
        ordered_json dist = ordered_json::array();
        for (std::size_t z = 0; z < model.num_signals(); ++z) dist.push_back(model.signal_probability(s, a, next, z));
        by_next.push_back(std::move(dist));
      }
      by_state.push_back(std::move(by_next));
    }
    kernel.push_back(std::move(by_state));
  }
  j["signalKernel"] = std::move(kernel);
  j["discount"] = d.discount;
  j["initialBelief"] = std::vector<double>(d.initial_belief.data(), d.initial_belief.data() + d.initial_belief.size());
  j["rewardScale"] = d.reward_scale;
  j["rewardOffset"] = d.reward_offset;
  return j;
}

inline Pomdp model_from_json(const nlohmann::json& j) {
  try {
    PomdpData d;
    d.states = j.at("states").get<std::vector<std::string>>();
    d.actions = j.at("actions").get<std::vector<std::string>>();
    d.observations = j.at("observations").get<std::vector<std::string>>();
    d.reward_values = j.at("rewardValues").get<std::vector<double>>();
    const std::size_t n = d.states.size();
    const std::size_t nz = d.observations.size() * d.reward_values.size();
    const auto& tr = j.at("transition");
    if (tr.size() != d.actions.size()) throw ValidationError("transition must list one matrix per action");
    for (const auto& mat : tr) {
      Eigen::MatrixXd m(n, n);
      if (mat.size() != n) throw ValidationError("transition matrix has wrong row count");
      for (std::size_t s = 0; s < n; ++s) {
        if (mat[s].size() != n) throw ValidationError("transition row has wrong length");
        for (std::size_t t = 0; t < n; ++t) m(s, t) = mat[s][t].get<double>();
      }
      d.transition.push_back(std::move(m));
    }
    const auto& k = j.at("signalKernel");
    if (k.size() != d.actions.size()) throw ValidationError("signalKernel must list one block per action");
    for (const auto& by_state : k) {
      if (by_state.size() != n) throw ValidationError("signalKernel block has wrong state count");
      for (const auto& by_next : by_state) {
        if (by_next.size() != n) throw ValidationError("signalKernel block has wrong next-state count");
        for (const auto& dist : by_next) {
          if (dist.size() != nz) throw ValidationError("signal distribution has wrong length");
          for (const auto& p : dist) d.signal_kernel.push_back(p.get<double>());
        }
      }
    }
    d.discount = j.at("discount").get<double>();
    const auto b = j.at("initialBelief").get<std::vector<double>>();
    d.initial_belief = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    d.reward_scale = j.at("rewardScale").get<double>();
    d.reward_offset = j.at("rewardOffset").get<double>();
    return Pomdp(std::move(d));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model JSON: ") + e.what());
  }
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

/// Loads a `.json` canonical model or a Cassandra `.POMDP` file (any other extension).
inline Pomdp load_pomdp(const std::string& path, const LoadOptions& options = {}) {
  const std::string text = read_text_file(path);
  const bool is_json = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
  if (is_json) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(std::string("model JSON parse error: ") + e.what());
    }
    return model_from_json(j);
  }
  return parse_cassandra(text, options);
}

}  // namespace mapomdp
