#include "lbc/mdp.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace lbc {

namespace {

std::string idx(std::initializer_list<int> ids) {
  std::ostringstream os;
  os << "(";
  bool first = true;
  for (int v : ids) {
    if (!first) os << ",";
    os << v;
    first = false;
  }
  os << ")";
  return os.str();
}

void check_distribution(const Eigen::Ref<const VectorXd>& p, double tol, const std::string& where) {
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (!std::isfinite(p[k]) || p[k] < 0.0)
      throw Error(where + ": negative or non-finite probability at entry " + std::to_string(k));
  }
  const double s = p.sum();
  if (std::abs(s - 1.0) > tol)
    throw Error(where + ": probabilities sum to " + std::to_string(s) + ", expected 1");
}

}  // namespace

FeatureMdp::FeatureMdp(int horizon, int num_actions, int dim, std::vector<int> states,
                       std::vector<std::vector<MatrixXd>> features,
                       std::vector<std::vector<MatrixXd>> transitions,
                       std::vector<VectorXd> reward_params, VectorXd initial, double norm_bound,
                       MdpValidation validation)
    : horizon_(horizon),
      num_actions_(num_actions),
      dim_(dim),
      states_(std::move(states)),
      features_(std::move(features)),
      transitions_(std::move(transitions)),
      reward_params_(std::move(reward_params)),
      initial_(std::move(initial)),
      norm_bound_(norm_bound),
      validation_(validation) {
  validate();
}

void FeatureMdp::validate() const {
  if (horizon_ < 1) throw Error("mdp: horizon must be positive");
  if (num_actions_ < 1) throw Error("mdp: action count must be positive");
  if (dim_ < 1) throw Error("mdp: feature dimension must be positive");
  if (static_cast<int>(states_.size()) != horizon_) throw Error("mdp: S must have H entries");
  for (int h = 0; h < horizon_; ++h)
    if (states_[h] < 1) throw Error("mdp: state count at step " + std::to_string(h) + " must be positive");
  if (!(norm_bound_ > 0.0) || !std::isfinite(norm_bound_)) throw Error("mdp: B must be a positive real");
  if (static_cast<int>(features_.size()) != horizon_) throw Error("mdp: phi must have H layers");
  if (static_cast<int>(transitions_.size()) != horizon_ - 1) throw Error("mdp: P must have H-1 layers");
  if (static_cast<int>(reward_params_.size()) != horizon_) throw Error("mdp: theta_r must have H entries");

  const double norm_cap = 1.0 + validation_.norm_tol;
  for (int h = 0; h < horizon_; ++h) {
    if (static_cast<int>(features_[h].size()) != states_[h])
      throw Error("mdp: phi at step " + std::to_string(h) + " must have S_h states");
    for (int x = 0; x < states_[h]; ++x) {
      const MatrixXd& f = features_[h][x];
      if (f.rows() != num_actions_ || f.cols() != dim_)
        throw Error("mdp: phi" + idx({h, x}) + " has wrong shape");
      if (!f.allFinite()) throw Error("mdp: phi" + idx({h, x}) + " is not finite");
      if (validation_.require_unit_features) {
        for (int a = 0; a < num_actions_; ++a)
          if (f.row(a).norm() > norm_cap)
            throw Error("mdp: ||phi" + idx({h, x, a}) + "||_2 exceeds 1");
      }
    }
    const VectorXd& th = reward_params_[h];
    if (th.size() != dim_) throw Error("mdp: theta_r at step " + std::to_string(h) + " has wrong length");
    if (validation_.require_unit_features && th.norm() > norm_cap)
      throw Error("mdp: ||theta_r at step " + std::to_string(h) + "||_2 exceeds 1");
  }
  for (int h = 0; h + 1 < horizon_; ++h) {
    if (static_cast<int>(transitions_[h].size()) != states_[h])
      throw Error("mdp: P at step " + std::to_string(h) + " must have S_h states");
    for (int x = 0; x < states_[h]; ++x) {
      const MatrixXd& p = transitions_[h][x];
      if (p.rows() != num_actions_ || p.cols() != states_[h + 1])
        throw Error("mdp: P" + idx({h, x}) + " has wrong shape");
      for (int a = 0; a < num_actions_; ++a)
        check_distribution(p.row(a).transpose(), validation_.stochastic_tol, "mdp: P" + idx({h, x, a}));
    }
  }
  if (initial_.size() != states_[0]) throw Error("mdp: d1 must have S_1 entries");
  check_distribution(initial_, validation_.stochastic_tol, "mdp: d1");
}

MatrixXd FeatureMdp::step_design(int h) const {
  const int s = states_[h];
  MatrixXd out(static_cast<Eigen::Index>(s) * num_actions_, dim_);
  for (int x = 0; x < s; ++x) out.middleRows(static_cast<Eigen::Index>(x) * num_actions_, num_actions_) = features_[h][x];
  return out;
}

nlohmann::json mdp_to_json(const FeatureMdp& mdp) {
  using nlohmann::json;
  json j;
  j["H"] = mdp.horizon();
  j["A"] = mdp.num_actions();
  j["d"] = mdp.dim();
  j["S"] = mdp.states();
  json phi = json::array();
  for (int h = 0; h < mdp.horizon(); ++h) {
    json layer = json::array();
    for (int x = 0; x < mdp.num_states(h); ++x) {
      json acts = json::array();
      const MatrixXd& f = mdp.action_features(h, x);
      for (int a = 0; a < mdp.num_actions(); ++a) {
        json v = json::array();
        for (int k = 0; k < mdp.dim(); ++k) v.push_back(f(a, k));
        acts.push_back(std::move(v));
      }
      layer.push_back(std::move(acts));
    }
    phi.push_back(std::move(layer));
  }
  j["phi"] = std::move(phi);
  json p = json::array();
  for (int h = 0; h + 1 < mdp.horizon(); ++h) {
    json layer = json::array();
    for (int x = 0; x < mdp.num_states(h); ++x) {
      json acts = json::array();
      const MatrixXd& m = mdp.transition_matrix(h, x);
      for (int a = 0; a < mdp.num_actions(); ++a) {
        json v = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) v.push_back(m(a, k));
        acts.push_back(std::move(v));
      }
      layer.push_back(std::move(acts));
    }
    p.push_back(std::move(layer));
  }
  j["P"] = std::move(p);
  json theta = json::array();
  for (int h = 0; h < mdp.horizon(); ++h) {
    json v = json::array();
    for (int k = 0; k < mdp.dim(); ++k) v.push_back(mdp.reward_params(h)[k]);
    theta.push_back(std::move(v));
  }
  j["theta_r"] = std::move(theta);
  json d1 = json::array();
  for (Eigen::Index k = 0; k < mdp.initial_distribution().size(); ++k) d1.push_back(mdp.initial_distribution()[k]);
  j["d1"] = std::move(d1);
  j["B"] = mdp.norm_bound();
  j["unit_features"] = mdp.unit_features();
  return j;
}

namespace {

const nlohmann::json& field(const nlohmann::json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw Error(std::string("mdp file: missing field '") + key + "'");
  return j.at(key);
}

VectorXd to_vector(const nlohmann::json& arr, const std::string& where) {
  if (!arr.is_array()) throw Error("mdp file: " + where + " must be an array");
  VectorXd v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw Error("mdp file: " + where + "[" + std::to_string(i) + "] must be a number");
    v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  }
  return v;
}

MatrixXd to_matrix(const nlohmann::json& arr, Eigen::Index rows, Eigen::Index cols, const std::string& where) {
  if (!arr.is_array() || static_cast<Eigen::Index>(arr.size()) != rows)
    throw Error("mdp file: " + where + " must have " + std::to_string(rows) + " rows");
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const std::string w = where + "[" + std::to_string(r) + "]";
    VectorXd row = to_vector(arr[static_cast<std::size_t>(r)], w);
    if (row.size() != cols) throw Error("mdp file: " + w + " must have length " + std::to_string(cols));
    m.row(r) = row.transpose();
  }
  return m;
}

}  // namespace

FeatureMdp mdp_from_json(const nlohmann::json& j) {
  try {
    const int horizon = field(j, "H").get<int>();
    const int num_actions = field(j, "A").get<int>();
    const int dim = field(j, "d").get<int>();
    const auto states = field(j, "S").get<std::vector<int>>();
    if (horizon < 1 || num_actions < 1 || dim < 1) throw Error("mdp file: H, A, d must be positive");
    if (static_cast<int>(states.size()) != horizon) throw Error("mdp file: S must have H entries");
    for (int h = 0; h < horizon; ++h)
      if (states[h] < 1) throw Error("mdp file: S[" + std::to_string(h) + "] must be positive");
    const auto& phi = field(j, "phi");
    const auto& p = field(j, "P");
    if (!phi.is_array() || static_cast<int>(phi.size()) != horizon) throw Error("mdp file: phi must have H layers");
    if (!p.is_array() || static_cast<int>(p.size()) != horizon - 1) throw Error("mdp file: P must have H-1 layers");

    std::vector<std::vector<MatrixXd>> features(static_cast<std::size_t>(horizon));
    for (int h = 0; h < horizon; ++h) {
      if (!phi[h].is_array() || static_cast<int>(phi[h].size()) != states[h])
        throw Error("mdp file: phi[" + std::to_string(h) + "] must have S_h entries");
      for (int x = 0; x < states[h]; ++x)
        features[h].push_back(to_matrix(phi[h][x], num_actions, dim,
                                        "phi[" + std::to_string(h) + "][" + std::to_string(x) + "]"));
    }
    std::vector<std::vector<MatrixXd>> transitions(static_cast<std::size_t>(horizon - 1));
    for (int h = 0; h + 1 < horizon; ++h) {
      if (!p[h].is_array() || static_cast<int>(p[h].size()) != states[h])
        throw Error("mdp file: P[" + std::to_string(h) + "] must have S_h entries");
      for (int x = 0; x < states[h]; ++x)
        transitions[h].push_back(to_matrix(p[h][x], num_actions, states[h + 1],
                                           "P[" + std::to_string(h) + "][" + std::to_string(x) + "]"));
    }
    const auto& theta = field(j, "theta_r");
    if (!theta.is_array() || static_cast<int>(theta.size()) != horizon)
      throw Error("mdp file: theta_r must have H entries");
    std::vector<VectorXd> reward_params;
    for (int h = 0; h < horizon; ++h) reward_params.push_back(to_vector(theta[h], "theta_r[" + std::to_string(h) + "]"));
    VectorXd initial = to_vector(field(j, "d1"), "d1");
    const double b = field(j, "B").get<double>();
    MdpValidation validation;
    if (j.contains("unit_features")) validation.require_unit_features = j.at("unit_features").get<bool>();
    return FeatureMdp(horizon, num_actions, dim, states, std::move(features), std::move(transitions),
                      std::move(reward_params), std::move(initial), b, validation);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("mdp file: ") + e.what());
  }
}

FeatureMdp load_mdp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open MDP file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("mdp file '" + path + "': " + e.what());
  }
  return mdp_from_json(j);
}

void save_mdp(const FeatureMdp& mdp, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write MDP file '" + path + "'");
  out << mdp_to_json(mdp).dump(1) << "\n";
}

}  // namespace lbc
