#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "bicause/errors.hpp"
#include "bicause/tree.hpp"

namespace bicause {

inline constexpr const char* kTreeSchemaVersion = "bicause_tree_v1";

namespace detail {

using nlohmann::json;

inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline std::optional<double> read_optional_number(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

inline json config_to_json(const FitConfig& c) {
  return json{{"max_depth", c.max_depth},
              {"asmd_threshold", c.asmd_threshold},
              {"min_treat_group_size", c.min_treat_group_size},
              {"min_leaf_population", c.min_leaf_population},
              {"alpha", c.alpha},
              {"correction", "holm"},
              {"positivity_method", to_string(c.positivity_method)},
              {"crump_segments", c.crump_segments},
              {"sp_alpha", c.sp_alpha},
              {"feature_selection", to_string(c.feature_selection)},
              {"max_split_candidates", c.max_split_candidates ? json(*c.max_split_candidates) : json(nullptr)},
              {"split_test", to_string(c.split_test)},
              {"seed", c.seed}};
}

inline FitConfig config_from_json(const json& j) {
  FitConfig c;
  c.max_depth = j.at("max_depth").get<int>();
  c.asmd_threshold = j.at("asmd_threshold").get<double>();
  c.min_treat_group_size = j.at("min_treat_group_size").get<std::int64_t>();
  c.min_leaf_population = j.at("min_leaf_population").get<std::int64_t>();
  c.alpha = j.at("alpha").get<double>();
  if (j.at("correction").get<std::string>() != "holm") throw SchemaError("unsupported correction method");
  c.positivity_method = parse_positivity_method(j.at("positivity_method").get<std::string>());
  c.crump_segments = j.at("crump_segments").get<int>();
  c.sp_alpha = j.at("sp_alpha").get<double>();
  c.feature_selection = parse_feature_selection(j.at("feature_selection").get<std::string>());
  if (!j.at("max_split_candidates").is_null()) c.max_split_candidates = j.at("max_split_candidates").get<std::size_t>();
  c.split_test = parse_split_test(j.value("split_test", std::string("auto")));
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

inline json model_to_json(const LogisticModel& m) {
  return json{{"intercept", m.intercept}, {"coef", std::vector<double>(m.coef.data(), m.coef.data() + m.coef.size())}};
}

inline LogisticModel model_from_json(const json& j) {
  LogisticModel m;
  m.intercept = j.at("intercept").get<double>();
  const auto coef = j.at("coef").get<std::vector<double>>();
  m.coef = Eigen::Map<const Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
  return m;
}

}  // namespace detail

inline nlohmann::json tree_to_json(const Tree& tree) {
  using nlohmann::json;
  json nodes = json::array();
  for (const auto& nd : tree.nodes) {
    json jn{{"id", nd.id},
            {"depth", nd.depth},
            {"n", nd.n},
            {"n_treated", nd.n_treated},
            {"n_control", nd.n_control},
            {"prevalence", nd.prevalence()},
            {"violating", nd.is_violating}};
    if (nd.split) {
      const auto& s = *nd.split;
      jn["split"] = json{{"feature", s.feature_name},
                         {"feature_index", s.feature_index},
                         {"value", s.value},
                         {"p_raw", s.p_raw},
                         {"log_p_raw", s.log_p_raw},
                         {"p_adjusted", detail::optional_number(s.p_adjusted)},
                         {"asmd", std::isinf(s.asmd) ? json("inf") : json(s.asmd)}};
    } else {
      jn["split"] = nullptr;
    }
    jn["children"] = nd.children ? json::array({(*nd.children)[0], (*nd.children)[1]}) : json(nullptr);
    if (nd.leaf_estimate) {
      const auto& e = *nd.leaf_estimate;
      jn["leaf_estimate"] = json{{"mean_treated", detail::optional_number(e.mean_treated)},
                                 {"mean_control", detail::optional_number(e.mean_control)},
                                 {"effect", detail::optional_number(e.effect)},
                                 {"prevalence", e.prevalence},
                                 {"propensity_model", e.propensity_model ? detail::model_to_json(*e.propensity_model) : json(nullptr)},
                                 {"propensity_model_status", e.propensity_model_status}};
    } else {
      jn["leaf_estimate"] = nullptr;
    }
    nodes.push_back(std::move(jn));
  }

  json positivity = nullptr;
  if (tree.cutoffs) {
    positivity = json{{"method", to_string(tree.cutoffs->method)},
                      {"lo", tree.cutoffs->lo},
                      {"hi", tree.cutoffs->hi},
                      {"parameters", tree.cutoffs->parameters}};
  }
  return json{{"version", kTreeSchemaVersion},
              {"config", detail::config_to_json(tree.config)},
              {"metadata",
               {{"n_train", tree.metadata.n_train},
                {"feature_names", tree.metadata.feature_names},
                {"timestamp", tree.metadata.timestamp}}},
              {"positivity", positivity},
              {"nodes", nodes}};
}

inline Tree tree_from_json(const nlohmann::json& j) {
  using nlohmann::json;
  try {
    if (j.at("version").get<std::string>() != kTreeSchemaVersion) {
      throw SchemaError("unsupported tree version '" + j.at("version").get<std::string>() + "'");
    }
    Tree tree;
    tree.config = detail::config_from_json(j.at("config"));
    const auto& meta = j.at("metadata");
    tree.metadata.n_train = meta.at("n_train").get<std::size_t>();
    tree.metadata.feature_names = meta.at("feature_names").get<std::vector<std::string>>();
    tree.metadata.timestamp = meta.value("timestamp", std::string());
    if (!j.at("positivity").is_null()) {
      const auto& p = j.at("positivity");
      Cutoffs c;
      c.method = parse_positivity_method(p.at("method").get<std::string>());
      c.lo = p.at("lo").get<double>();
      c.hi = p.at("hi").get<double>();
      c.parameters = p.at("parameters").get<std::map<std::string, double>>();
      tree.cutoffs = c;
    }
    for (const auto& jn : j.at("nodes")) {
      Node nd;
      nd.id = jn.at("id").get<int>();
      nd.depth = jn.at("depth").get<int>();
      nd.n = jn.at("n").get<std::int64_t>();
      nd.n_treated = jn.at("n_treated").get<std::int64_t>();
      nd.n_control = jn.at("n_control").get<std::int64_t>();
      nd.is_violating = jn.at("violating").get<bool>();
      if (!jn.at("split").is_null()) {
        const auto& js = jn.at("split");
        Split s;
        s.feature_name = js.at("feature").get<std::string>();
        s.feature_index = js.at("feature_index").get<std::size_t>();
        s.value = js.at("value").get<double>();
        s.p_raw = js.at("p_raw").get<double>();
        s.log_p_raw = js.value("log_p_raw", std::log(s.p_raw));
        s.p_adjusted = detail::read_optional_number(js, "p_adjusted");
        s.asmd = js.at("asmd").is_string() ? kInfiniteAsmd : js.at("asmd").get<double>();
        nd.split = s;
      }
      if (!jn.at("children").is_null()) {
        const auto ch = jn.at("children").get<std::vector<int>>();
        if (ch.size() != 2) throw SchemaError("node children must be a pair");
        nd.children = std::array<int, 2>{ch[0], ch[1]};
      }
      if (!jn.at("leaf_estimate").is_null()) {
        const auto& je = jn.at("leaf_estimate");
        LeafEstimate e;
        e.mean_treated = detail::read_optional_number(je, "mean_treated");
        e.mean_control = detail::read_optional_number(je, "mean_control");
        e.effect = detail::read_optional_number(je, "effect");
        e.prevalence = je.at("prevalence").get<double>();
        if (je.contains("propensity_model") && !je.at("propensity_model").is_null()) {
          e.propensity_model = detail::model_from_json(je.at("propensity_model"));
        }
        e.propensity_model_status = je.value("propensity_model_status", std::string());
        nd.leaf_estimate = e;
      }
      tree.nodes.push_back(std::move(nd));
    }

    // structural checks
    const auto count = static_cast<int>(tree.nodes.size());
    if (count == 0) throw SchemaError("tree has no nodes");
    std::vector<int> parents(tree.nodes.size(), 0);
    for (int i = 0; i < count; ++i) {
      const auto& nd = tree.nodes[static_cast<std::size_t>(i)];
      if (nd.id != i) throw SchemaError("node ids must equal their position");
      if (nd.split.has_value() != nd.children.has_value()) throw SchemaError("node " + std::to_string(i) + ": split and children must appear together");
      if (nd.split && nd.split->feature_index >= tree.metadata.feature_names.size()) {
        throw SchemaError("node " + std::to_string(i) + ": feature index out of range");
      }
      if (nd.children) {
        for (const int c : *nd.children) {
          if (c <= i || c >= count) throw SchemaError("node " + std::to_string(i) + ": invalid child id");
          ++parents[static_cast<std::size_t>(c)];
        }
      }
    }
    if (parents[0] != 0) throw SchemaError("root must not have a parent");
    for (int i = 1; i < count; ++i) {
      if (parents[static_cast<std::size_t>(i)] != 1) throw SchemaError("node " + std::to_string(i) + " must have exactly one parent");
    }
    return tree;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed tree file: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw SchemaError(std::string("malformed tree file: ") + e.what());
  }
}

inline std::string tree_to_json_string(const Tree& tree) { return tree_to_json(tree).dump(2) + "\n"; }

inline void save_tree(const Tree& tree, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << tree_to_json_string(tree);
  if (!out) throw IoError("error while writing '" + path + "'");
}

inline Tree load_tree(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open tree file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("malformed tree file '" + path + "': " + e.what());
  }
  return tree_from_json(j);
}

/// Graphviz rendering: one box per node with its rule, size and prevalence;
/// violating leaves are filled red.
inline std::string tree_to_dot(const Tree& tree) {
  std::ostringstream out;
  out << "digraph bicause_tree {\n  node [shape=box, fontname=\"Helvetica\"];\n";
  std::vector<int> parent(tree.nodes.size(), -1);
  for (const auto& nd : tree.nodes) {
    if (nd.children) {
      parent[static_cast<std::size_t>((*nd.children)[0])] = nd.id;
      parent[static_cast<std::size_t>((*nd.children)[1])] = nd.id;
    }
  }
  char prevalence[32];
  for (const auto& nd : tree.nodes) {
    std::string rule = "root";
    if (const int p = parent[static_cast<std::size_t>(nd.id)]; p >= 0) {
      const auto& ps = *tree.nodes[static_cast<std::size_t>(p)].split;
      const bool left = (*tree.nodes[static_cast<std::size_t>(p)].children)[0] == nd.id;
      rule = ps.feature_name + (left ? " <= " : " > ") + detail::format_double(ps.value);
    }
    std::snprintf(prevalence, sizeof(prevalence), "%.3f", nd.prevalence());
    out << "  n" << nd.id << " [label=\"" << rule << "\\nn=" << nd.n << "\\nP=" << prevalence << "\"";
    if (nd.is_leaf() && nd.is_violating) out << ", style=filled, fillcolor=red";
    out << "];\n";
  }
  for (const auto& nd : tree.nodes) {
    if (nd.children) {
      out << "  n" << nd.id << " -> n" << (*nd.children)[0] << ";\n";
      out << "  n" << nd.id << " -> n" << (*nd.children)[1] << ";\n";
    }
  }
  out << "}\n";
  return out.str();
}

}  // namespace bicause
