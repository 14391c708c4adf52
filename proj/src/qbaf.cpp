#include "arguq/qbaf.hpp"

#include <set>

#include <nlohmann/json.hpp>

#include "arguq/common.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace arguq::qbaf {

namespace {

constexpr int kMaxDepth = 64;  // defensive bound; real trees stop at 2

double evaluate_node(const ArgumentNode& node, StrengthResult& out, int depth) {
  if (depth > kMaxDepth) {
    throw StructureError("argument tree exceeds depth " +
                         std::to_string(kMaxDepth) +
                         "; refusing (possible cycle)");
  }
  require_unit(node.base_score, "base score");

  std::vector<double> attackers;
  std::vector<double> supporters;
  for (const ArgumentNode& child : node.children) {
    if (!child.polarity) {
      throw StructureError("non-root node '" + child.id + "' lacks a polarity");
    }
    double s = evaluate_node(child, out, depth + 1);
    (*child.polarity == Polarity::Attack ? attackers : supporters).push_back(s);
  }

  double strength = dfquad_combine(node.base_score, dfquad_aggregate(attackers),
                                   dfquad_aggregate(supporters));
  if (!out.strengths.emplace(node.id, strength).second) {
    throw StructureError("duplicate node id '" + node.id + "' in tree");
  }
  return strength;
}

}  // namespace

double dfquad_aggregate(std::span<const double> values) {
  double acc = 0.0;
  for (double v : values) {
    require_unit(v, "aggregate input");
    acc = acc + v - acc * v;
  }
  return acc;
}

double dfquad_combine(double base, double att, double sup) {
  require_unit(base, "combine base");
  require_unit(att, "combine attack strength");
  require_unit(sup, "combine support strength");
  if (att >= sup) {
    return base - base * (att - sup);
  }
  return base + (1.0 - base) * (sup - att);
}

StrengthResult evaluate_strength(const ArgumentNode& root) {
  StrengthResult result;
  result.root_strength = evaluate_node(root, result, 0);
  return result;
}

bool predict(double root_strength) {
  require_unit(root_strength, "root strength");
  return root_strength > 0.5;
}

std::vector<StrengthResult> evaluate_strength_batch(
    std::span<const ArgumentNode> roots, bool parallel) {
  std::vector<StrengthResult> results(roots.size());
  // Trees are independent, so any iteration order gives identical output.
  std::exception_ptr failure;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(roots.size()); ++i) {
    try {
      results[static_cast<std::size_t>(i)] =
          evaluate_strength(roots[static_cast<std::size_t>(i)]);
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

nlohmann::ordered_json node_to_json(const ArgumentNode& node) {
  nlohmann::ordered_json j;
  j["id"] = node.id;
  j["text"] = node.text;
  j["base_score"] = node.base_score;
  if (node.polarity) {
    j["polarity"] = *node.polarity == Polarity::Support ? "support" : "attack";
  } else {
    j["polarity"] = nullptr;
  }
  auto children = nlohmann::ordered_json::array();
  for (const ArgumentNode& child : node.children) {
    children.push_back(node_to_json(child));
  }
  j["children"] = std::move(children);
  return j;
}

ArgumentNode node_from_json(const nlohmann::json& j) {
  ArgumentNode node;
  try {
    node.id = j.at("id").get<std::string>();
    node.text = j.at("text").get<std::string>();
    node.base_score = j.at("base_score").get<double>();
    const auto& pol = j.at("polarity");
    if (!pol.is_null()) {
      auto s = pol.get<std::string>();
      if (s == "support") {
        node.polarity = Polarity::Support;
      } else if (s == "attack") {
        node.polarity = Polarity::Attack;
      } else {
        throw DataError("unknown polarity '" + s + "'");
      }
    }
    for (const auto& child : j.at("children")) {
      node.children.push_back(node_from_json(child));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed argument-tree JSON: ") + e.what());
  }
  return node;
}

nlohmann::ordered_json strengths_to_json(const StrengthResult& result) {
  nlohmann::ordered_json j;
  for (const auto& [id, s] : result.strengths) j[id] = s;
  return j;
}

}  // namespace arguq::qbaf
