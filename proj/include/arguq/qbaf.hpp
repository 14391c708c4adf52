#pragma once

// Quantitative bipolar argumentation trees and their gradual semantics.
//
// A claim sits at the root; every other node is an argument that either
// supports or attacks its parent. Each node carries a base score in [0,1]
// and the semantics folds children into a final dialectical strength per
// node, bottom-up:
//
//   aggregate(v1..vn) = probabilistic sum, 0 for an empty group
//   combine(b, att, sup):
//       b - b * (att - sup)        if att >= sup
//       b + (1 - b) * (sup - att)  otherwise
//
// The root's strength above 0.5 reads as "claim accepted"; exactly 0.5
// counts as rejected.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace arguq::qbaf {

enum class Polarity { Support, Attack };

struct ArgumentNode {
  std::string id;
  std::string text;
  double base_score = 0.5;
  // Empty for the root; every other node states its relation to the parent.
  std::optional<Polarity> polarity;
  std::vector<ArgumentNode> children;
};

struct StrengthResult {
  std::map<std::string, double> strengths;  // node id -> final strength
  double root_strength = 0.0;
};

// Probabilistic-sum aggregation: f(a, b) = a + b - a*b folded left to
// right, 0 for the empty span. Throws DomainError on values outside [0,1].
double dfquad_aggregate(std::span<const double> values);

// Moves the base score toward the winning side by the margin between the
// aggregated attack and support strengths. All inputs must lie in [0,1].
double dfquad_combine(double base, double att, double sup);

// Bottom-up evaluation of a whole tree. Throws StructureError on duplicate
// node ids or implausible depth (defensive cycle guard).
StrengthResult evaluate_strength(const ArgumentNode& root);

// Claim verdict from the root strength; strictly greater than 0.5 accepts.
bool predict(double root_strength);

// Evaluates many independent trees; with parallel=true the loop runs under
// OpenMP. Output order and every value match the serial path exactly.
std::vector<StrengthResult> evaluate_strength_batch(
    std::span<const ArgumentNode> roots, bool parallel);

// JSON layout: {"id", "text", "base_score", "polarity": "support"|"attack"|null,
// "children": [...]}. Round-trips through from_json/to_json.
nlohmann::ordered_json node_to_json(const ArgumentNode& node);
ArgumentNode node_from_json(const nlohmann::json& j);

// Flat {"<id>": strength, ...} map over every node in the tree.
nlohmann::ordered_json strengths_to_json(const StrengthResult& result);

}  // namespace arguq::qbaf
