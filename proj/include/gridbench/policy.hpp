#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "gridbench/grid_env.hpp"
#include "gridbench/llm_gateway.hpp"
#include "gridbench/observation.hpp"
#include "gridbench/prompt_contract.hpp"

namespace gridbench {

// Identity recorded in trace headers.
struct PolicyInfo {
  std::string kind;  // "random", "scripted", "oracle", "llm"
  std::string model;     // row label in reports
  std::string endpoint;  // base URL, or mock:<model id>
  std::string template_hash;
  std::string template_version;
  std::optional<Regime> regime;
};

// A policy only ever sees the ObservationContext. Any memory it keeps belongs to a
// single episode; construct a fresh instance per episode.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual ActionDecision decide(const ObservationContext& ctx) = 0;
  virtual PolicyInfo describe() const = 0;
};

class RandomPolicy final : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t seed);
  ActionDecision decide(const ObservationContext& ctx) override;
  PolicyInfo describe() const override;

 private:
  std::mt19937_64 rng_;
};

class ScriptedPolicy final : public Policy {
 public:
  // Throws std::invalid_argument on an empty sequence. Past the end the policy
  // answers Failed, unless `cycle` is set.
  explicit ScriptedPolicy(std::vector<Action> actions, bool cycle = false);
  ActionDecision decide(const ObservationContext& ctx) override;
  PolicyInfo describe() const override;

 private:
  std::vector<Action> actions_;
  bool cycle_;
  std::size_t next_ = 0;
};

// Follows the BFS witness from the map's start to its goal. Throws MapError(MissingGoal)
// without a goal and OracleError when the goal is unreachable.
class OraclePolicy final : public Policy {
 public:
  explicit OraclePolicy(const GridMap& map);
  ActionDecision decide(const ObservationContext& ctx) override;
  PolicyInfo describe() const override;

  const std::vector<Coord>& witness() const { return witness_; }

 private:
  std::vector<Coord> witness_;
};

class LlmPolicy final : public Policy {
 public:
  LlmPolicy(std::shared_ptr<LlmGateway> gateway, std::shared_ptr<const PromptTemplate> tmpl,
            int max_rejections = kDefaultMaxRejections);
  ActionDecision decide(const ObservationContext& ctx) override;
  PolicyInfo describe() const override;

 private:
  std::shared_ptr<LlmGateway> gateway_;
  std::shared_ptr<const PromptTemplate> template_;
  int max_rejections_;
};

}  // namespace gridbench
