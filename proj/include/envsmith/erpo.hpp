#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "envsmith/client.hpp"
#include "envsmith/rollout.hpp"

namespace envsmith {

// ---------------------------------------------------------------------------
// Binary reward statistics
//
// Rewards are exactly 0 or 1, so mean and variance are functions of two
// counts alone. Computing them that way (never by accumulation) makes every
// downstream number independent of member order, bit for bit.

struct RewardCounts {
  size_t n = 0;
  size_t ones = 0;

  void add(double reward) {
    ++n;
    if (reward == 1.0) ++ones;
  }
  double mean() const { return double(ones) / double(n); }
  double variance() const {
    double m = mean();
    return m - m * m;
  }
  bool degenerate() const { return ones == 0 || ones == n; }
};

/// Normalizes one group of binary rewards to zero mean and unit variance.
/// The two possible outputs are each computed once from the counts, so any
/// permutation of the same rewards yields the permuted advantages exactly.
inline std::vector<double> group_advantages(const std::vector<double>& rewards,
                                            double std_floor = 0.0) {
  if (rewards.size() < 2)
    throw DegenerateGroup("a group of " + std::to_string(rewards.size()) +
                          " cannot be normalized");
  RewardCounts c;
  for (double r : rewards) c.add(r);
  if (c.degenerate())
    throw DegenerateGroup(c.ones == 0 ? "all rewards in the group are 0"
                                      : "all rewards in the group are 1");
  double stddev = std::sqrt(c.variance());
  if (stddev < std_floor) stddev = std_floor;
  double up = (1.0 - c.mean()) / stddev;
  double down = (0.0 - c.mean()) / stddev;
  std::vector<double> out;
  out.reserve(rewards.size());
  for (double r : rewards) out.push_back(r == 1.0 ? up : down);
  return out;
}

struct TrajRef {
  std::string traj_id;
  double reward = 0.0;
  bool meu_ok = true;
};

struct RewardGroup {
  std::string env_id;
  std::string question_id;
  std::vector<TrajRef> members;
};

struct AdvantageRow {
  std::string env_id;
  std::string question_id;
  std::string traj_id;
  double reward = 0.0;
  double advantage = 0.0;
  bool meu_ok = true;
  size_t group_size = 0;

  json to_json() const {
    json j = json::object();
    j["env_id"] = env_id;
    j["question_id"] = question_id;
    j["traj_id"] = traj_id;
    j["reward"] = reward;
    j["advantage"] = advantage;
    j["meu_ok"] = meu_ok;
    j["group_size"] = group_size;
    return j;
  }

  static AdvantageRow from_json(const json& j) {
    AdvantageRow r;
    r.env_id = j.value("env_id", "");
    r.question_id = j.value("question_id", "");
    r.traj_id = j.value("traj_id", "");
    r.reward = j.value("reward", 0.0);
    r.advantage = j.value("advantage", 0.0);
    r.meu_ok = j.value("meu_ok", true);
    r.group_size = j.value("group_size", size_t(0));
    return r;
  }
};

inline void sort_rows(std::vector<AdvantageRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const AdvantageRow& a, const AdvantageRow& b) {
    if (a.env_id != b.env_id) return a.env_id < b.env_id;
    if (a.question_id != b.question_id) return a.question_id < b.question_id;
    return a.traj_id < b.traj_id;
  });
}

/// Environment-level normalization: each reward is centered on its own
/// question's mean, but scaled by one standard deviation pooled over every
/// reward in the environment's batch. Questions whose groups happen to be
/// uniform still contribute (their advantages are zero); only a batch with
/// no variance at all is degenerate.
inline std::vector<AdvantageRow> env_advantages(const std::vector<RewardGroup>& groups,
                                                double std_floor = 0.0) {
  RewardCounts pooled;
  for (const auto& g : groups)
    for (const auto& m : g.members) pooled.add(m.reward);
  if (pooled.n == 0) throw DegenerateEnvironment("no rewards to normalize");
  if (pooled.degenerate())
    throw DegenerateEnvironment(pooled.ones == 0 ? "every reward in the environment batch is 0"
                                                 : "every reward in the environment batch is 1");
  double stddev = std::sqrt(pooled.variance());
  if (stddev < std_floor) stddev = std_floor;

  std::vector<AdvantageRow> rows;
  for (const auto& g : groups) {
    RewardCounts qc;
    for (const auto& m : g.members) qc.add(m.reward);
    double qmean = qc.mean();
    double up = (1.0 - qmean) / stddev;
    double down = (0.0 - qmean) / stddev;
    for (const auto& m : g.members) {
      AdvantageRow r;
      r.env_id = g.env_id;
      r.question_id = g.question_id;
      r.traj_id = m.traj_id;
      r.reward = m.reward;
      r.advantage = m.reward == 1.0 ? up : down;
      r.meu_ok = m.meu_ok;
      r.group_size = g.members.size();
      rows.push_back(std::move(r));
    }
  }
  sort_rows(rows);
  return rows;
}

/// Group-level normalization applied per question; degenerate groups throw,
/// so callers filter first.
inline std::vector<AdvantageRow> grouped_advantages(const std::vector<RewardGroup>& groups,
                                                    double std_floor = 0.0) {
  std::vector<AdvantageRow> rows;
  for (const auto& g : groups) {
    std::vector<double> rewards;
    for (const auto& m : g.members) rewards.push_back(m.reward);
    std::vector<double> adv = group_advantages(rewards, std_floor);
    for (size_t i = 0; i < g.members.size(); ++i) {
      AdvantageRow r;
      r.env_id = g.env_id;
      r.question_id = g.question_id;
      r.traj_id = g.members[i].traj_id;
      r.reward = g.members[i].reward;
      r.advantage = adv[i];
      r.meu_ok = g.members[i].meu_ok;
      r.group_size = g.members.size();
      rows.push_back(std::move(r));
    }
  }
  sort_rows(rows);
  return rows;
}

/// Drops groups whose rewards are uniform (all success or all failure):
/// they carry no learning signal and would zero-divide normalization.
/// Returns the kept groups; `dropped` reports how many fell.
inline std::vector<RewardGroup> dynamic_filter(const std::vector<RewardGroup>& groups,
                                               size_t* dropped = nullptr) {
  std::vector<RewardGroup> kept;
  size_t fell = 0;
  for (const auto& g : groups) {
    RewardCounts c;
    for (const auto& m : g.members) c.add(m.reward);
    if (g.members.empty() || c.degenerate()) {
      ++fell;
      continue;
    }
    kept.push_back(g);
  }
  if (dropped) *dropped = fell;
  return kept;
}

/// Builds reward groups from finished episodes, one group per (environment,
/// task) pair, members in rollout order.
inline std::vector<RewardGroup> collect_groups(const std::vector<Trajectory>& trajectories) {
  std::vector<RewardGroup> groups;
  std::map<std::pair<std::string, std::string>, size_t> index;
  for (const auto& t : trajectories) {
    auto key = std::make_pair(t.env_id, t.task_id);
    auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(key, groups.size());
      groups.push_back({t.env_id, t.task_id, {}});
      it = index.find(key);
    }
    groups[it->second].members.push_back({t.traj_id, t.reward, t.meu_ok});
  }
  return groups;
}

// ---------------------------------------------------------------------------
// Masked clipped objective

enum class KlEstimator {
  Simple,  // rho - 1 - log(rho): nonnegative, zero at rho = 1
  NegLog,  // -log(rho)
};

inline double kl_estimate(double ratio, KlEstimator kind) {
  switch (kind) {
    case KlEstimator::Simple: return ratio - 1.0 - std::log(ratio);
    case KlEstimator::NegLog: return -std::log(ratio);
  }
  return 0.0;
}

struct ObjectiveSample {
  double ratio = 1.0;      // new policy over old policy
  double advantage = 0.0;
  bool valid = true;       // false when the user turn invalidated the episode
};

struct ObjectiveGroup {
  std::vector<ObjectiveSample> samples;
};

struct ObjectiveConfig {
  double clip_epsilon = 0.2;
  double kl_beta = 0.0;
  KlEstimator kl = KlEstimator::Simple;
};

/// Clipped surrogate with invalid samples masked out. Each group averages
/// over its valid samples only, so masking a sample is exactly equivalent
/// to deleting it; groups with nothing valid drop out of the outer mean the
/// same way. A batch with no valid sample anywhere has no objective.
inline double objective_value(const std::vector<ObjectiveGroup>& groups,
                              const ObjectiveConfig& cfg = {}) {
  double total = 0.0;
  size_t counted_groups = 0;
  for (const auto& g : groups) {
    double sum = 0.0;
    size_t valid = 0;
    for (const auto& s : g.samples) {
      if (!s.valid) continue;
      double clipped = std::clamp(s.ratio, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon);
      double surrogate = std::min(s.ratio * s.advantage, clipped * s.advantage);
      sum += surrogate - cfg.kl_beta * kl_estimate(s.ratio, cfg.kl);
      ++valid;
    }
    if (valid == 0) continue;
    total += sum / double(valid);
    ++counted_groups;
  }
  if (counted_groups == 0) throw AllMasked("every sample in the batch is masked");
  return total / double(counted_groups);
}

// ---------------------------------------------------------------------------
// Judging user turns

struct MeuVerdict {
  bool meu_ok = true;    // false: a user turn broke the episode's validity
  bool checked = false;  // false: no usable judgement was obtained
  std::string raw;
};

/// Asks the judge whether the simulated user misbehaved anywhere in the
/// conversation. "True" means it did, so the episode must not train. A
/// missing or malformed judgement leaves the episode valid but marks it
/// unchecked.
inline MeuVerdict judge_meu(const Trajectory& t, GenClient& client,
                            const std::string& prompt_template) {
  GenRequest req;
  req.stage = "meu_judge";
  req.payload = json::object();
  req.payload["conversation"] = render_context(t, ContextMode::Conversation);
  req.payload["question"] = t.question;
  req.prompt = prompt_template + "\n\nConversation:\n" +
               render_context(t, ContextMode::Conversation);
  MeuVerdict v;
  try {
    v.raw = detail::trim_copy(client.generate(req).text);
  } catch (const ClientUnavailable&) {
    return v;
  }
  if (v.raw.rfind("True", 0) == 0 || v.raw.rfind("true", 0) == 0) {
    v.checked = true;
    v.meu_ok = false;
  } else if (v.raw.rfind("False", 0) == 0 || v.raw.rfind("false", 0) == 0) {
    v.checked = true;
    v.meu_ok = true;
  }
  return v;
}

}  // namespace envsmith
