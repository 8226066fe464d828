#include "lensloop/evalharness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <thread>

#include "lensloop/error.hpp"
#include "lensloop/rollout.hpp"

namespace lensloop {

using nlohmann::json;

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

std::map<int, int> EvalReport::step_histogram() const {
  std::map<int, int> out;
  for (const auto& r : per_task) ++out[r.steps];
  return out;
}

void finalize_metrics(EvalReport& report) {
  if (report.per_task.empty()) {
    report.success_rate = 0.0;
    report.avg_reward = 0.0;
    return;
  }
  std::size_t wins = 0;
  double total = 0.0;
  for (const auto& r : report.per_task) {
    wins += r.succeeded ? 1 : 0;
    total += r.reward;
  }
  const auto count = static_cast<double>(report.per_task.size());
  report.success_rate = static_cast<double>(wins) / count;
  report.avg_reward = total / count;
}

json to_json(const EvalReport& report) {
  json per_task = json::array();
  for (const auto& r : report.per_task) {
    json entry{{"task_id", r.task_id}, {"reward", r.reward}, {"steps", r.steps}, {"succeeded", r.succeeded}};
    if (!r.error.empty()) entry["error"] = r.error;
    per_task.push_back(std::move(entry));
  }
  json histogram = json::object();
  for (const auto& [steps, count] : report.step_histogram()) histogram[std::to_string(steps)] = count;
  return json{{"success_rate", report.success_rate},
              {"avg_reward", report.avg_reward},
              {"mode", to_string(report.mode)},
              {"ctx_source", report.ctx_source},
              {"split_tag", report.split_tag},
              {"per_task", std::move(per_task)},
              {"step_histogram", std::move(histogram)}};
}

std::string render_table(const EvalReport& report) {
  std::size_t width = 4;
  for (const auto& r : report.per_task) width = std::max(width, r.task_id.size());
  std::string out = pad("task", width) + "  reward  steps  ok\n";
  for (const auto& r : report.per_task) {
    out += pad(r.task_id, width) + "  " + pad(fixed(r.reward, 3), 6) + "  " + pad(std::to_string(r.steps), 5) + "  " +
           (r.succeeded ? "yes" : "no") + "\n";
  }
  out += "mode " + std::string(to_string(report.mode));
  if (!report.ctx_source.empty()) out += " (" + report.ctx_source + ")";
  out += "  success_rate " + fixed(report.success_rate, 3) + "  avg_reward " + fixed(report.avg_reward, 3) + "\n";
  return out;
}

std::string render_histogram(const EvalReport& report) {
  std::string out = "steps  tasks\n";
  for (const auto& [steps, count] : report.step_histogram()) {
    out += pad(std::to_string(steps), 5) + "  " + pad(std::to_string(count), 5) + " " + std::string(count, '#') + "\n";
  }
  return out;
}

EvalReport evaluate(std::span<const Task> tasks, const std::string& agent_backend, ContextSource* ctx,
                    const EnvironmentFactory& make_env, Gateway& gateway, const std::string& split_tag,
                    int parallelism) {
  if (tasks.empty()) throw Error(ErrorCode::ConfigError, "no tasks to evaluate");
  EvalReport report;
  report.mode = ctx ? ObservationMode::Contextualized : ObservationMode::Raw;
  report.ctx_source = ctx ? ctx->describe() : std::string();
  report.split_tag = split_tag;
  report.per_task.resize(tasks.size());

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      TaskResult& result = report.per_task[i];
      result.task_id = tasks[i].id;
      try {
        auto env = make_env(tasks[i]);
        const EpisodeResult episode = run_episode(tasks[i], *env, gateway, agent_backend, ctx, 0);
        result.reward = episode.trajectory.final_reward;
        result.steps = episode.steps;
        result.error = episode.error;
      } catch (const Error& e) {
        result.reward = 0.0;
        result.error = e.what();
      }
      result.succeeded = result.reward >= 1.0;
    }
  };
  const std::size_t threads = std::min<std::size_t>(std::max(parallelism, 1), tasks.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  finalize_metrics(report);
  return report;
}

std::vector<HeldoutStep> heldout_from_trajectories(std::span<const Trajectory> trajectories) {
  std::vector<HeldoutStep> out;
  for (const auto& traj : trajectories) {
    const std::vector<Action> actions = traj.actions();
    for (std::size_t s = 0; s < traj.steps.size(); ++s) {
      out.push_back(HeldoutStep{traj.task.instruction,
                                serialize_history(std::span<const Action>(actions.data(), s)),
                                traj.steps[s].observation.text,
                                traj.steps[s].action,
                                traj.dialect,
                                traj.domain_info,
                                StepRef{traj.id, static_cast<int>(s)}});
    }
  }
  return out;
}

std::vector<RewardCurvePoint> checkpoint_reward_curve(std::span<const std::shared_ptr<ContextSource>> checkpoints,
                                                      std::span<const HeldoutStep> steps,
                                                      const EnsembleConfig& ensemble, Gateway& gateway, int n,
                                                      double temperature) {
  if (steps.empty()) throw Error(ErrorCode::EmptyHoldout, "held-out step set is empty");
  std::vector<RewardCurvePoint> curve;
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    ContextSource& source = *checkpoints[c];
    double total = 0.0;
    for (const auto& step : steps) {
      const CtxRequest request{step.goal, step.history, step.observation, std::nullopt, step.domain_info};
      const StepContext scoring{step.goal, step.history, step.reference, step.dialect};
      int best = 0;
      try {
        for (const auto& candidate : source.sample(request, n, temperature)) {
          best = std::max(best, score_candidate(gateway, candidate, scoring, ensemble, step.ref, false).reward);
        }
      } catch (const Error& e) {
        // A checkpoint that cannot contextualize a step earns nothing there.
        if (e.code() != ErrorCode::AllUnparsable) throw;
      }
      total += best;
    }
    curve.push_back(RewardCurvePoint{static_cast<int>(c), source.describe(), total / static_cast<double>(steps.size())});
  }
  return curve;
}

json to_json(const std::vector<RewardCurvePoint>& curve) {
  json out = json::array();
  for (const auto& p : curve) {
    out.push_back(json{{"iteration", p.iteration},
                       {"checkpoint", p.checkpoint},
                       {"avg_action_matching_reward", p.avg_action_matching_reward}});
  }
  return out;
}

}  // namespace lensloop
