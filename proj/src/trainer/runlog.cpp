#include "aurecon/trainer/runlog.hpp"

#include <cmath>

#include "aurecon/common/error.hpp"

namespace aurecon::train {

namespace {

double lookup(const Values& values, std::string_view key) {
  for (const auto& [k, v] : values) {
    if (k == key) return v;
  }
  throw Error("run log has no value '" + std::string(key) + "'");
}

nlohmann::json values_json(const Values& values) {
  auto j = nlohmann::json::object();
  for (const auto& [k, v] : values) j[k] = v;
  return j;
}

Values values_from(const nlohmann::json& j) {
  Values out;
  for (auto it = j.begin(); it != j.end(); ++it) out.emplace_back(it.key(), it.value().get<double>());
  return out;
}

void require_finite(const Values& values, const std::string& where) {
  for (const auto& [k, v] : values) {
    if (!std::isfinite(v)) throw NonFiniteError(where + ": " + k + " is not finite");
  }
}

}  // namespace

double StepRecord::value(std::string_view key) const { return lookup(values, key); }

nlohmann::json StepRecord::to_json() const {
  return {{"type", "step"}, {"stage", stage}, {"step", step}, {"epoch", epoch}, {"lr", lr}, {"values", values_json(values)}};
}

double EpochRecord::metric(std::string_view key) const { return lookup(metrics, key); }

nlohmann::json EpochRecord::to_json() const {
  return {{"type", "epoch"},
          {"stage", stage},
          {"epoch", epoch},
          {"metrics", values_json(metrics)},
          {"checkpoint", checkpoint}};
}

RunLog::RunLog(const std::filesystem::path& path) : out_(std::make_unique<std::ofstream>(path, std::ios::trunc)) {
  if (!*out_) throw Error("cannot open run log " + path.string());
}

void RunLog::record_step(StepRecord r) {
  const std::string where = r.stage + " step " + std::to_string(r.step);
  if (r.step <= last_step_) {
    throw Error(where + " does not follow step " + std::to_string(last_step_));
  }
  if (!std::isfinite(r.lr)) throw NonFiniteError(where + ": lr is not finite");
  require_finite(r.values, where);
  last_step_ = r.step;
  write(r.to_json());
  steps_.push_back(std::move(r));
}

void RunLog::record_epoch(EpochRecord r) {
  require_finite(r.metrics, r.stage + " epoch " + std::to_string(r.epoch));
  write(r.to_json());
  epochs_.push_back(std::move(r));
  if (on_epoch_) on_epoch_(epochs_.back());
}

std::vector<double> RunLog::series(std::string_view key, std::string_view stage) const {
  std::vector<double> out;
  for (const auto& s : steps_) {
    if (stage.empty() || s.stage == stage) out.push_back(s.value(key));
  }
  return out;
}

void RunLog::write(const nlohmann::json& j) {
  if (!out_) return;
  *out_ << j.dump() << '\n';
  out_->flush();
}

RunLog RunLog::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read run log " + path.string());
  RunLog log;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.at("type") == "step") {
        log.record_step({j.at("stage").get<std::string>(), j.at("step").get<std::uint64_t>(),
                         j.at("epoch").get<std::size_t>(), j.at("lr").get<double>(), values_from(j.at("values"))});
      } else if (j.at("type") == "epoch") {
        log.record_epoch({j.at("stage").get<std::string>(), j.at("epoch").get<std::size_t>(),
                          values_from(j.at("metrics")), j.at("checkpoint").get<std::string>()});
      } else {
        throw FormatError("unknown record type");
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  return log;
}

}  // namespace aurecon::train
