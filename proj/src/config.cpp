#include <fstream>
#include <sstream>

#include "handover/pipeline.hpp"

namespace handover {

namespace {

template <typename T>
void read_field(const char* block, const std::string& name, const Json& value, T& out) {
  try {
    out = value.get<T>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, std::string(block) + "." + name + ": " + e.what());
  }
}

void require_object(const Json& j, const char* block) {
  if (!j.is_object()) throw Error(ErrorCode::Parse, std::string(block) + " must be an object");
}

ChannelModel channel_from_json(const Json& j) {
  require_object(j, "channel");
  ChannelModel c;
  for (const auto& [name, value] : j.items()) {
    if (name == "local_range_m") read_field("channel", name, value, c.local_range_m);
    else if (name == "local_latency_ms") read_field("channel", name, value, c.local_latency_ms);
    else if (name == "local_loss_prob") read_field("channel", name, value, c.local_loss_prob);
    else if (name == "cell_latency_ms") read_field("channel", name, value, c.cell_latency_ms);
    else if (name == "cell_jitter_ms") read_field("channel", name, value, c.cell_jitter_ms);
    else if (name == "cell_loss_prob") read_field("channel", name, value, c.cell_loss_prob);
    else throw Error(ErrorCode::Parse, "unknown channel setting '" + name + "'");
  }
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!(c.local_range_m >= 0.0) || c.local_latency_ms < 0 || c.cell_latency_ms < 0 ||
      c.cell_jitter_ms < 0 || c.cell_jitter_ms > c.cell_latency_ms || !prob(c.local_loss_prob) ||
      !prob(c.cell_loss_prob)) {
    throw Error(ErrorCode::InvalidArgument, "channel settings out of range");
  }
  return c;
}

PipelineSettings pipeline_from_json(const Json& j) {
  require_object(j, "pipeline");
  PipelineSettings p;
  for (const auto& [name, value] : j.items()) {
    if (name == "grid_ms") read_field("pipeline", name, value, p.grid_ms);
    else if (name == "window_ms") read_field("pipeline", name, value, p.window_ms);
    else if (name == "max_gap_ms") read_field("pipeline", name, value, p.max_gap_ms);
    else if (name == "preagg_window_ms") read_field("pipeline", name, value, p.preagg_window_ms);
    else if (name == "commit_lag_ms") read_field("pipeline", name, value, p.commit_lag_ms);
    else if (name == "flush_interval_ms") read_field("pipeline", name, value, p.flush_interval_ms);
    else throw Error(ErrorCode::Parse, "unknown pipeline setting '" + name + "'");
  }
  if (p.grid_ms <= 0 || p.window_ms <= 0 || p.max_gap_ms < 0 || p.preagg_window_ms <= 0 ||
      p.commit_lag_ms < 0 || p.flush_interval_ms <= 0) {
    throw Error(ErrorCode::InvalidArgument, "pipeline settings out of range");
  }
  return p;
}

}  // namespace

DictionaryEntry dictionary_entry_from_json(const Json& j) {
  try {
    DictionaryEntry e;
    e.key = DataKey(j.at("key").get<std::string>());
    e.value_kind = parse_value_kind(j.at("value_kind").get<std::string>());
    e.unit = j.value("unit", std::string());
    e.signal_class = parse_signal_class(j.at("signal_class").get<std::string>());
    e.factor_class = parse_factor_class(j.value("factor_class", std::string("dynamic")));
    if (j.contains("calibration") && !j["calibration"].is_null()) {
      const auto& c = j["calibration"];
      e.calibration = Calibration{c.at("lo").get<double>(), c.at("hi").get<double>()};
    }
    if (j.contains("tokens")) e.tokens = j["tokens"].get<std::vector<std::string>>();
    return e;
  } catch (const Json::exception& ex) {
    throw Error(ErrorCode::Parse, std::string("dictionary entry: ") + ex.what());
  }
}

RunConfig config_from_json(const Json& j) {
  require_object(j, "config");
  RunConfig c;
  for (const auto& [name, value] : j.items()) {
    if (name == "dictionary") {
      if (!value.is_array()) throw Error(ErrorCode::Parse, "dictionary must be an array");
      for (const auto& entry : value) {
        DictionaryEntry e = dictionary_entry_from_json(entry);
        if (c.dict.contains(e.key)) {
          c.dict.replace(std::move(e));
        } else {
          c.dict.insert(std::move(e));
        }
      }
    } else if (name == "weights") {
      require_object(value, "weights");
      c.scorer = scorer_config_from_json(value, c.scorer);
    } else if (name == "scorer") {
      c.scorer = scorer_config_from_json(value, c.scorer);
    } else if (name == "channel") {
      c.channel = channel_from_json(value);
    } else if (name == "pipeline") {
      c.pipeline = pipeline_from_json(value);
    } else if (name == "scenario_params") {
      c.params = params_from_json(value, c.params);
    } else if (name == "scenario") {
      require_object(value, "scenario");
      c.scenario = value;
    } else if (name == "auth_token") {
      read_field("config", name, value, c.auth_token);
    } else if (name == "monitored_areas") {
      if (!value.is_array()) throw Error(ErrorCode::Parse, "monitored_areas must be an array");
      for (const auto& a : value) c.monitored_areas.push_back(area_from_json(a));
      check_disjoint(c.monitored_areas);
    } else {
      throw Error(ErrorCode::Parse, "unknown config section '" + name + "'");
    }
  }
  // Surface weight problems as config errors rather than at scoring time.
  BaselineScorer check(c.dict, c.scorer);
  (void)check;
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  Json j;
  try {
    j = Json::parse(buf.str());
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, "config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

ScenarioSpec resolve_scenario(int id, const RunConfig& config) {
  if (config.scenario) {
    ScenarioSpec spec = scenario_from_json(*config.scenario, config.dict);
    if (spec.id != id) {
      throw Error(ErrorCode::MalformedSpec, "config scenario has id " + std::to_string(spec.id) +
                                                ", requested " + std::to_string(id));
    }
    return spec;
  }
  return builtin_scenario(id, config.params);
}

}  // namespace handover
