#include "d123/sync/sync.hpp"

#include <algorithm>

#include <json.hpp>

#include "d123/error.hpp"
#include "d123/ipc/ipc_file.hpp"
#include "d123/log/log_writer.hpp"

namespace d123 {

using nlohmann::json;

std::string_view to_string(MatchMode mode) {
  switch (mode) {
    case MatchMode::exact: return "exact";
    case MatchMode::nearest: return "nearest";
    case MatchMode::forward: return "forward";
    case MatchMode::backward: return "backward";
  }
  return "nearest";
}

MatchMode match_mode_from_string(std::string_view name) {
  for (auto m : {MatchMode::exact, MatchMode::nearest, MatchMode::forward, MatchMode::backward}) {
    if (to_string(m) == name) return m;
  }
  throw Error(ErrorCode::invalid_argument, "unknown match criteria '" + std::string(name) + "'");
}

std::optional<std::size_t> match_timestamp(std::span<const TimePoint> stream, TimePoint query,
                                           const MatchCriteria& c) {
  if (c.tolerance && c.tolerance->count() < 0) throw Error(ErrorCode::invalid_argument, "negative tolerance");
  const auto lo = std::lower_bound(stream.begin(), stream.end(), query);
  const std::size_t i = static_cast<std::size_t>(lo - stream.begin());
  auto within = [&](Duration gap) { return !c.tolerance || gap <= *c.tolerance; };
  switch (c.mode) {
    case MatchMode::exact:
      if (lo != stream.end() && *lo == query) return i;
      return std::nullopt;
    case MatchMode::forward:
      if (lo != stream.end() && within(*lo - query)) return i;
      return std::nullopt;
    case MatchMode::backward: {
      const auto hi = std::upper_bound(stream.begin(), stream.end(), query);
      if (hi == stream.begin()) return std::nullopt;
      const std::size_t j = static_cast<std::size_t>(hi - stream.begin()) - 1;
      if (within(query - stream[j])) return j;
      return std::nullopt;
    }
    case MatchMode::nearest: {
      std::optional<std::size_t> best;
      if (i > 0) best = i - 1;
      if (i < stream.size() && (!best || stream[i] - query < query - stream[*best])) best = i;
      if (best && within(stream[*best] > query ? stream[*best] - query : query - stream[*best])) return best;
      return std::nullopt;
    }
  }
  return std::nullopt;
}

std::pair<std::size_t, std::size_t> window_indices(std::span<const TimePoint> stream, TimePoint t0, TimePoint t1) {
  if (t1 < t0) throw Error(ErrorCode::invalid_argument, "window end precedes start");
  const auto a = std::lower_bound(stream.begin(), stream.end(), t0);
  const auto b = std::lower_bound(a, stream.end(), t1);
  return {static_cast<std::size_t>(a - stream.begin()), static_cast<std::size_t>(b - stream.begin())};
}

SyncConfig SyncConfig::keyframes(ModalityKey reference) {
  SyncConfig c;
  c.reference = SyncReference::source_keyframes;
  c.reference_modality = std::move(reference);
  return c;
}

SyncConfig SyncConfig::resample(Duration period, ModalityKey reference) {
  SyncConfig c;
  c.reference = SyncReference::resample;
  c.period = period;
  c.reference_modality = std::move(reference);
  return c;
}

void SyncConfig::validate() const {
  if (reference == SyncReference::resample && period.count() <= 0) {
    throw Error(ErrorCode::invalid_argument, "resample period must be positive");
  }
  if (default_tolerance && default_tolerance->count() < 0) throw Error(ErrorCode::invalid_argument, "negative tolerance");
  for (const auto& [k, c] : criteria) {
    if (c.tolerance && c.tolerance->count() < 0) throw Error(ErrorCode::invalid_argument, "negative tolerance");
  }
}

MatchCriteria SyncConfig::criteria_for(const ModalityKey& key) const {
  const auto it = criteria.find(key);
  if (it != criteria.end()) return it->second;
  MatchCriteria c;
  c.tolerance = default_tolerance;
  if (!c.tolerance && reference == SyncReference::resample) c.tolerance = period;
  return c;
}

std::string SyncConfig::default_name() const {
  if (reference == SyncReference::source_keyframes) return "keyframes_" + reference_modality.name();
  return "period_" + std::to_string(period.count()) + "us";
}

std::string sync_config_to_json(const SyncConfig& c) {
  json crit = json::object();
  for (const auto& [k, m] : c.criteria) {
    json e = {{"mode", std::string(to_string(m.mode))}};
    if (m.tolerance) e["tolerance_us"] = m.tolerance->count();
    crit[k.name()] = e;
  }
  json j = {{"reference", c.reference == SyncReference::resample ? "resample" : "source_keyframes"},
            {"reference_modality", c.reference_modality.name()},
            {"period_us", c.period.count()},
            {"criteria", crit}};
  if (c.default_tolerance) j["default_tolerance_us"] = c.default_tolerance->count();
  return j.dump();
}

SyncConfig sync_config_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    SyncConfig c;
    const auto ref = j.at("reference").get<std::string>();
    if (ref != "resample" && ref != "source_keyframes") throw Error(ErrorCode::corrupt_file, "bad sync reference");
    c.reference = ref == "resample" ? SyncReference::resample : SyncReference::source_keyframes;
    const auto key = ModalityKey::parse(j.at("reference_modality").get<std::string>());
    if (!key) throw Error(ErrorCode::corrupt_file, "bad sync reference modality");
    c.reference_modality = *key;
    c.period = Duration(j.at("period_us").get<std::int64_t>());
    for (const auto& [name, e] : j.at("criteria").items()) {
      const auto k = ModalityKey::parse(name);
      if (!k) throw Error(ErrorCode::corrupt_file, "bad modality in sync criteria");
      MatchCriteria m;
      m.mode = match_mode_from_string(e.at("mode").get<std::string>());
      if (e.contains("tolerance_us")) m.tolerance = Duration(e.at("tolerance_us").get<std::int64_t>());
      c.criteria[*k] = m;
    }
    if (j.contains("default_tolerance_us")) c.default_tolerance = Duration(j.at("default_tolerance_us").get<std::int64_t>());
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::corrupt_file, std::string("sync config: ") + e.what());
  }
}

std::vector<TimePoint> resample_grid(TimePoint first, TimePoint last, Duration period) {
  if (period.count() <= 0) throw Error(ErrorCode::invalid_argument, "resample period must be positive");
  if (last < first) return {};
  const std::int64_t n = (last - first).count() / period.count() + 1;
  std::vector<TimePoint> grid;
  grid.reserve(static_cast<std::size_t>(n));
  for (std::int64_t k = 0; k < n; ++k) grid.push_back(first + k * period);
  return grid;
}

std::optional<std::int64_t> SyncTable::row(const ModalityKey& key, std::size_t frame) const {
  const auto it = columns.find(key);
  if (it == columns.end() || frame >= it->second.size()) return std::nullopt;
  return it->second[frame];
}

SyncTable build_sync_table(const std::map<ModalityKey, std::vector<TimePoint>>& streams, const SyncConfig& config) {
  config.validate();
  const auto ref = streams.find(config.reference_modality);
  if (ref == streams.end()) throw Error(ErrorCode::missing_modality, config.reference_modality.name());
  if (ref->second.empty()) throw Error(ErrorCode::empty_reference_stream, config.reference_modality.name());
  for (const auto& [k, c] : config.criteria) {
    if (!streams.count(k)) throw Error(ErrorCode::missing_modality, k.name());
  }
  SyncTable table;
  table.config = config;
  table.frame_timestamps = config.reference == SyncReference::source_keyframes
                               ? ref->second
                               : resample_grid(ref->second.front(), ref->second.back(), config.period);
  for (const auto& [key, ts] : streams) {
    const MatchCriteria c = config.criteria_for(key);
    auto& col = table.columns[key];
    col.reserve(table.frame_timestamps.size());
    for (const TimePoint t : table.frame_timestamps) {
      const auto m = match_timestamp(ts, t, c);
      col.push_back(m ? std::optional<std::int64_t>(static_cast<std::int64_t>(*m)) : std::nullopt);
    }
  }
  return table;
}

SyncTable build_sync_table(const LogHandle& log, const SyncConfig& config) {
  if (!log.has(config.reference_modality)) throw Error(ErrorCode::missing_modality, config.reference_modality.name());
  std::map<ModalityKey, std::vector<TimePoint>> streams;
  for (const auto& k : log.modalities()) streams[k] = log.timestamps(k);
  return build_sync_table(streams, config);
}

void write_sync_table(const std::filesystem::path& directory, const std::string& name, const SyncTable& table,
                      const LogMetadata& metadata) {
  ipc::Schema schema;
  schema.fields.push_back({"timestamp_us", ipc::DataType::int64(), false});
  for (const auto& [k, col] : table.columns) {
    if (col.size() != table.frame_timestamps.size()) throw Error(ErrorCode::invalid_argument, "ragged sync table");
    schema.fields.push_back({k.name(), ipc::DataType::int64(), true});
  }
  schema.metadata = {{std::string(kMetaFormatVersion), "1"},
                     {std::string(kMetaMetadata), metadata_to_json(metadata)},
                     {std::string(kMetaModality), "sync_" + name},
                     {std::string(kMetaSyncConfig), sync_config_to_json(table.config)}};
  const auto path = directory / ("sync_" + name + ".arrow");
  ipc::IpcFileWriter writer(path, schema);
  const std::size_t n = table.frame_timestamps.size();
  for (std::size_t start = 0; start < n; start += kRowGroupSize) {
    const std::size_t end = std::min(n, start + static_cast<std::size_t>(kRowGroupSize));
    std::vector<ipc::ColumnBuilder> cols;
    for (const auto& f : schema.fields) cols.emplace_back(f);
    for (std::size_t i = start; i < end; ++i) {
      cols[0].append_i64(to_micros(table.frame_timestamps[i]));
      std::size_t c = 1;
      for (const auto& [k, col] : table.columns) {
        if (col[i]) {
          cols[c].append_i64(*col[i]);
        } else {
          cols[c].append_null();
        }
        ++c;
      }
    }
    writer.write_batch(cols);
  }
  writer.finish();
}

SyncTable read_sync_table(const ipc::IpcFileReader& file) {
  const auto cfg = file.schema().metadata_value(kMetaSyncConfig);
  if (!cfg) throw Error(ErrorCode::corrupt_file, file.path().string() + ": missing sync config");
  SyncTable table;
  table.config = sync_config_from_json(*cfg);
  const auto& fields = file.schema().fields;
  if (fields.empty() || fields[0].name != "timestamp_us" || fields[0].type.id != ipc::TypeId::int64) {
    throw Error(ErrorCode::corrupt_file, file.path().string() + ": sync table lacks a timestamp column");
  }
  std::vector<std::vector<std::optional<std::int64_t>>*> cols;
  for (std::size_t c = 1; c < fields.size(); ++c) {
    const auto key = ModalityKey::parse(fields[c].name);
    if (!key || fields[c].type.id != ipc::TypeId::int64) {
      throw Error(ErrorCode::corrupt_file, file.path().string() + ": bad sync column " + fields[c].name);
    }
    cols.push_back(&table.columns[*key]);
  }
  for (std::size_t b = 0; b < file.num_batches(); ++b) {
    const auto ts = file.column(b, std::size_t{0});
    for (std::int64_t r = 0; r < ts.length(); ++r) table.frame_timestamps.push_back(from_micros(ts.i64(r)));
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const auto col = file.column(b, c + 1);
      for (std::int64_t r = 0; r < col.length(); ++r) {
        cols[c]->push_back(col.is_null(r) ? std::nullopt : std::optional<std::int64_t>(col.i64(r)));
      }
    }
  }
  return table;
}

SyncTable load_sync_table(const LogHandle& log, const std::string& name) {
  const auto file = log.sync_file(name);
  if (!file) throw Error(ErrorCode::missing_modality, "sync_" + name + " in " + log.directory().string());
  return read_sync_table(*file);
}

}  // namespace d123
