#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <unistd.h>

#include "d123/analytics/analytics.hpp"
#include "d123/error.hpp"
#include "d123/ingest/convert.hpp"
#include "d123/log/json_io.hpp"
#include "d123/log/log_handle.hpp"
#include "d123/map/map_store.hpp"
#include "d123/scene/scene.hpp"
#include "d123/sync/sync.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace d123;

namespace {

int verbosity = 0;
bool json_out = false;

void note(const std::string& msg) {
  if (verbosity > 0) std::cerr << "d123: " << msg << '\n';
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::corrupt_data:
    case ErrorCode::corrupt_file:
    case ErrorCode::unsorted_timestamps:
    case ErrorCode::duplicate_modality_file:
    case ErrorCode::metadata_mismatch:
    case ErrorCode::missing_payload:
    case ErrorCode::payload_corrupt:
    case ErrorCode::malformed_wkb:
    case ErrorCode::dangling_reference:
    case ErrorCode::schema_violation:
    case ErrorCode::non_monotonic_timestamps:
    case ErrorCode::unknown_frame_tag:
      return 2;
    default:
      return 1;
  }
}

void report(std::string_view code, const std::string& message, int exit_code) {
  if (json_out) {
    std::cerr << json{{"error", {{"code", code}, {"message", message}, {"exit_code", exit_code}}}}.dump() << '\n';
  } else {
    std::cerr << "d123: error: " << message << '\n';
  }
}

// Stream name first, then sensor id ("lidar_top" names the stream lidar_lidar_top).
ModalityKey parse_modality(const std::string& name, const LogHandle& log) {
  if (name == "ego") return ModalityKey::ego_state();
  auto key = ModalityKey::parse(name);
  if (key && log.has(*key)) return *key;
  for (const auto& k : log.modalities()) {
    if (k.is_sensor() && k.sensor_id == name) return k;
  }
  if (key) return *key;
  throw Error(ErrorCode::invalid_argument, "unknown modality '" + name + "'");
}

json record_json(const LogHandle& log, const ModalityKey& key, std::int64_t row) {
  switch (key.kind) {
    case ModalityKind::ego_state: return json_io::record_to_json(log.ego_state(row));
    case ModalityKind::boxes: return json_io::record_to_json(log.boxes(row));
    case ModalityKind::traffic_lights: return json_io::record_to_json(log.traffic_lights(row));
    case ModalityKind::camera: return json_io::record_to_json(log.camera(key.sensor_id, row));
    case ModalityKind::lidar: return json_io::record_to_json(log.lidar(key.sensor_id, row));
  }
  return {};
}

double median_rate_hz(const std::vector<TimePoint>& ts) {
  if (ts.size() < 2) return 0.0;
  std::vector<std::int64_t> gaps;
  for (std::size_t i = 1; i < ts.size(); ++i) gaps.push_back((ts[i] - ts[i - 1]).count());
  const auto mid = gaps.begin() + static_cast<long>(gaps.size() / 2);
  std::nth_element(gaps.begin(), mid, gaps.end());
  double median = static_cast<double>(*mid);
  if (gaps.size() % 2 == 0) {
    median = (median + static_cast<double>(*std::max_element(gaps.begin(), mid))) / 2.0;
  }
  return 1e6 / median;
}

// ---- convert ---------------------------------------------------------------

struct ConvertArgs {
  std::string source;
  std::string format = "jsonl";
  std::string out;
  std::string mode = "self-contained";
  double interpolate_hz = 0.0;
  std::uint64_t seed = 0;
  double duration = 20.0;
  std::string ego_path = "line";
  std::string map = "straight";
  int agents = 8;
};

MapTemplate map_template(const std::string& name) {
  if (name == "none") return MapTemplate::none;
  if (name == "grid") return MapTemplate::grid;
  return MapTemplate::straight_road;
}

SyntheticScenarioConfig synthetic_config(const std::string& rig, const ConvertArgs& a) {
  SyntheticScenarioConfig c;
  c.rig = rig_preset(rig);
  c.seed = a.seed;
  c.duration_s = a.duration;
  c.ego_path = a.ego_path == "circle" ? EgoPath::circle : EgoPath::line;
  c.map = map_template(a.map);
  c.agents = a.agents;
  if (c.rig.name == "WOD-Motion") c.ego_hz = 10.0;
  return c;
}

int cmd_convert(const ConvertArgs& a) {
  ConvertOptions opt;
  opt.mode = a.mode == "external" ? StorageMode::external : StorageMode::self_contained;
  if (a.interpolate_hz > 0) opt.interpolate_boxes = seconds_to_duration(1.0 / a.interpolate_hz);
  json results = json::array();
  auto run = [&](const ParsedLog& log) {
    const auto dir = fs::path(a.out) / log.metadata.log_id;
    note("converting " + log.metadata.log_id);
    const auto r = convert(log, dir, opt);
    json rows = json::object();
    for (const auto& [k, n] : r.row_counts) rows[k.name()] = n;
    results.push_back({{"directory", r.directory.string()}, {"rows", rows}, {"map_objects", r.map_objects},
                       {"map_issues", r.map_issues}, {"sync", r.sync_name}});
    if (r.map_issues > 0) std::cerr << "d123: warning: " << r.map_issues << " unresolved map references\n";
  };
  if (a.format == "synthetic") {
    run(generate_synthetic_log(synthetic_config(a.source, a)));
  } else {
    fs::path root = a.source;
    std::optional<fs::path> fetched;
    if (a.source.find("://") != std::string::npos) {
      fetched = fs::temp_directory_path() / ("d123-fetch-" + std::to_string(::getpid()));
      fs::remove_all(*fetched);
      fetch_source(a.source, *fetched);
      root = *fetched;
    } else if (!fs::is_directory(root)) {
      throw Error(ErrorCode::io_failure, "source directory not found: " + root.string());
    }
    try {
      JsonlParser parser(root);
      const auto names = parser.log_names();
      if (names.empty()) throw Error(ErrorCode::invalid_argument, "no source logs (metadata.json) under " + root.string());
      for (const auto& n : names) run(parser.parse(n));
    } catch (...) {
      if (fetched) fs::remove_all(*fetched);
      throw;
    }
    if (fetched) fs::remove_all(*fetched);
  }
  if (json_out) {
    std::cout << results.dump(1) << '\n';
  } else {
    for (const auto& r : results) std::cout << r["directory"].get<std::string>() << '\n';
  }
  return 0;
}

int cmd_generate(const std::string& rig, const ConvertArgs& a) {
  auto c = synthetic_config(rig, a);
  auto dir = fs::path(a.out) / (c.log_id.empty() ? make_synthetic_world(c).config.log_id : c.log_id);
  generate_synthetic(c, dir);
  std::cout << dir.string() << '\n';
  return 0;
}

// ---- info ------------------------------------------------------------------

int cmd_info(const fs::path& dir) {
  const auto log = LogHandle::open(dir);
  const auto& m = log->metadata();
  json mods = json::array();
  for (const auto& key : log->modalities()) {
    const auto& ts = log->timestamps(key);
    json e{{"name", key.name()}, {"rows", ts.size()}, {"rate_hz", median_rate_hz(ts)}};
    if (!ts.empty()) {
      e["first_us"] = to_micros(ts.front());
      e["last_us"] = to_micros(ts.back());
      e["duration_s"] = to_seconds(ts.back() - ts.front());
    }
    mods.push_back(e);
  }
  json out{{"directory", dir.string()},
           {"log_id", m.log_id},
           {"dataset", m.dataset},
           {"label_space", m.label_space},
           {"map_ref", m.map_ref ? json(*m.map_ref) : json(nullptr)},
           {"cameras", json::array()},
           {"lidars", json::array()},
           {"modalities", mods},
           {"sync_tables", log->sync_names()}};
  for (const auto& [id, c] : m.cameras) out["cameras"].push_back(id);
  for (const auto& [id, l] : m.lidars) out["lidars"].push_back(id);
  if (json_out) {
    std::cout << out.dump(1) << '\n';
    return 0;
  }
  std::cout << "log " << m.log_id << "  dataset " << (m.dataset.empty() ? "-" : m.dataset) << '\n';
  if (m.map_ref) std::cout << "map " << *m.map_ref << '\n';
  std::cout << mods.size() << " modalities\n";
  for (const auto& e : mods) {
    std::printf("  %-24s %8lld rows  %8.3f Hz  %9.3f s\n", e["name"].get<std::string>().c_str(),
                static_cast<long long>(e["rows"].get<std::int64_t>()), e["rate_hz"].get<double>(),
                e.value("duration_s", 0.0));
  }
  for (const auto& s : log->sync_names()) std::cout << "sync " << s << '\n';
  return 0;
}

// ---- sync ------------------------------------------------------------------

int cmd_sync(const fs::path& dir, const std::string& reference, double rate, double tolerance_ms, std::string name) {
  const auto log = LogHandle::open(dir);
  const auto keys = log->modalities();
  if (keys.empty()) throw Error(ErrorCode::empty_reference_stream, "log has no streams: " + dir.string());
  SyncConfig config;
  if (rate > 0) {
    const auto ref = reference.empty() ? (log->has(ModalityKey::ego_state()) ? ModalityKey::ego_state() : keys.front())
                                       : parse_modality(reference, *log);
    config = SyncConfig::resample(seconds_to_duration(1.0 / rate), ref);
  } else {
    config = SyncConfig::keyframes(reference.empty() ? keyframe_reference(keys) : parse_modality(reference, *log));
  }
  if (tolerance_ms >= 0) config.default_tolerance = seconds_to_duration(tolerance_ms * 1e-3);
  config.validate();
  const auto table = build_sync_table(*log, config);
  if (name.empty()) name = config.default_name();
  write_sync_table(dir, name, table, log->metadata());
  json out{{"name", name}, {"file", (dir / ("sync_" + name + ".arrow")).string()}, {"frames", table.num_frames()},
           {"columns", json::object()}};
  for (const auto& [k, col] : table.columns) {
    out["columns"][k.name()] = std::count_if(col.begin(), col.end(), [](const auto& c) { return c.has_value(); });
  }
  if (json_out) std::cout << out.dump(1) << '\n';
  else std::cout << out["file"].get<std::string>() << "  " << table.num_frames() << " frames\n";
  return 0;
}

// ---- query -----------------------------------------------------------------

int cmd_query(const fs::path& dir, const std::string& at, const std::string& modality, const std::string& criteria,
              double tolerance_ms, const std::string& sync_name) {
  const auto log = LogHandle::open(dir);
  const auto key = parse_modality(modality, *log);
  std::int64_t row = 0;
  json out{{"modality", key.name()}};
  if (at.rfind("iter:", 0) == 0) {
    std::size_t iteration = 0;
    try {
      iteration = std::stoull(at.substr(5));
    } catch (const std::exception&) {
      throw Error(ErrorCode::invalid_argument, "bad iteration '" + at + "'");
    }
    SyncTable table;
    if (!sync_name.empty()) table = load_sync_table(*log, sync_name);
    else if (!log->sync_names().empty()) table = load_sync_table(*log, log->sync_names().front());
    else table = build_sync_table(*log, SyncConfig::keyframes(keyframe_reference(log->modalities())));
    if (iteration >= table.num_frames()) {
      throw Error(ErrorCode::iteration_out_of_range,
                  "iteration " + std::to_string(iteration) + " outside [0, " + std::to_string(table.num_frames()) + ")");
    }
    const auto cell = table.row(key, iteration);
    if (!cell) {
      throw Error(ErrorCode::no_match_within_tolerance, key.name() + " has no row at iteration " + std::to_string(iteration));
    }
    row = *cell;
    out["iteration"] = iteration;
    out["frame_timestamp_us"] = to_micros(table.frame_timestamps[iteration]);
  } else {
    std::int64_t us = 0;
    try {
      std::size_t used = 0;
      us = std::stoll(at, &used);
      if (used != at.size()) throw std::invalid_argument(at);
    } catch (const std::exception&) {
      throw Error(ErrorCode::invalid_argument, "--at expects microseconds or iter:<n>, got '" + at + "'");
    }
    MatchCriteria mc;
    mc.mode = match_mode_from_string(criteria);
    if (tolerance_ms >= 0) mc.tolerance = seconds_to_duration(tolerance_ms * 1e-3);
    const auto& ts = log->timestamps(key);
    const auto hit = match_timestamp(ts, from_micros(us), mc);
    if (!hit) throw Error(ErrorCode::no_match_within_tolerance, "no " + key.name() + " event matches " + at);
    row = static_cast<std::int64_t>(*hit);
    out["query_us"] = us;
  }
  out["row"] = row;
  out["record"] = record_json(*log, key, row);
  std::cout << out.dump(json_out ? -1 : 1) << '\n';
  return 0;
}

// ---- stats / export ----------------------------------------------------------

struct StatsArgs {
  std::string data_root;
  std::vector<std::string> splits;
  std::string out;
  std::string summary;
  std::string taxonomy;
  std::string unmapped = "other";
  unsigned threads = 1;
};

HistogramSet run_stats(const StatsArgs& a) {
  if (a.data_root.empty()) throw Error(ErrorCode::invalid_argument, "no data root (pass one or set D123_DATA_ROOT)");
  if (!fs::is_directory(a.data_root)) throw Error(ErrorCode::io_failure, "data root not found: " + a.data_root);
  const auto policy = a.unmapped == "error" ? UnmappedPolicy::error : UnmappedPolicy::other;
  auto tax = a.taxonomy.empty() ? TaxonomyMap::default_map(policy) : TaxonomyMap::from_json(a.taxonomy);
  auto splits = a.splits.empty() ? list_splits(a.data_root) : a.splits;
  std::vector<fs::path> logs;
  for (const auto& s : splits) {
    auto l = split_logs(a.data_root, s);
    logs.insert(logs.end(), l.begin(), l.end());
  }
  note("aggregating " + std::to_string(logs.size()) + " logs");
  return build_histograms(logs, tax, {}, a.threads);
}

int cmd_stats(const StatsArgs& a) {
  const auto set = run_stats(a);
  export_csv(set, a.out);
  if (!a.summary.empty()) {
    std::ofstream(a.summary) << summary_json(set) << '\n';
  }
  if (json_out) std::cout << summary_json(set) << '\n';
  else std::cout << a.out << "  " << set.tracks_processed << " tracks, " << set.samples_processed << " samples\n";
  return 0;
}

void write_ply(const PointCloud& cloud, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_failure, "cannot write " + path.string());
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty float x\nproperty float y\nproperty float z\nproperty float intensity\nend_header\n";
  out.precision(9);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    out << cloud.xyzi[4 * i] << ' ' << cloud.xyzi[4 * i + 1] << ' ' << cloud.xyzi[4 * i + 2] << ' '
        << cloud.xyzi[4 * i + 3] << '\n';
  }
}

int cmd_export(const std::string& input, const std::string& what, const std::string& out, const std::string& lidar_id,
               std::int64_t row, const StatsArgs& stats) {
  if (what == "histograms-csv") {
    auto a = stats;
    if (!input.empty()) a.data_root = input;
    a.out = out;
    return cmd_stats(a);
  }
  if (input.empty()) throw Error(ErrorCode::invalid_argument, "export needs an input path");
  if (what == "map-geojson") {
    fs::path map_path = input;
    if (fs::is_directory(input)) {
      const auto log = LogHandle::open(input);
      const auto resolved = resolve_map_path(*log, stats.data_root.empty() ? fs::path(input).parent_path().parent_path()
                                                                           : fs::path(stats.data_root));
      if (!resolved) throw Error(ErrorCode::map_unavailable, "log " + input + " has no resolvable map");
      map_path = *resolved;
    }
    const auto store = MapStore::load(map_path);
    export_geojson(*store, out);
    std::cout << out << "  " << store->size() << " objects\n";
    return 0;
  }
  // lidar-ply
  const auto log = LogHandle::open(input);
  std::string id = lidar_id;
  if (id.empty()) {
    for (const auto& k : log->modalities()) {
      if (k.kind == ModalityKind::lidar) {
        id = k.sensor_id;
        break;
      }
    }
  }
  if (id.empty() || !log->has(ModalityKey::lidar(id))) throw Error(ErrorCode::missing_modality, "no lidar stream '" + id + "'");
  const auto n = log->row_count(ModalityKey::lidar(id));
  if (row < 0 || row >= n) {
    throw Error(ErrorCode::iteration_out_of_range, "row " + std::to_string(row) + " outside [0, " + std::to_string(n) + ")");
  }
  const auto decoded = log->decode(log->lidar(id, row).payload);
  const auto* cloud = std::get_if<PointCloud>(&decoded);
  if (!cloud) throw Error(ErrorCode::codec_unsupported_for_decode, "lidar payload is not a decodable point cloud");
  write_ply(*cloud, out);
  std::cout << out << "  " << cloud->size() << " points\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"d123: multi-modal driving log toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key = value configuration file");
  app.add_flag("--json", json_out, "machine-readable output");
  app.add_flag("-v,--verbose", verbosity, "diagnostics on stderr");

  const std::vector<std::string> rigs = [] {
    std::vector<std::string> v;
    for (const auto& p : rig_presets()) v.push_back(p.name);
    return v;
  }();

  ConvertArgs conv;
  auto* convert_cmd = app.add_subcommand("convert", "convert a source into log directories");
  convert_cmd->add_option("--source", conv.source, "source dir, file:// or http:// URL, or preset name")->required();
  convert_cmd->add_option("--format", conv.format)->check(CLI::IsMember({"jsonl", "synthetic"}))->capture_default_str();
  convert_cmd->add_option("--out", conv.out, "output root; logs land in <out>/<log_id>")->required();
  convert_cmd->add_option("--mode", conv.mode)->check(CLI::IsMember({"external", "self-contained"}))->capture_default_str();
  convert_cmd->add_option("--interpolate-boxes", conv.interpolate_hz, "densify boxes to this rate (Hz)")->check(CLI::PositiveNumber);
  convert_cmd->add_option("--seed", conv.seed);
  convert_cmd->add_option("--duration", conv.duration, "synthetic duration (s)")->check(CLI::PositiveNumber);
  convert_cmd->add_option("--ego-path", conv.ego_path)->check(CLI::IsMember({"line", "circle"}));
  convert_cmd->add_option("--map", conv.map)->check(CLI::IsMember({"none", "straight", "grid"}));
  convert_cmd->add_option("--agents", conv.agents)->check(CLI::NonNegativeNumber);

  std::string gen_rig = "nuPlan";
  ConvertArgs gen;
  auto* gen_cmd = app.add_subcommand("generate", "write a synthetic JSON-lines source log");
  gen_cmd->add_option("--rig", gen_rig)->check(CLI::IsMember(rigs, CLI::ignore_case))->capture_default_str();
  gen_cmd->add_option("--out", gen.out)->required();
  gen_cmd->add_option("--seed", gen.seed);
  gen_cmd->add_option("--duration", gen.duration)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--ego-path", gen.ego_path)->check(CLI::IsMember({"line", "circle"}));
  gen_cmd->add_option("--map", gen.map)->check(CLI::IsMember({"none", "straight", "grid"}));
  gen_cmd->add_option("--agents", gen.agents)->check(CLI::NonNegativeNumber);

  std::string fetch_uri, fetch_out;
  auto* fetch_cmd = app.add_subcommand("fetch", "copy a source from a directory or URL");
  fetch_cmd->add_option("--source", fetch_uri)->required();
  fetch_cmd->add_option("--out", fetch_out)->required();

  std::string log_dir;
  auto* info_cmd = app.add_subcommand("info", "modalities, rates and metadata of a log");
  info_cmd->add_option("log_dir", log_dir)->required();

  std::string reference;
  double rate = 0, tolerance_ms = -1;
  std::string sync_name;
  auto* sync_cmd = app.add_subcommand("sync", "build and persist a sync table");
  sync_cmd->add_option("log_dir", log_dir)->required();
  sync_cmd->add_option("--reference", reference, "reference modality, e.g. lidar_top");
  sync_cmd->add_option("--rate", rate, "resample to this rate (Hz)")->check(CLI::PositiveNumber);
  sync_cmd->add_option("--tolerance-ms", tolerance_ms)->check(CLI::NonNegativeNumber);
  sync_cmd->add_option("--name", sync_name, "table name (default derived from the configuration)");

  std::string at, modality, criteria = "nearest";
  auto* query_cmd = app.add_subcommand("query", "print the record matched at a time or iteration");
  query_cmd->add_option("log_dir", log_dir)->required();
  query_cmd->add_option("--at", at, "timestamp in microseconds, or iter:<n>")->required();
  query_cmd->add_option("--modality", modality)->required();
  query_cmd->add_option("--criteria", criteria)->check(CLI::IsMember({"nearest", "exact", "forward", "backward"}));
  query_cmd->add_option("--tolerance-ms", tolerance_ms)->check(CLI::NonNegativeNumber);
  query_cmd->add_option("--sync", sync_name, "persisted sync table for iter:<n>");

  StatsArgs stats;
  auto* stats_cmd = app.add_subcommand("stats", "annotation statistics histograms");
  stats_cmd->add_option("data_root", stats.data_root)->envname("D123_DATA_ROOT");
  stats_cmd->add_option("--splits", stats.splits)->delimiter(',');
  stats_cmd->add_option("--out", stats.out)->required();
  stats_cmd->add_option("--summary", stats.summary, "JSON summary path");
  stats_cmd->add_option("--taxonomy", stats.taxonomy)->check(CLI::ExistingFile);
  stats_cmd->add_option("--unmapped", stats.unmapped)->check(CLI::IsMember({"error", "other"}));
  stats_cmd->add_option("--threads", stats.threads)->check(CLI::PositiveNumber);

  std::string input, what, out, lidar_id;
  std::int64_t row = 0;
  StatsArgs export_stats;
  auto* export_cmd = app.add_subcommand("export", "map GeoJSON, lidar PLY or histogram CSV");
  export_cmd->add_option("input", input, "log dir, map file, or data root");
  export_cmd->add_option("--what", what)->required()->check(CLI::IsMember({"map-geojson", "lidar-ply", "histograms-csv"}));
  export_cmd->add_option("--out", out)->required();
  export_cmd->add_option("--lidar", lidar_id);
  export_cmd->add_option("--row", row);
  export_cmd->add_option("--splits", export_stats.splits)->delimiter(',');
  export_cmd->add_option("--data-root", export_stats.data_root)->envname("D123_DATA_ROOT");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*convert_cmd) return cmd_convert(conv);
    if (*gen_cmd) return cmd_generate(gen_rig, gen);
    if (*fetch_cmd) {
      fetch_source(fetch_uri, fetch_out);
      std::cout << fetch_out << '\n';
      return 0;
    }
    if (*info_cmd) return cmd_info(log_dir);
    if (*sync_cmd) return cmd_sync(log_dir, reference, rate, tolerance_ms, sync_name);
    if (*query_cmd) return cmd_query(log_dir, at, modality, criteria, tolerance_ms, sync_name);
    if (*stats_cmd) return cmd_stats(stats);
    if (*export_cmd) return cmd_export(input, what, out, lidar_id, row, export_stats);
  } catch (const Error& e) {
    const int rc = exit_code_for(e.code());
    report(error_name(e.code()), e.what(), rc);
    return rc;
  } catch (const fs::filesystem_error& e) {
    report("IoFailure", e.what(), 1);
    return 1;
  } catch (const std::exception& e) {
    report("Internal", e.what(), 3);
    return 3;
  }
  return 3;
}
