#include "d123/analytics/analytics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>

#include "d123/error.hpp"
#include "d123/geom/vehicle.hpp"

namespace d123 {

namespace fs = std::filesystem;

std::string_view to_string(Category c) {
  switch (c) {
    case Category::vehicle: return "vehicle";
    case Category::person: return "person";
    case Category::two_wheeler: return "two_wheeler";
    case Category::obstacle: return "obstacle";
    case Category::other: return "other";
  }
  return "other";
}

Category category_from_string(std::string_view name) {
  for (auto c : kAllCategories) {
    if (to_string(c) == name) return c;
  }
  throw Error(ErrorCode::invalid_argument, "unknown category '" + std::string(name) + "'");
}

std::string_view to_string(Quantity q) {
  switch (q) {
    case Quantity::ego_distance: return "ego_distance";
    case Quantity::speed: return "speed";
    case Quantity::acceleration: return "acceleration";
  }
  return "";
}

TaxonomyMap TaxonomyMap::default_map(UnmappedPolicy policy) {
  TaxonomyMap t;
  t.name = "default";
  t.unmapped = policy;
  const std::pair<Category, std::vector<const char*>> table[] = {
      {Category::vehicle,
       {"car", "truck", "bus", "van", "trailer", "vehicle", "regular_vehicle", "large_vehicle", "box_truck", "truck_cab",
        "school_bus", "articulated_bus", "construction_vehicle", "emergency_vehicle", "tram", "train", "vehicle.car",
        "vehicle.truck", "vehicle.bus.rigid", "vehicle.bus.bendy", "vehicle.trailer", "vehicle.construction",
        "vehicle.emergency.police", "vehicle.emergency.ambulance", "type_vehicle"}},
      {Category::person,
       {"pedestrian", "person", "child", "human", "official_signaler", "human.pedestrian.adult", "human.pedestrian.child",
        "human.pedestrian.construction_worker", "human.pedestrian.police_officer", "human.pedestrian.wheelchair",
        "human.pedestrian.stroller", "human.pedestrian.personal_mobility", "type_pedestrian"}},
      {Category::two_wheeler,
       {"bicycle", "motorcycle", "cyclist", "bicyclist", "motorcyclist", "moped", "scooter", "wheeled_rider",
        "vehicle.bicycle", "vehicle.motorcycle", "type_cyclist"}},
      {Category::obstacle,
       {"traffic_cone", "barrier", "sign", "bollard", "construction_cone", "construction_barrel", "stop_sign",
        "message_board_trailer", "mobile_pedestrian_crossing_sign", "movable_object.trafficcone",
        "movable_object.barrier", "movable_object.debris", "static_object.bicycle_rack", "czone_sign", "type_sign"}},
      {Category::other, {"animal", "dog", "stroller", "wheelchair", "animal.dog", "type_other", "unknown"}},
  };
  for (const auto& [c, names] : table) {
    for (const char* n : names) t.entries[n] = c;
  }
  return t;
}

TaxonomyMap TaxonomyMap::from_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_failure, "cannot read taxonomy " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    TaxonomyMap t;
    t.name = j.value("name", path.stem().string());
    const std::string policy = j.value("unmapped", std::string("other"));
    if (policy == "error") t.unmapped = UnmappedPolicy::error;
    else if (policy == "other") t.unmapped = UnmappedPolicy::other;
    else throw Error(ErrorCode::invalid_argument, "unmapped policy must be 'error' or 'other'");
    for (const auto& [raw, cat] : j.at("entries").items()) t.entries[raw] = category_from_string(cat.get<std::string>());
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::corrupt_file, path.string() + ": " + e.what());
  }
}

Category map_label(const std::string& raw, const TaxonomyMap& taxonomy) {
  if (auto it = taxonomy.entries.find(raw); it != taxonomy.entries.end()) return it->second;
  std::string lower = raw;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (auto it = taxonomy.entries.find(lower); it != taxonomy.entries.end()) return it->second;
  if (taxonomy.unmapped == UnmappedPolicy::error) {
    throw Error(ErrorCode::unmapped_label, "label '" + raw + "' has no entry in taxonomy '" + taxonomy.name + "'");
  }
  return Category::other;
}

namespace {

// Weights of the quadratic through (a, b, c) for the derivative at x.
std::array<double, 3> first_weights(double a, double b, double c, double x) {
  return {((x - b) + (x - c)) / ((a - b) * (a - c)), ((x - a) + (x - c)) / ((b - a) * (b - c)),
          ((x - a) + (x - b)) / ((c - a) * (c - b))};
}

}  // namespace

std::vector<Vec2> finite_difference(const std::vector<double>& t, const std::vector<Vec2>& v) {
  const std::size_t n = t.size();
  if (n < 2 || v.size() != n) throw Error(ErrorCode::invalid_argument, "finite difference needs two matching samples");
  std::vector<Vec2> d(n);
  if (n == 2) {
    d[0] = d[1] = (v[1] - v[0]) / (t[1] - t[0]);
    return d;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = std::clamp<std::size_t>(i, 1, n - 2);
    const auto w = first_weights(t[j - 1], t[j], t[j + 1], t[i]);
    d[i] = w[0] * v[j - 1] + w[1] * v[j] + w[2] * v[j + 1];
  }
  return d;
}

std::vector<Vec2> second_difference(const std::vector<double>& t, const std::vector<Vec2>& v) {
  const std::size_t n = t.size();
  if (n < 3 || v.size() != n) throw Error(ErrorCode::invalid_argument, "second difference needs three matching samples");
  std::vector<Vec2> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = std::clamp<std::size_t>(i, 1, n - 2);
    const double h1 = t[j] - t[j - 1], h2 = t[j + 1] - t[j];
    d[i] = 2.0 * (v[j - 1] / (h1 * (h1 + h2)) - v[j] / (h1 * h2) + v[j + 1] / (h2 * (h1 + h2)));
  }
  return d;
}

TrackKinematics track_kinematics(const std::vector<BoxRecord>& boxes, const std::vector<EgoStateRecord>& ego,
                                 double center_offset) {
  if (boxes.empty()) throw Error(ErrorCode::empty_track, "track without records");
  TrackKinematics out;
  out.track_id = boxes.front().track_id;
  out.raw_label = boxes.front().raw_label;
  std::vector<double> t;
  std::vector<Vec2> p;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (i > 0 && boxes[i].timestamp <= boxes[i - 1].timestamp) {
      throw Error(ErrorCode::unsorted_timestamps, "track " + out.track_id + " is not strictly time-ordered");
    }
    KinematicSample s;
    s.timestamp = boxes[i].timestamp;
    const Vec2 c = boxes[i].pose.translation().head<2>();
    if (!ego.empty()) {
      auto it = std::lower_bound(ego.begin(), ego.end(), s.timestamp,
                                 [](const EgoStateRecord& r, TimePoint q) { return r.timestamp < q; });
      if (it == ego.end() || (it != ego.begin() && s.timestamp - (it - 1)->timestamp <= it->timestamp - s.timestamp)) --it;
      const Vec3 ego_center = it->pose.apply(Vec3(center_offset, 0.0, 0.0));
      s.ego_distance = (c - ego_center.head<2>()).norm();
    }
    out.samples.push_back(s);
    t.push_back(to_seconds(s.timestamp - boxes[0].timestamp));
    p.push_back(c);
  }
  if (boxes.size() < 2) return out;
  const auto vel = finite_difference(t, p);
  for (std::size_t i = 0; i < boxes.size(); ++i) out.samples[i].speed = vel[i].norm();
  if (boxes.size() < 3) return out;
  const auto acc = second_difference(t, p);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const double mag = acc[i].norm();
    out.samples[i].acceleration = acc[i].dot(vel[i]) < 0.0 ? -mag : mag;
  }
  return out;
}

std::vector<TrackKinematics> log_kinematics(const LogHandle& log) {
  std::vector<TrackKinematics> out;
  if (!log.has(ModalityKey::boxes())) return out;
  std::map<std::string, std::vector<BoxRecord>> tracks;
  const auto boxes = log.read_stream(ModalityKey::boxes());
  for (const auto& f : std::get<std::vector<BoxFrame>>(boxes.rows)) {
    for (const auto& b : f.boxes) tracks[b.track_id].push_back(b);
  }
  std::vector<EgoStateRecord> ego;
  if (log.has(ModalityKey::ego_state())) ego = std::get<std::vector<EgoStateRecord>>(log.read_stream(ModalityKey::ego_state()).rows);
  double offset = 0.0;
  try {
    offset = pose_at_reference(SE3(), log.metadata().vehicle, ReferencePoint::center).translation().x();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::unknown_origin) throw;
  }
  for (const auto& [id, recs] : tracks) out.push_back(track_kinematics(recs, ego, offset));
  return out;
}

std::size_t BinSpec::count() const { return static_cast<std::size_t>(std::max<long long>(1, std::llround((hi - lo) / width))); }

std::size_t BinSpec::index(double v) const {
  const double k = std::floor((v - lo) / width);
  if (!(k > 0)) return 0;
  return std::min(count() - 1, static_cast<std::size_t>(k));
}

const BinSpec& BinsConfig::of(Quantity q) const {
  switch (q) {
    case Quantity::ego_distance: return distance;
    case Quantity::speed: return speed;
    case Quantity::acceleration: return acceleration;
  }
  return distance;
}

std::uint64_t Histogram::total() const {
  std::uint64_t s = 0;
  for (auto c : counts) s += c;
  return s;
}

std::vector<double> Histogram::fractions() const {
  const double t = static_cast<double>(total());
  std::vector<double> out(counts.size(), 0.0);
  if (t > 0) {
    for (std::size_t i = 0; i < counts.size(); ++i) out[i] = static_cast<double>(counts[i]) / t;
  }
  return out;
}

std::vector<double> Histogram::normalized() const {
  const double m = counts.empty() ? 0.0 : static_cast<double>(*std::max_element(counts.begin(), counts.end()));
  std::vector<double> out(counts.size(), 0.0);
  if (m > 0) {
    for (std::size_t i = 0; i < counts.size(); ++i) out[i] = static_cast<double>(counts[i]) / m;
  }
  return out;
}

double Histogram::percentile(double p) const {
  const double t = static_cast<double>(total());
  double acc = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    acc += static_cast<double>(counts[i]);
    if (t > 0 && acc / t >= p) return bins.lo + bins.width * static_cast<double>(i + 1);
  }
  return bins.hi;
}

double Histogram::tail_mass(double threshold) const {
  const double t = static_cast<double>(total());
  if (t == 0) return 0.0;
  double tail = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double lo = bins.lo + bins.width * static_cast<double>(i), hi = lo + bins.width;
    if (lo >= threshold || hi <= -threshold) tail += static_cast<double>(counts[i]);
  }
  return tail / t;
}

void HistogramSet::add(const std::string& dataset, Category c, Quantity q, double value) {
  auto [it, fresh] = histograms.try_emplace({dataset, c, q});
  if (fresh) {
    it->second.bins = bins.of(q);
    it->second.counts.assign(it->second.bins.count(), 0);
  }
  ++it->second.counts[it->second.bins.index(value)];
}

void HistogramSet::add_track(const std::string& dataset, Category c, const TrackKinematics& track) {
  ++tracks_processed;
  for (const auto& s : track.samples) {
    ++samples_processed;
    add(dataset, c, Quantity::ego_distance, s.ego_distance);
    if (s.speed) add(dataset, c, Quantity::speed, *s.speed);
    if (s.acceleration) add(dataset, c, Quantity::acceleration, *s.acceleration);
  }
}

void HistogramSet::merge(const HistogramSet& other) {
  for (const auto& [key, h] : other.histograms) {
    auto [it, fresh] = histograms.try_emplace(key, h);
    if (fresh) continue;
    for (std::size_t i = 0; i < h.counts.size(); ++i) it->second.counts[i] += h.counts[i];
  }
  samples_processed += other.samples_processed;
  tracks_processed += other.tracks_processed;
}

const Histogram* HistogramSet::find(const std::string& dataset, Category c, Quantity q) const {
  auto it = histograms.find({dataset, c, q});
  return it == histograms.end() ? nullptr : &it->second;
}

HistogramSet build_histograms(const std::vector<fs::path>& logs, const TaxonomyMap& taxonomy, const BinsConfig& bins,
                              unsigned threads) {
  auto one = [&](const fs::path& dir) {
    HistogramSet part;
    part.bins = bins;
    const auto log = LogHandle::open(dir);
    for (const auto& track : log_kinematics(*log)) {
      part.add_track(log->metadata().dataset, map_label(track.raw_label, taxonomy), track);
    }
    return part;
  };
  HistogramSet out;
  out.bins = bins;
  threads = std::max(1u, threads);
  for (std::size_t start = 0; start < logs.size(); start += threads) {
    std::vector<std::future<HistogramSet>> parts;
    for (std::size_t i = start; i < std::min(logs.size(), start + threads); ++i) {
      parts.push_back(std::async(threads == 1 ? std::launch::deferred : std::launch::async, one, logs[i]));
    }
    for (auto& p : parts) out.merge(p.get());
  }
  return out;
}

void export_csv(const HistogramSet& set, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_failure, "cannot write " + path.string());
  out << "dataset,category,quantity,bin_lo,bin_hi,count,fraction,normalized\n";
  out.precision(10);
  for (const auto& [key, h] : set.histograms) {
    const auto& [dataset, cat, q] = key;
    const auto frac = h.fractions();
    const auto norm = h.normalized();
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
      const double lo = h.bins.lo + h.bins.width * static_cast<double>(i);
      out << dataset << ',' << to_string(cat) << ',' << to_string(q) << ',' << lo << ',' << lo + h.bins.width << ','
          << h.counts[i] << ',' << frac[i] << ',' << norm[i] << '\n';
    }
  }
  if (!out) throw Error(ErrorCode::io_failure, "write failed for " + path.string());
}

std::string summary_json(const HistogramSet& set) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, h] : set.histograms) {
    const auto& [dataset, cat, q] = key;
    j[dataset][std::string(to_string(cat))][std::string(to_string(q))] = {
        {"count", h.total()}, {"p50", h.percentile(0.5)}, {"p90", h.percentile(0.9)}, {"p99", h.percentile(0.99)}};
  }
  nlohmann::json out{{"samples", set.samples_processed}, {"tracks", set.tracks_processed}, {"datasets", j}};
  return out.dump(1);
}

}  // namespace d123
