#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "d123/log/log_handle.hpp"

namespace d123 {

enum class Category { vehicle, person, two_wheeler, obstacle, other };
enum class UnmappedPolicy { error, other };

std::string_view to_string(Category c);
Category category_from_string(std::string_view name);
inline constexpr std::array<Category, 5> kAllCategories{Category::vehicle, Category::person, Category::two_wheeler,
                                                        Category::obstacle, Category::other};

struct TaxonomyMap {
  std::string name;
  std::map<std::string, Category> entries;
  UnmappedPolicy unmapped = UnmappedPolicy::other;

  /// Built-in table covering the common source vocabularies.
  static TaxonomyMap default_map(UnmappedPolicy policy = UnmappedPolicy::other);
  /// {"name": ..., "unmapped": "error"|"other", "entries": {raw: category}}.
  static TaxonomyMap from_json(const std::filesystem::path& path);
};

/// Exact lookup, then case-insensitive. Throws UnmappedLabel under the error
/// policy.
Category map_label(const std::string& raw, const TaxonomyMap& taxonomy);

struct KinematicSample {
  TimePoint timestamp;
  double ego_distance = 0.0;           // m, xy-plane, box center to ego center
  std::optional<double> speed;         // m/s, planar
  std::optional<double> acceleration;  // m/s^2, vector magnitude, negative when opposing travel
};

struct TrackKinematics {
  std::string track_id;
  std::string raw_label;
  std::vector<KinematicSample> samples;
};

/// Derivative over irregular times from the local three-point quadratic
/// (central inside, one-sided at the ends). Two samples give the chord slope.
std::vector<Vec2> finite_difference(const std::vector<double>& t, const std::vector<Vec2>& values);
/// Second derivative from the same stencils. Needs at least three samples.
std::vector<Vec2> second_difference(const std::vector<double>& t, const std::vector<Vec2>& values);

/// `boxes` is one track in time order; ego poses are matched by nearest
/// timestamp. `center_offset` shifts ego poses forward to the vehicle center.
/// Errors: EmptyTrack, UnsortedTimestamps.
TrackKinematics track_kinematics(const std::vector<BoxRecord>& boxes, const std::vector<EgoStateRecord>& ego,
                                 double center_offset = 0.0);

/// Every track of a box stream, ordered by track id.
std::vector<TrackKinematics> log_kinematics(const LogHandle& log);

enum class Quantity { ego_distance, speed, acceleration };
std::string_view to_string(Quantity q);

struct BinSpec {
  double lo = 0.0, hi = 1.0, width = 1.0;
  std::size_t count() const;
  /// Out-of-range values land in the end bins.
  std::size_t index(double v) const;
  bool operator==(const BinSpec&) const = default;
};

struct BinsConfig {
  BinSpec distance{0.0, 200.0, 4.0};
  BinSpec speed{0.0, 40.0, 0.5};
  BinSpec acceleration{-10.0, 10.0, 0.25};
  const BinSpec& of(Quantity q) const;
};

struct Histogram {
  BinSpec bins;
  std::vector<std::uint64_t> counts;

  std::uint64_t total() const;
  /// counts / total; sums to 1 (0 for an empty histogram).
  std::vector<double> fractions() const;
  /// counts / max count, for log-scale display.
  std::vector<double> normalized() const;
  /// Upper edge of the bin where the cumulative fraction reaches p.
  double percentile(double p) const;
  /// Fraction of samples with |value| > threshold, from bin lower edges.
  double tail_mass(double threshold) const;
  bool operator==(const Histogram&) const = default;
};

using HistogramKey = std::tuple<std::string, Category, Quantity>;  // dataset, category, quantity

struct HistogramSet {
  BinsConfig bins;
  std::map<HistogramKey, Histogram> histograms;
  std::uint64_t samples_processed = 0;
  std::uint64_t tracks_processed = 0;

  void add(const std::string& dataset, Category c, Quantity q, double value);
  void add_track(const std::string& dataset, Category c, const TrackKinematics& track);
  /// Commutative, associative merge.
  void merge(const HistogramSet& other);
  const Histogram* find(const std::string& dataset, Category c, Quantity q) const;
  bool empty() const { return histograms.empty(); }
};

/// Aggregates every box track of the given logs by dataset and category.
HistogramSet build_histograms(const std::vector<std::filesystem::path>& logs, const TaxonomyMap& taxonomy,
                              const BinsConfig& bins = {}, unsigned threads = 1);

/// dataset,category,quantity,bin_lo,bin_hi,count,fraction,normalized
void export_csv(const HistogramSet& set, const std::filesystem::path& path);
/// Per dataset and category: sample counts and p50/p90/p99 per quantity.
std::string summary_json(const HistogramSet& set);

}  // namespace d123
