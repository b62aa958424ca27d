#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <json.hpp>

#include "odflow/metrics.hpp"
#include "odflow/simulator.hpp"
#include "odflow/types.hpp"

namespace odflow {

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view field, const std::string& context) {
  double v{};
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size())
    throw InputError(context + ": cannot parse number '" + std::string(field) + "'");
  return v;
}

inline std::int64_t parse_int(std::string_view field, const std::string& context) {
  std::int64_t v{};
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size())
    throw InputError(context + ": cannot parse integer '" + std::string(field) + "'");
  return v;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

inline std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

inline std::ifstream open_reader(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_writer(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  return out;
}

inline void expect_header(std::ifstream& in, const std::string& expected,
                          const std::string& path) {
  std::string line;
  if (!std::getline(in, line))
    throw InputError("'" + path + "' is empty; expected header '" + expected + "'");
  if (strip_cr(line) != expected)
    throw InputError("'" + path + "' header is '" + line + "'; expected '" + expected + "'");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Centroids
// ---------------------------------------------------------------------------

inline void write_centroids(const std::string& path, const RegionSet& regions) {
  auto out = detail::open_writer(path);
  out << "region_id,x,y\n";
  for (Index i = 0; i < regions.size(); ++i) {
    out << regions.ids[static_cast<std::size_t>(i)] << ','
        << detail::format_double(regions.coords(i, 0)) << ','
        << detail::format_double(regions.coords(i, 1)) << '\n';
  }
}

/// Row order of the centroid file defines the canonical region index.
inline RegionSet read_centroids(const std::string& path) {
  auto in = detail::open_reader(path);
  detail::expect_header(in, "region_id,x,y", path);
  std::vector<std::string> ids;
  std::vector<std::pair<double, double>> pts;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    const auto fields = detail::split_fields(line);
    const std::string where = path + ':' + std::to_string(lineno);
    if (fields.size() != 3) throw InputError(where + ": expected 3 fields, got " +
                                             std::to_string(fields.size()));
    std::string id(fields[0]);
    if (id.empty()) throw InputError(where + ": empty region id");
    if (!seen.insert(id).second) throw InputError(where + ": duplicate region id '" + id + "'");
    const double x = detail::parse_double(fields[1], where);
    const double y = detail::parse_double(fields[2], where);
    ids.push_back(std::move(id));
    pts.emplace_back(x, y);
  }
  if (ids.empty()) throw InputError("'" + path + "' contains no regions");
  RegionSet regions;
  regions.ids = std::move(ids);
  regions.coords.resize(static_cast<Index>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    regions.coords(static_cast<Index>(i), 0) = pts[i].first;
    regions.coords(static_cast<Index>(i), 1) = pts[i].second;
  }
  return regions;
}

// ---------------------------------------------------------------------------
// Counts
// ---------------------------------------------------------------------------

/// Snapshot window: either index positions into the file's timestamp sequence
/// or an inclusive timestamp value range. At most one of the two is set.
struct TimeWindow {
  std::optional<std::pair<Index, Index>> indices;                  // inclusive
  std::optional<std::pair<std::int64_t, std::int64_t>> timestamps; // inclusive
};

struct LoadedCounts {
  CountPanel<double> panel;             // T x n over the kept regions
  RegionSet regions;                    // kept regions, centroid order preserved
  std::vector<Index> region_index;      // column -> index in the centroid file
  std::vector<std::int64_t> times;      // selected snapshot timestamps
  Index first_snapshot = 0;             // window start within the file's sequence
  std::vector<std::string> dropped;     // regions discarded for missing values
};

inline void write_counts(const std::string& path, const CountPanel<double>& N,
                         const RegionSet& regions,
                         const std::vector<std::int64_t>* times = nullptr) {
  if (N.cols() != regions.size())
    throw InputError("write_counts: panel columns must match the region set");
  if (times != nullptr && static_cast<Index>(times->size()) != N.rows())
    throw InputError("write_counts: timestamp list must match the panel rows");
  auto out = detail::open_writer(path);
  out << "region_id,timestamp,count\n";
  for (Index t = 0; t < N.rows(); ++t) {
    const std::int64_t stamp = times != nullptr ? (*times)[static_cast<std::size_t>(t)]
                                                : static_cast<std::int64_t>(t);
    for (Index i = 0; i < N.cols(); ++i) {
      out << regions.ids[static_cast<std::size_t>(i)] << ',' << stamp << ','
          << detail::format_double(N(t, i)) << '\n';
    }
  }
}

/// Pivot the long-format counts file to a T x n panel over the centroid-file
/// region order. Regions missing any value inside the selected window are
/// dropped and listed; unknown region ids and duplicate (region, timestamp)
/// rows are errors, as are non-monotone or non-uniform timestamps.
inline LoadedCounts load_counts(const std::string& path, const RegionSet& regions,
                                const TimeWindow& window = {}) {
  if (window.indices.has_value() && window.timestamps.has_value())
    throw InputError("load_counts: choose an index window or a timestamp window, not both");
  auto in = detail::open_reader(path);
  detail::expect_header(in, "region_id,timestamp,count", path);

  std::map<std::string, Index> id_to_col;
  for (Index i = 0; i < regions.size(); ++i) id_to_col[regions.ids[static_cast<std::size_t>(i)]] = i;

  std::vector<std::int64_t> stamps;                 // distinct, in appearance order
  std::map<std::int64_t, std::size_t> stamp_pos;
  std::map<std::pair<std::size_t, Index>, double> cells;
  std::set<std::string> unknown;

  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    const auto fields = detail::split_fields(line);
    const std::string where = path + ':' + std::to_string(lineno);
    if (fields.size() != 3) throw InputError(where + ": expected 3 fields, got " +
                                             std::to_string(fields.size()));
    const std::string id(fields[0]);
    const std::int64_t stamp = detail::parse_int(fields[1], where);
    const double count = detail::parse_double(fields[2], where);
    const auto it = id_to_col.find(id);
    if (it == id_to_col.end()) {
      unknown.insert(id);
      continue;
    }
    auto pos = stamp_pos.find(stamp);
    if (pos == stamp_pos.end()) {
      if (!stamps.empty() && stamp < stamps.back())
        throw InputError(where + ": timestamps out of order (" + std::to_string(stamp) +
                         " after " + std::to_string(stamps.back()) + ")");
      pos = stamp_pos.emplace(stamp, stamps.size()).first;
      stamps.push_back(stamp);
    }
    const auto key = std::make_pair(pos->second, it->second);
    if (!cells.emplace(key, count).second)
      throw InputError(where + ": duplicate row for region '" + id + "' at timestamp " +
                       std::to_string(stamp));
  }
  if (!unknown.empty()) {
    std::string msg = "'" + path + "' references regions absent from the centroid file:";
    for (const auto& id : unknown) msg += " '" + id + "'";
    throw InputError(msg);
  }
  if (stamps.size() < 2) throw InputError("'" + path + "' holds fewer than two snapshots");

  // Uniform spacing check over the full file before any windowing.
  const std::int64_t spacing = stamps[1] - stamps[0];
  if (spacing <= 0) throw InputError("'" + path + "' timestamps are not strictly increasing");
  for (std::size_t k = 2; k < stamps.size(); ++k) {
    if (stamps[k] - stamps[k - 1] != spacing)
      throw InputError("'" + path + "' timestamps are not uniformly spaced (gap at " +
                       std::to_string(stamps[k]) + ")");
  }

  std::size_t first = 0, last = stamps.size() - 1;
  if (window.indices.has_value()) {
    const auto [a, b] = *window.indices;
    if (a < 0 || b < a || static_cast<std::size_t>(b) >= stamps.size())
      throw InputError("load_counts: index window out of range");
    first = static_cast<std::size_t>(a);
    last = static_cast<std::size_t>(b);
  } else if (window.timestamps.has_value()) {
    const auto [a, b] = *window.timestamps;
    if (b < a) throw InputError("load_counts: timestamp window is empty");
    while (first < stamps.size() && stamps[first] < a) ++first;
    while (last > first && stamps[last] > b) --last;
    if (first >= stamps.size() || stamps[first] > b)
      throw InputError("load_counts: no snapshots inside the timestamp window");
  }
  const std::size_t T = last - first + 1;
  if (T < 2) throw InputError("load_counts: the selected window holds fewer than two snapshots");

  LoadedCounts loaded;
  std::vector<Index> kept;
  for (Index i = 0; i < regions.size(); ++i) {
    bool complete = true;
    for (std::size_t k = first; k <= last && complete; ++k) {
      complete = cells.count(std::make_pair(k, i)) != 0;
    }
    if (complete) {
      kept.push_back(i);
    } else {
      loaded.dropped.push_back(regions.ids[static_cast<std::size_t>(i)]);
    }
  }
  if (kept.empty()) throw InputError("load_counts: every region is missing data in the window");

  loaded.panel.resize(static_cast<Index>(T), static_cast<Index>(kept.size()));
  for (std::size_t k = first; k <= last; ++k) {
    for (std::size_t c = 0; c < kept.size(); ++c) {
      loaded.panel(static_cast<Index>(k - first), static_cast<Index>(c)) =
          cells.at(std::make_pair(k, kept[c]));
    }
  }
  loaded.regions.coords.resize(static_cast<Index>(kept.size()), 2);
  for (std::size_t c = 0; c < kept.size(); ++c) {
    loaded.regions.ids.push_back(regions.ids[static_cast<std::size_t>(kept[c])]);
    loaded.regions.coords(static_cast<Index>(c), 0) = regions.coords(kept[c], 0);
    loaded.regions.coords(static_cast<Index>(c), 1) = regions.coords(kept[c], 1);
  }
  loaded.region_index = std::move(kept);
  loaded.times.assign(stamps.begin() + static_cast<std::ptrdiff_t>(first),
                      stamps.begin() + static_cast<std::ptrdiff_t>(last + 1));
  loaded.first_snapshot = static_cast<Index>(first);
  return loaded;
}

// ---------------------------------------------------------------------------
// Flows
// ---------------------------------------------------------------------------

/// Write the active entries (members of each origin's neighbor set, diagonal
/// included) in step-major, origin-major order.
inline void write_flows(const std::string& path, const FlowTensor<double>& M,
                        const RegionSet& regions, const NeighborSets& gamma) {
  if (gamma.size() != regions.size())
    throw InputError("write_flows: neighbor sets must match the region set");
  auto out = detail::open_writer(path);
  out << "t,origin_id,dest_id,flow\n";
  for (std::size_t t = 0; t < M.size(); ++t) {
    if (M[t].rows() != regions.size() || M[t].cols() != regions.size())
      throw InputError("write_flows: flow slice shape must match the region set");
    for (Index i = 0; i < regions.size(); ++i) {
      for (Index j : gamma.members[static_cast<std::size_t>(i)]) {
        out << t << ',' << regions.ids[static_cast<std::size_t>(i)] << ','
            << regions.ids[static_cast<std::size_t>(j)] << ','
            << detail::format_double(M[t](i, j)) << '\n';
      }
    }
  }
}

struct FlowRecord {
  std::int64_t t;
  std::string origin;
  std::string dest;
  double flow;
};

inline std::vector<FlowRecord> read_flows(const std::string& path) {
  auto in = detail::open_reader(path);
  detail::expect_header(in, "t,origin_id,dest_id,flow", path);
  std::vector<FlowRecord> records;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    const auto fields = detail::split_fields(line);
    const std::string where = path + ':' + std::to_string(lineno);
    if (fields.size() != 4) throw InputError(where + ": expected 4 fields, got " +
                                             std::to_string(fields.size()));
    FlowRecord rec;
    rec.t = detail::parse_int(fields[0], where);
    rec.origin = std::string(fields[1]);
    rec.dest = std::string(fields[2]);
    rec.flow = detail::parse_double(fields[3], where);
    if (rec.t < 0) throw InputError(where + ": negative step index");
    records.push_back(std::move(rec));
  }
  return records;
}

/// Densify flow records over the region universe; steps without records stay
/// zero. Unknown region ids are errors.
inline FlowTensor<double> flows_to_tensor(const std::vector<FlowRecord>& records,
                                          const RegionSet& regions,
                                          std::optional<Index> steps = std::nullopt) {
  std::map<std::string, Index> id_to_col;
  for (Index i = 0; i < regions.size(); ++i) id_to_col[regions.ids[static_cast<std::size_t>(i)]] = i;
  Index T = steps.value_or(0);
  for (const auto& rec : records) T = std::max(T, static_cast<Index>(rec.t) + 1);
  if (T < 1) throw InputError("flows_to_tensor: no steps");
  FlowTensor<double> M(static_cast<std::size_t>(T),
                       Mat<double>::Zero(regions.size(), regions.size()));
  for (const auto& rec : records) {
    const auto oi = id_to_col.find(rec.origin);
    const auto di = id_to_col.find(rec.dest);
    if (oi == id_to_col.end()) throw InputError("flows_to_tensor: unknown origin '" + rec.origin + "'");
    if (di == id_to_col.end()) throw InputError("flows_to_tensor: unknown destination '" + rec.dest + "'");
    M[static_cast<std::size_t>(rec.t)](oi->second, di->second) = rec.flow;
  }
  return M;
}

// ---------------------------------------------------------------------------
// Parameters and scenarios (JSON)
// ---------------------------------------------------------------------------

inline nlohmann::json params_to_json(const ModelParams<double>& params, const RegionSet& regions) {
  if (params.pi.size() != regions.size() || params.s.size() != regions.size())
    throw InputError("params_to_json: parameter sizes must match the region set");
  nlohmann::json arr = nlohmann::json::array();
  for (Index i = 0; i < regions.size(); ++i) {
    arr.push_back({{"id", regions.ids[static_cast<std::size_t>(i)]},
                   {"pi", params.pi[i]},
                   {"s", params.s[i]}});
  }
  return {{"beta", params.beta}, {"regions", std::move(arr)}};
}

inline void write_params(const std::string& path, const ModelParams<double>& params,
                         const RegionSet& regions) {
  auto out = detail::open_writer(path);
  out << params_to_json(params, regions).dump(2) << '\n';
}

inline ModelParams<double> read_params(const std::string& path, const RegionSet& regions) {
  auto in = detail::open_reader(path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("'" + path + "': " + e.what());
  }
  ModelParams<double> params;
  params.beta = doc.at("beta").get<double>();
  const auto& arr = doc.at("regions");
  if (static_cast<Index>(arr.size()) != regions.size())
    throw InputError("'" + path + "': parameter entries do not match the region set");
  params.pi.resize(regions.size());
  params.s.resize(regions.size());
  for (Index i = 0; i < regions.size(); ++i) {
    const auto& entry = arr.at(static_cast<std::size_t>(i));
    if (entry.at("id").get<std::string>() != regions.ids[static_cast<std::size_t>(i)])
      throw InputError("'" + path + "': region order does not match the centroid file");
    params.pi[i] = entry.at("pi").get<double>();
    params.s[i] = entry.at("s").get<double>();
  }
  return params;
}

inline nlohmann::json scenario_to_json(const ScenarioSpec& spec) {
  nlohmann::json regions = nlohmann::json::array();
  for (Index i = 0; i < spec.regions.size(); ++i) {
    regions.push_back({{"id", spec.regions.ids[static_cast<std::size_t>(i)]},
                       {"x", spec.regions.coords(i, 0)},
                       {"y", spec.regions.coords(i, 1)}});
  }
  nlohmann::json doc;
  doc["regions"] = std::move(regions);
  doc["pi"] = std::vector<double>(spec.pi.data(), spec.pi.data() + spec.pi.size());
  doc["s"] = std::vector<double>(spec.s.data(), spec.s.data() + spec.s.size());
  doc["beta"] = spec.beta;
  doc["cutoff"] = spec.cutoff;
  doc["n0"] = std::vector<double>(spec.n0.data(), spec.n0.data() + spec.n0.size());
  doc["steps"] = spec.steps;
  doc["noise_fraction"] = spec.noise_fraction;
  doc["seed"] = spec.seed;
  return doc;
}

inline void write_scenario(const std::string& path, const ScenarioSpec& spec) {
  auto out = detail::open_writer(path);
  out << scenario_to_json(spec).dump(2) << '\n';
}

inline ScenarioSpec read_scenario(const std::string& path) {
  auto in = detail::open_reader(path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("'" + path + "': " + e.what());
  }
  ScenarioSpec spec;
  const auto& regions = doc.at("regions");
  if (regions.empty()) throw InputError("'" + path + "': scenario has no regions");
  spec.regions.coords.resize(static_cast<Index>(regions.size()), 2);
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const auto& entry = regions.at(i);
    spec.regions.ids.push_back(entry.at("id").get<std::string>());
    spec.regions.coords(static_cast<Index>(i), 0) = entry.at("x").get<double>();
    spec.regions.coords(static_cast<Index>(i), 1) = entry.at("y").get<double>();
  }
  const auto to_vec = [&](const char* key) {
    const auto vals = doc.at(key).get<std::vector<double>>();
    if (static_cast<Index>(vals.size()) != spec.regions.size())
      throw InputError("'" + path + "': '" + key + "' length does not match the regions");
    return Eigen::Map<const Vec<double>>(vals.data(), static_cast<Index>(vals.size())).eval();
  };
  spec.pi = to_vec("pi");
  spec.s = to_vec("s");
  spec.beta = doc.at("beta").get<double>();
  spec.cutoff = doc.at("cutoff").get<double>();
  spec.n0 = to_vec("n0");
  spec.steps = doc.at("steps").get<int>();
  spec.noise_fraction = doc.value("noise_fraction", 0.0);
  spec.seed = doc.at("seed").get<std::uint64_t>();
  return spec;
}

// ---------------------------------------------------------------------------
// Histogram table
// ---------------------------------------------------------------------------

/// Bin table for external plotting; the trailing overflow bucket is written
/// with an infinite upper edge.
inline void write_histogram(const std::string& path, const Histogram& hist) {
  auto out = detail::open_writer(path);
  out << "bin_lo,bin_hi,count\n";
  const std::size_t nbins = hist.edges.size() - 1;
  for (std::size_t b = 0; b < nbins; ++b) {
    out << detail::format_double(hist.edges[b]) << ',' << detail::format_double(hist.edges[b + 1])
        << ',' << hist.counts[b] << '\n';
  }
  out << detail::format_double(hist.edges[nbins]) << ",inf," << hist.counts[nbins] << '\n';
}

}  // namespace odflow
