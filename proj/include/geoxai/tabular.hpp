/*
 * Copyright 2026 The GeoXAI Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "geoxai/config.hpp"
#include "geoxai/error.hpp"
#include "geoxai/matrix.hpp"
#include "geoxai/rng.hpp"

namespace geoxai {

// Column roles of a spatial tabular dataset. feature_names holds every model
// input column in model order, including the g coordinate columns named in
// geo_names; those coordinates form the joint GEO player.
struct Schema {
  std::vector<std::string> feature_names;
  std::string response_name;
  std::vector<std::string> geo_names;
  std::optional<std::string> id_name;
  std::map<std::string, std::string> units;

  // Builds a schema from non-spatial feature names plus coordinates. Geo
  // columns not already listed are appended to the feature list.
  static Schema make(std::vector<std::string> features, std::string response,
                     std::vector<std::string> geo = {"lat", "lon"}) {
    Schema s;
    s.feature_names = std::move(features);
    for (const auto& name : geo)
      if (std::find(s.feature_names.begin(), s.feature_names.end(), name) ==
          s.feature_names.end())
        s.feature_names.push_back(name);
    s.response_name = std::move(response);
    s.geo_names = std::move(geo);
    s.validate();
    return s;
  }

  // Keys: features, response, geo (default "lat,lon"), id, units
  // ("name:unit, name:unit").
  static Schema from_config(const KeyValueConfig& cfg) {
    const auto features = cfg.get("features");
    const auto response = cfg.get("response");
    if (!features || features->empty())
      throw Error(ErrorCode::kInvalidSchema, "schema is missing 'features'");
    if (!response || response->empty())
      throw Error(ErrorCode::kInvalidSchema, "schema is missing 'response'");
    Schema s = make(split(*features, ','), *response,
                    split(cfg.get("geo").value_or("lat,lon"), ','));
    if (auto id = cfg.get("id"); id && !id->empty()) s.id_name = *id;
    if (auto units = cfg.get("units")) {
      for (const auto& entry : split(*units, ',')) {
        const auto colon = entry.find(':');
        if (colon == std::string::npos) continue;
        s.units[std::string(trim(entry.substr(0, colon)))] =
            std::string(trim(entry.substr(colon + 1)));
      }
    }
    s.validate();
    return s;
  }

  KeyValueConfig to_config() const {
    KeyValueConfig cfg;
    std::string features;
    for (const auto& name : feature_names)
      if (!is_geo(name)) features += (features.empty() ? "" : ",") + name;
    std::string geo;
    for (const auto& name : geo_names) geo += (geo.empty() ? "" : ",") + name;
    cfg.set("features", features);
    cfg.set("geo", geo);
    cfg.set("response", response_name);
    if (id_name) cfg.set("id", *id_name);
    if (!units.empty()) {
      std::string text;
      for (const auto& [name, unit] : units) text += (text.empty() ? "" : ",") + name + ":" + unit;
      cfg.set("units", text);
    }
    return cfg;
  }

  void validate() const {
    if (geo_names.empty())
      throw Error(ErrorCode::kInvalidSchema, "at least one geo column is required");
    std::set<std::string> seen;
    for (const auto& name : feature_names) {
      if (name.empty()) throw Error(ErrorCode::kInvalidSchema, "empty column name");
      if (!seen.insert(name).second)
        throw Error(ErrorCode::kInvalidSchema, "duplicate column name " + name);
    }
    if (seen.count(response_name))
      throw Error(ErrorCode::kInvalidSchema, "response " + response_name + " is also a feature");
    std::set<std::string> geo_seen;
    for (const auto& name : geo_names) {
      if (!seen.count(name))
        throw Error(ErrorCode::kInvalidSchema, "geo column " + name + " is not a feature");
      if (!geo_seen.insert(name).second)
        throw Error(ErrorCode::kInvalidSchema, "duplicate geo column " + name);
    }
    if (id_name && (seen.count(*id_name) || *id_name == response_name))
      throw Error(ErrorCode::kInvalidSchema, "id column overlaps a data column");
  }

  bool is_geo(const std::string& name) const {
    return std::find(geo_names.begin(), geo_names.end(), name) != geo_names.end();
  }

  std::size_t p() const { return feature_names.size(); }
  std::size_t g() const { return geo_names.size(); }

  std::size_t index_of(const std::string& name) const {
    const auto it = std::find(feature_names.begin(), feature_names.end(), name);
    if (it == feature_names.end())
      throw Error(ErrorCode::kUnknownFeature, "no feature named " + name);
    return static_cast<std::size_t>(it - feature_names.begin());
  }

  // Column indices of the coordinate columns, in geo_names order.
  std::vector<std::size_t> geo_indices() const {
    std::vector<std::size_t> out;
    for (const auto& name : geo_names) out.push_back(index_of(name));
    return out;
  }

  // Column indices of the non-spatial features, in feature order.
  std::vector<std::size_t> nonspatial_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < feature_names.size(); ++i)
      if (!is_geo(feature_names[i])) out.push_back(i);
    return out;
  }

  std::vector<std::string> nonspatial_names() const {
    std::vector<std::string> out;
    for (const auto& name : feature_names)
      if (!is_geo(name)) out.push_back(name);
    return out;
  }
};

struct Dataset {
  Schema schema;
  Matrix rows;  // n x p, columns in schema.feature_names order
  std::vector<double> response;
  std::vector<std::string> ids;
  std::size_t dropped_count = 0;

  std::size_t n() const { return rows.rows(); }
  std::size_t p() const { return rows.cols(); }

  Dataset subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.schema = schema;
    out.rows = rows.select_rows(indices);
    out.response.reserve(indices.size());
    out.ids.reserve(indices.size());
    for (const auto i : indices) {
      out.response.push_back(response[i]);
      out.ids.push_back(ids[i]);
    }
    return out;
  }
};

namespace detail {

// Splits one CSV record; supports double-quoted fields with "" escapes.
inline std::vector<std::string> split_csv_record(std::string_view line) {
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

inline bool getline_csv(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

}  // namespace detail

inline Dataset parse_csv(std::istream& in, const Schema& schema) {
  schema.validate();
  std::string line;
  std::size_t line_no = 0;
  // Leading '#' lines are comments (run_id headers).
  do {
    if (!detail::getline_csv(in, line))
      throw Error(ErrorCode::kMalformedCsv, "line 1: missing header row");
    ++line_no;
  } while (!line.empty() && line.front() == '#');
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = detail::split_csv_record(line);
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) position[std::string(trim(header[i]))] = i;

  auto column = [&](const std::string& name) {
    const auto it = position.find(name);
    if (it == position.end()) throw Error(ErrorCode::kMissingColumn, name);
    return it->second;
  };
  std::vector<std::size_t> feature_cols;
  for (const auto& name : schema.feature_names) feature_cols.push_back(column(name));
  const std::size_t response_col = column(schema.response_name);
  std::optional<std::size_t> id_col;
  if (schema.id_name) id_col = column(*schema.id_name);

  Dataset ds;
  ds.schema = schema;
  std::vector<double> values(schema.p());
  std::size_t data_row = 0;
  while (detail::getline_csv(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = detail::split_csv_record(line);
    if (fields.size() != header.size())
      throw Error(ErrorCode::kMalformedCsv,
                  "line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, found " +
                      std::to_string(fields.size()));
    const std::size_t row_index = data_row++;
    bool ok = true;
    for (std::size_t c = 0; c < feature_cols.size() && ok; ++c) {
      const auto v = parse_double(fields[feature_cols[c]]);
      ok = v && std::isfinite(*v);
      if (ok) values[c] = *v;
    }
    const auto y = ok ? parse_double(fields[response_col]) : std::nullopt;
    if (!ok || !y || !std::isfinite(*y)) {
      ++ds.dropped_count;
      continue;
    }
    ds.rows.append_row(values);
    ds.response.push_back(*y);
    ds.ids.push_back(id_col ? std::string(trim(fields[*id_col])) : std::to_string(row_index));
  }
  if (ds.response.empty())
    throw Error(ErrorCode::kEmptyAfterFiltering,
                "no usable rows (" + std::to_string(ds.dropped_count) + " dropped)");
  if (ds.rows.cols() == 0) ds.rows = Matrix(0, schema.p());
  return ds;
}

inline Dataset load_csv(const std::string& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  return parse_csv(in, schema);
}

// Shortest representation that round-trips through parse_double.
inline std::string format_double(double v) {
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), v);
  return std::string(buffer, ptr);
}

inline void write_csv(std::ostream& out, const Dataset& ds,
                      const std::string& comment = {}) {
  if (!comment.empty()) out << "# " << comment << "\n";
  out << ds.schema.id_name.value_or("id");
  for (const auto& name : ds.schema.feature_names) out << ',' << name;
  out << ',' << ds.schema.response_name << '\n';
  for (std::size_t r = 0; r < ds.n(); ++r) {
    out << ds.ids[r];
    for (const double v : ds.rows.row(r)) out << ',' << format_double(v);
    out << ',' << format_double(ds.response[r]) << '\n';
  }
}

inline void save_csv(const std::string& path, const Dataset& ds,
                     const std::string& comment = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  write_csv(out, ds, comment);
}

struct FoldPlan {
  std::size_t k = 0;
  std::vector<std::size_t> assignments;
  std::uint64_t seed = 0;

  std::vector<std::size_t> test_rows(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
      if (assignments[i] == fold) out.push_back(i);
    return out;
  }
  std::vector<std::size_t> train_rows(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
      if (assignments[i] != fold) out.push_back(i);
    return out;
  }
};

// Seeded permutation dealt round-robin into k folds, so fold sizes differ by
// at most one.
inline FoldPlan make_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2 || k > n)
    throw Error(ErrorCode::kInvalidK,
                "k=" + std::to_string(k) + " must satisfy 2 <= k <= n=" + std::to_string(n));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, "folds"));
  rng.shuffle(std::span<std::size_t>(order));
  FoldPlan plan{k, std::vector<std::size_t>(n), seed};
  for (std::size_t pos = 0; pos < n; ++pos) plan.assignments[order[pos]] = pos % k;
  return plan;
}

struct GeoSplit {
  Matrix nonspatial;
  Matrix geo;
};

inline GeoSplit split_geo(const Dataset& ds) {
  const auto ns = ds.schema.nonspatial_indices();
  const auto geo = ds.schema.geo_indices();
  return {ds.rows.select_cols(ns), ds.rows.select_cols(geo)};
}

inline Matrix reassemble(const GeoSplit& parts, const Schema& schema) {
  const auto ns = schema.nonspatial_indices();
  const auto geo = schema.geo_indices();
  const std::size_t n = std::max(parts.nonspatial.rows(), parts.geo.rows());
  Matrix out(n, schema.p());
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < ns.size(); ++c) out(r, ns[c]) = parts.nonspatial(r, c);
    for (std::size_t c = 0; c < geo.size(); ++c) out(r, geo[c]) = parts.geo(r, c);
  }
  return out;
}

}  // namespace geoxai
