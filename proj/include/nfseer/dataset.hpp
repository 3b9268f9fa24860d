#pragma once

#include <nfseer/csv.hpp>
#include <nfseer/error.hpp>
#include <nfseer/mapping.hpp>
#include <nfseer/project.hpp>
#include <nfseer/rating.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace nfseer {

enum class DataFormat {
  seer_csv,      // id,source,mode,kloc,effort_pm,<PARAM...>[,staffing_complexity]
  cocomo_csv,    // id,source,mode,kloc,effort_pm,<DRIVER...>
  promise_arff,  // PROMISE repository COCOMO 81 / NASA 93 ARFF
};

inline DataFormat parse_data_format(std::string_view text) {
  const std::string key = detail::lower_ascii(detail::trim(text));
  if (key == "seer-csv" || key == "seer") return DataFormat::seer_csv;
  if (key == "cocomo-csv" || key == "cocomo") return DataFormat::cocomo_csv;
  if (key == "promise-arff" || key == "arff") return DataFormat::promise_arff;
  throw ArgumentError("unknown data format '" + std::string(text) + "' (seer-csv, cocomo-csv, promise-arff)");
}

struct RejectedRow {
  std::size_t line = 0;
  std::string id;
  std::string reason;
};

struct LoadResult {
  std::vector<ProjectRecord> records;
  std::vector<RejectedRow> rejected;
  std::vector<TransformLogEntry> transform_log;  // COCOMO inputs only
  std::size_t input_rows = 0;
};

inline constexpr std::array<std::string_view, 5> kFixedColumns{"id", "source", "mode", "kloc", "effort_pm"};
inline constexpr std::string_view kStaffingColumn = "staffing_complexity";

namespace detail {

struct CommonFields {
  std::string id;
  std::string source;
  DevelopmentMode mode = DevelopmentMode::unknown;
  double kloc = 0.0;
  double effort = 0.0;
};

inline CommonFields parse_common(const csv::Row& row, const csv::Row& header) {
  CommonFields f;
  f.id = row[csv::column_index(header, "id")];
  if (f.id.empty()) throw DataError("empty id");
  f.source = row[csv::column_index(header, "source")];
  f.mode = parse_mode(row[csv::column_index(header, "mode")]);
  f.kloc = csv::parse_double(row[csv::column_index(header, "kloc")], "kloc");
  f.effort = csv::parse_double(row[csv::column_index(header, "effort_pm")], "effort_pm");
  if (!(std::isfinite(f.effort) && f.effort > 0.0)) throw DataError("non-positive effort");
  if (!(std::isfinite(f.kloc) && f.kloc > 0.0)) throw DataError("non-positive size");
  return f;
}

inline void check_header(const csv::Table& table) {
  if (table.header.empty()) throw ParseError("missing header");
  for (std::size_t i = 0; i < kFixedColumns.size(); ++i) {
    if (i >= table.header.size() || table.header[i] != kFixedColumns[i]) {
      throw ParseError("malformed header: expected leading columns id,source,mode,kloc,effort_pm");
    }
  }
  std::set<std::string> seen;
  for (const auto& name : table.header) {
    if (name.empty()) throw ParseError("malformed header: empty column name");
    if (!seen.insert(name).second) throw ParseError("malformed header: duplicate column '" + name + "'");
  }
}

}  // namespace detail

/// Parses seer-csv text. Empty rating cells mean "not rated". When `roster` is
/// given, rating columns outside it are a schema error.
inline LoadResult parse_seer_csv(std::string_view text, const std::set<std::string>* roster = nullptr) {
  const auto table = csv::parse(text);
  detail::check_header(table);
  std::vector<std::pair<std::size_t, std::string>> params;
  std::optional<std::size_t> staffing;
  for (std::size_t c = kFixedColumns.size(); c < table.header.size(); ++c) {
    if (table.header[c] == kStaffingColumn) {
      staffing = c;
      continue;
    }
    const std::string name = upper_ascii(table.header[c]);
    if (roster && !roster->contains(name)) throw ParseError("unknown parameter column '" + table.header[c] + "'");
    params.emplace_back(c, name);
  }
  LoadResult out;
  out.input_rows = table.rows.size();
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::string id = row.empty() ? std::string{} : row[0];
    try {
      if (row.size() != table.header.size()) {
        throw DataError("expected " + std::to_string(table.header.size()) + " fields, found " +
                        std::to_string(row.size()));
      }
      const auto f = detail::parse_common(row, table.header);
      ProjectRecord record{f.id, f.source, f.mode, f.kloc, f.effort, {}, {}};
      for (const auto& [c, name] : params) {
        if (!row[c].empty()) record.ratings.emplace(name, parse_rating(row[c]));
      }
      if (staffing && !row[*staffing].empty()) {
        const double d = csv::parse_double(row[*staffing], "staffing_complexity");
        if (!(d > 0.0)) throw DataError("non-positive staffing complexity");
        record.staffing_complexity = d;
      }
      out.records.push_back(std::move(record));
    } catch (const Error& e) {
      out.rejected.push_back({table.line_numbers[i], id, e.what()});
    }
  }
  return out;
}

struct CocomoParse {
  std::vector<CocomoRecord> records;
  std::vector<RejectedRow> rejected;
  std::size_t input_rows = 0;
};

inline CocomoParse parse_cocomo_csv(std::string_view text) {
  const auto table = csv::parse(text);
  detail::check_header(table);
  CocomoParse out;
  out.input_rows = table.rows.size();
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::string id = row.empty() ? std::string{} : row[0];
    try {
      if (row.size() != table.header.size()) {
        throw DataError("expected " + std::to_string(table.header.size()) + " fields, found " +
                        std::to_string(row.size()));
      }
      const auto f = detail::parse_common(row, table.header);
      CocomoRecord record{f.id, f.source, f.mode, f.kloc, f.effort, {}};
      for (std::size_t c = kFixedColumns.size(); c < table.header.size(); ++c) {
        if (!row[c].empty()) record.drivers.emplace(upper_ascii(table.header[c]), parse_rating(row[c]));
      }
      out.records.push_back(std::move(record));
    } catch (const Error& e) {
      out.rejected.push_back({table.line_numbers[i], id, e.what()});
    }
  }
  return out;
}

/// PROMISE COCOMO ARFF (the public NASA 93 file and its siblings). Recognised
/// attributes: recordnumber/projectname (id), center (source), mode, the 15
/// COCOMO 81 drivers, equivphyskloc/kloc/loc (size) and act_effort/actual
/// (person-months). Other attributes are ignored.
inline CocomoParse parse_promise_arff(std::string_view text) {
  static const std::set<std::string> kDrivers{"RELY", "DATA", "CPLX", "TIME", "STOR", "VIRT", "TURN", "ACAP",
                                              "AEXP", "PCAP", "VEXP", "LEXP", "MODP", "TOOL", "SCED"};
  std::vector<std::string> attributes;
  CocomoParse out;
  bool in_data = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    std::string_view line = detail::trim(text.substr(pos, end == std::string_view::npos ? text.size() - pos : end - pos));
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    if (line.empty() || line.front() == '%') continue;
    if (!in_data) {
      const std::string lower = detail::lower_ascii(line);
      if (lower.starts_with("@attribute")) {
        std::string_view rest = detail::trim(line.substr(10));
        std::string name;
        if (!rest.empty() && (rest.front() == '\'' || rest.front() == '"')) {
          const char quote = rest.front();
          const auto close = rest.find(quote, 1);
          if (close == std::string_view::npos) throw ParseError("ARFF line " + std::to_string(line_no) + ": bad name");
          name = std::string(rest.substr(1, close - 1));
        } else {
          const auto space = rest.find_first_of(" \t");
          name = std::string(rest.substr(0, space));
        }
        attributes.push_back(detail::lower_ascii(name));
      } else if (lower.starts_with("@data")) {
        in_data = true;
      }
      continue;
    }
    ++out.input_rows;
    const auto row = csv::split_line(line);
    auto find = [&](std::initializer_list<std::string_view> names) -> std::optional<std::size_t> {
      for (auto n : names) {
        for (std::size_t c = 0; c < attributes.size(); ++c) {
          if (attributes[c] == n) return c;
        }
      }
      return std::nullopt;
    };
    std::string id = "row" + std::to_string(out.input_rows);
    try {
      if (row.size() != attributes.size()) throw DataError("field count does not match the attribute list");
      if (auto c = find({"recordnumber", "id", "projectname"})) id = row[*c];
      CocomoRecord record;
      record.id = id;
      if (auto c = find({"center"})) record.source = "nasa-center-" + row[*c];
      else record.source = "promise";
      if (auto c = find({"mode", "dev_mode"})) record.mode = parse_mode(row[*c]);
      const auto size_col = find({"equivphyskloc", "kloc", "loc"});
      const auto effort_col = find({"act_effort", "actual", "effort"});
      if (!size_col || !effort_col) throw ParseError("ARFF lacks size or effort attribute");
      record.size_kloc = csv::parse_double(row[*size_col], "size");
      record.actual_effort_pm = csv::parse_double(row[*effort_col], "effort");
      if (!(record.actual_effort_pm > 0.0)) throw DataError("non-positive effort");
      if (!(record.size_kloc > 0.0)) throw DataError("non-positive size");
      for (std::size_t c = 0; c < attributes.size(); ++c) {
        const std::string driver = upper_ascii(attributes[c]);
        if (kDrivers.contains(driver) && row[c] != "?" && !row[c].empty()) {
          record.drivers.emplace(driver, parse_rating(row[c]));
        }
      }
      out.records.push_back(std::move(record));
    } catch (const ParseError& e) {
      if (std::string(e.what()).starts_with("ARFF lacks")) throw;
      out.rejected.push_back({line_no, id, e.what()});
    } catch (const Error& e) {
      out.rejected.push_back({line_no, id, e.what()});
    }
  }
  if (!in_data) throw ParseError("ARFF file has no @data section");
  return out;
}

struct CocomoOptions {
  const Rosetta* rosetta = nullptr;  // set when the drivers are COCOMO 81
  const MappingTable* table = nullptr;
  TransformOptions transform;
};

/// COCOMO-rated records routed through the rating transformation. Records
/// that fail to transform are rejected with the transformation message.
inline LoadResult transform_cocomo(const CocomoParse& parsed, const CocomoOptions& options) {
  LoadResult out;
  out.input_rows = parsed.input_rows;
  out.rejected = parsed.rejected;
  const auto& table = options.table ? *options.table : default_mapping_table();
  if (parsed.records.empty()) return out;
  auto result = transform_dataset(parsed.records, options.rosetta, table, options.transform);
  out.records = std::move(result.projects);
  out.transform_log = std::move(result.log);
  for (const auto& err : result.errors) out.rejected.push_back({0, err.record_id, err.message});
  return out;
}

inline LoadResult load_projects(const std::string& path, DataFormat format, const CocomoOptions& cocomo = {},
                                const std::set<std::string>* roster = nullptr) {
  const std::string text = csv::read_file(path);
  switch (format) {
    case DataFormat::seer_csv: return parse_seer_csv(text, roster);
    case DataFormat::cocomo_csv: return transform_cocomo(parse_cocomo_csv(text), cocomo);
    case DataFormat::promise_arff: {
      CocomoOptions opts = cocomo;
      if (!opts.rosetta) opts.rosetta = &default_rosetta();
      return transform_cocomo(parse_promise_arff(text), opts);
    }
  }
  throw ArgumentError("unsupported format");
}

/// seer-csv text; rating columns are the union of rated parameters, sorted.
inline std::string format_seer_csv(const std::vector<ProjectRecord>& records) {
  std::set<std::string> params;
  bool any_staffing = false;
  for (const auto& r : records) {
    for (const auto& [name, level] : r.ratings) params.insert(name);
    any_staffing = any_staffing || r.staffing_complexity.has_value();
  }
  csv::Row header(kFixedColumns.begin(), kFixedColumns.end());
  header.insert(header.end(), params.begin(), params.end());
  if (any_staffing) header.emplace_back(kStaffingColumn);
  std::string out = csv::format_row(header);
  for (const auto& r : records) {
    csv::Row row{r.id, r.source, to_string(r.mode), csv::format_double(r.size_kloc),
                 csv::format_double(r.actual_effort_pm)};
    for (const auto& name : params) {
      const auto it = r.ratings.find(name);
      row.push_back(it == r.ratings.end() ? std::string{} : to_string(it->second));
    }
    if (any_staffing) row.push_back(r.staffing_complexity ? csv::format_double(*r.staffing_complexity) : std::string{});
    out += csv::format_row(row);
  }
  return out;
}

inline std::string format_rejections(const std::vector<RejectedRow>& rejected) {
  std::string out = "line,id,reason\n";
  for (const auto& r : rejected) out += csv::format_row({std::to_string(r.line), r.id, r.reason});
  return out;
}

// ---------------------------------------------------------------------------
// Cross-validation folds

struct FoldPlan {
  int k = 0;
  std::uint64_t seed = 0;
  std::map<std::string, int> assignments;  // record id -> fold index

  std::vector<std::size_t> fold_sizes() const {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (const auto& [id, fold] : assignments) ++sizes[static_cast<std::size_t>(fold)];
    return sizes;
  }
  friend bool operator==(const FoldPlan&, const FoldPlan&) = default;
};

/// Seeded shuffle, then round-robin assignment: fold sizes differ by at most
/// one. With `stratify_by_mode`, each development mode is shuffled on its own
/// and the groups are dealt in sequence, spreading every mode across folds.
inline FoldPlan split_kfold(const std::vector<ProjectRecord>& records, int k, std::uint64_t seed,
                            bool stratify_by_mode = false) {
  if (k < 2) throw ArgumentError("k must be at least 2");
  if (static_cast<std::size_t>(k) > records.size()) {
    throw ArgumentError("k=" + std::to_string(k) + " exceeds the " + std::to_string(records.size()) + " records");
  }
  std::set<std::string> ids;
  for (const auto& r : records) {
    if (!ids.insert(r.id).second) throw ArgumentError("duplicate record id '" + r.id + "'");
  }
  std::mt19937_64 rng(seed);
  auto shuffle = [&rng](std::vector<std::size_t>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(v[i - 1], v[j]);
    }
  };
  std::vector<std::size_t> order;
  if (stratify_by_mode) {
    std::map<DevelopmentMode, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < records.size(); ++i) groups[records[i].mode].push_back(i);
    for (auto& [mode, members] : groups) {
      shuffle(members);
      order.insert(order.end(), members.begin(), members.end());
    }
  } else {
    order.resize(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(order);
  }
  FoldPlan plan{k, seed, {}};
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    plan.assignments.emplace(records[order[pos]].id, static_cast<int>(pos % static_cast<std::size_t>(k)));
  }
  return plan;
}

}  // namespace nfseer
