#pragma once

#include <nfseer/csv.hpp>
#include <nfseer/error.hpp>
#include <nfseer/project.hpp>
#include <nfseer/rating.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace nfseer {

inline std::string upper_ascii(std::string_view text) {
  std::string out(detail::trim(text));
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
  return out;
}

// One printed line of the SEER <- COCOMO rating table. Either side may be
// empty: an empty cocomo side is a SEER level unreachable from COCOMO data, an
// empty seer side is a COCOMO rating without a SEER counterpart.
struct MappingRow {
  std::string seer_param;
  std::vector<RatingLevel> seer_levels;
  std::string cocomo_driver;
  std::vector<RatingLevel> cocomo_levels;

  friend bool operator==(const MappingRow&, const MappingRow&) = default;
};

struct MappingTable {
  std::vector<MappingRow> rows;

  friend bool operator==(const MappingTable&, const MappingTable&) = default;

  /// Parameters in first-appearance order.
  std::vector<std::string> seer_parameters() const {
    std::vector<std::string> out;
    for (const auto& row : rows) {
      if (std::find(out.begin(), out.end(), row.seer_param) == out.end()) out.push_back(row.seer_param);
    }
    return out;
  }

  /// Every SEER level printed for a parameter, ascending.
  std::vector<RatingLevel> seer_levels(std::string_view param) const {
    std::vector<RatingLevel> out;
    for (const auto& row : rows) {
      if (row.seer_param != param) continue;
      for (const auto& level : row.seer_levels) {
        if (std::find(out.begin(), out.end(), level) == out.end()) out.push_back(level);
      }
    }
    std::sort(out.begin(), out.end(), [](auto a, auto b) { return a.ordinal() < b.ordinal(); });
    return out;
  }

  bool has_driver(std::string_view driver) const {
    return std::any_of(rows.begin(), rows.end(), [&](const auto& r) { return r.cocomo_driver == driver; });
  }
};

namespace detail {

inline std::vector<RatingLevel> parse_level_list(std::string_view cell) {
  std::vector<RatingLevel> out;
  std::size_t pos = 0;
  while (pos <= cell.size()) {
    const auto end = cell.find(';', pos);
    const auto token = trim(cell.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
    if (!token.empty()) out.push_back(parse_rating(token));
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return out;
}

inline std::string format_level_list(const std::vector<RatingLevel>& levels) {
  std::string out;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (i) out += ';';
    out += to_string(levels[i]);
  }
  return out;
}

}  // namespace detail

inline MappingTable parse_mapping_table(std::string_view text) {
  const auto table = csv::parse(text);
  const auto c_param = csv::column_index(table.header, "seer_param");
  const auto c_seer = csv::column_index(table.header, "seer_rating");
  const auto c_driver = csv::column_index(table.header, "cocomo_driver");
  const auto c_cocomo = csv::column_index(table.header, "cocomo_ratings");
  MappingTable out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    if (row.size() != table.header.size()) {
      throw ParseError("mapping table line " + std::to_string(table.line_numbers[i]) + ": expected " +
                       std::to_string(table.header.size()) + " fields");
    }
    MappingRow mapped{upper_ascii(row[c_param]), detail::parse_level_list(row[c_seer]),
                      upper_ascii(row[c_driver]), detail::parse_level_list(row[c_cocomo])};
    if (mapped.seer_param.empty() || mapped.cocomo_driver.empty()) {
      throw ParseError("mapping table line " + std::to_string(table.line_numbers[i]) + ": empty name");
    }
    out.rows.push_back(std::move(mapped));
  }
  return out;
}

inline MappingTable load_mapping_table(const std::string& path) {
  return parse_mapping_table(csv::read_file(path));
}

inline std::string format_mapping_table(const MappingTable& table) {
  std::string out = "seer_param,seer_rating,cocomo_driver,cocomo_ratings\n";
  for (const auto& row : table.rows) {
    out += csv::format_row({row.seer_param, detail::format_level_list(row.seer_levels), row.cocomo_driver,
                            detail::format_level_list(row.cocomo_levels)});
  }
  return out;
}

/// The shipped table (same content as data/rating_mapping.csv).
inline const MappingTable& default_mapping_table() {
  static const MappingTable table = parse_mapping_table(R"(seer_param,seer_rating,cocomo_driver,cocomo_ratings
ACAP,VLo-,ACAP,
ACAP,VLo,ACAP,VLo
ACAP,Low,ACAP,Low
ACAP,Nom,ACAP,Nom
ACAP,Hi,ACAP,Hi
ACAP,VHi,ACAP,VHi
AEXP,VLo,APEX,VLo
AEXP,,APEX,Low
AEXP,Low,APEX,Nom
AEXP,Nom,APEX,Hi
AEXP,Hi,APEX,VHi
PCAP,VLo-,PCAP,
PCAP,VLo,PCAP,VLo
PCAP,Low,PCAP,Low
PCAP,Nom,PCAP,Nom
PCAP,Hi,PCAP,Hi
PCAP,VHi,PCAP,VHi
LEXP,VLo,LTEX,VLo
LEXP,Low,LTEX,Low
LEXP,Nom,LTEX,Nom
LEXP,Hi,LTEX,
LEXP,VHi,LTEX,Hi
LEXP,XHi,LTEX,VHi
DEXP,VLo,PLEX,VLo
DEXP,Low,PLEX,Low
DEXP,Nom,PLEX,Nom
DEXP,Hi,PLEX,
DEXP,VHi,PLEX,Hi
DEXP,XHi,PLEX,VHi
TEXP,VLo,PLEX,VLo
TEXP,Low,PLEX,Low
TEXP,Nom,PLEX,Nom
TEXP,Hi,PLEX,
TEXP,VHi,PLEX,Hi
TEXP,XHi,PLEX,VHi
MODP,VLo,PMAT,
MODP,Low,PMAT,VLo
MODP,Nom,PMAT,Low
MODP,Hi,PMAT,Nom
MODP,VHi,PMAT,Hi;VHi;XHi
TOOL,VLo,TOOL,VLo
TOOL,Low,TOOL,Low
TOOL,Nom,TOOL,Nom
TOOL,Nom+,TOOL,
TOOL,Hi,TOOL,Hi
TOOL,Hi+,TOOL,
TOOL,VHi,TOOL,VHi
MULT,Nom,SITE,VHi;XHi
MULT,Hi,SITE,Nom;Hi
MULT,VHi,SITE,Low
MULT,XHi,SITE,VLo
DSVL,Low,PVOL,
DSVL,Nom,PVOL,Low
DSVL,Hi,PVOL,Nom
DSVL,VHi,PVOL,Hi
DSVL,XHi,PVOL,VHi
TSVL,Low,PVOL,
TSVL,Nom,PVOL,Low
TSVL,Hi,PVOL,Nom
TSVL,VHi,PVOL,Hi
TSVL,XHi,PVOL,VHi
SPEC,VLo,RELY,VLo
SPEC,Low,RELY,Low
SPEC,Nom,RELY,Nom
SPEC,Hi,RELY,Hi
SPEC,VHi,RELY,VHi
REUS,,RUSE,Low
REUS,Nom,RUSE,Nom
REUS,Hi,RUSE,Hi
REUS,VHi,RUSE,VHi
REUS,XHi,RUSE,XHi
APPL,,CPLX,VLo
APPL,Low,CPLX,Low
APPL,,CPLX,Nom
APPL,Nom,CPLX,Hi
APPL,Hi,CPLX,VHi
APPL,,CPLX,XHi
MEMC,Nom,STOR,Nom
MEMC,Hi,STOR,Hi
MEMC,VHi,STOR,VHi
MEMC,XHi,STOR,XHi
TIMC,Nom,TIME,Nom;Hi
TIMC,Hi,TIME,VHi
TIMC,VHi,TIME,XHi
TIMC,XHi,TIME,
STAFFING,VLo,CPLX,VLo
STAFFING,Low,CPLX,Low
STAFFING,Nom,CPLX,Nom
STAFFING,Nom+,CPLX,
STAFFING,Hi,CPLX,Hi
STAFFING,VHi,CPLX,VHi
STAFFING,VHi+,CPLX,
TURN,VLo,TURN,Low
TURN,Low;Nom,TURN,Nom
TURN,Hi;VHi,TURN,Hi
TURN,,TURN,VHi
DSVL,Low,VMVH,Low
DSVL,Nom,VMVH,Nom
DSVL,Hi,VMVH,Hi
DSVL,VHi,VMVH,VHi
DSVL,EHi,VMVH,
TSVL,Low,VMVT,Low
TSVL,Nom,VMVT,Nom
TSVL,Hi,VMVT,Hi
TSVL,VHi,VMVT,VHi
TSVL,EHi,VMVT,
)");
  return table;
}

enum class GapPolicy {
  error,        // unmapped (driver, rating) raises MappingGapError
  interpolate,  // resolve from the nearest mapped COCOMO ratings of the same driver
};

struct SeerAssignment {
  std::string seer_param;
  RatingLevel level;
  std::size_t row_index = 0;  // table row that produced it (first neighbour row for gaps)
  bool gap_resolved = false;
  std::string note;
};

namespace detail {

// A row whose SEER cell lists several levels resolves to the level named like
// the COCOMO rating when present, otherwise to the first listed level.
inline RatingLevel pick_seer_level(const MappingRow& row, RatingLevel cocomo) {
  for (const auto& level : row.seer_levels) {
    if (level == cocomo) return level;
  }
  return row.seer_levels.front();
}

struct MappedPoint {
  double cocomo_ordinal;
  RatingLevel seer;
  std::size_t row_index;
};

inline std::vector<MappedPoint> mapped_points(const MappingTable& table, std::string_view param,
                                              std::string_view driver) {
  std::vector<MappedPoint> points;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    if (row.seer_param != param || row.cocomo_driver != driver || row.seer_levels.empty()) continue;
    for (const auto& cocomo : row.cocomo_levels) {
      points.push_back({cocomo.ordinal(), pick_seer_level(row, cocomo), i});
    }
  }
  std::sort(points.begin(), points.end(),
            [](const auto& a, const auto& b) { return a.cocomo_ordinal < b.cocomo_ordinal; });
  return points;
}

}  // namespace detail

/// Maps one COCOMO driver rating onto every SEER parameter fed by that driver
/// (PLEX feeds DEXP and TEXP, CPLX feeds APPL and STAFFING, ...). A driver
/// absent from the table yields an empty result.
inline std::vector<SeerAssignment> cocomo_to_seer(std::string_view driver_name, RatingLevel rating,
                                                  const MappingTable& table,
                                                  GapPolicy policy = GapPolicy::error) {
  const std::string driver = upper_ascii(driver_name);
  std::vector<SeerAssignment> out;
  for (const auto& param : table.seer_parameters()) {
    bool fed = false;
    std::optional<SeerAssignment> hit;
    for (std::size_t i = 0; i < table.rows.size() && !hit; ++i) {
      const auto& row = table.rows[i];
      if (row.seer_param != param || row.cocomo_driver != driver) continue;
      fed = true;
      const bool listed = std::find(row.cocomo_levels.begin(), row.cocomo_levels.end(), rating) !=
                          row.cocomo_levels.end();
      if (listed && !row.seer_levels.empty()) {
        hit = SeerAssignment{param, detail::pick_seer_level(row, rating), i, false, {}};
      }
    }
    if (!fed) continue;
    if (hit) {
      out.push_back(*hit);
      continue;
    }

    const auto points = detail::mapped_points(table, param, driver);
    const double x = rating.ordinal();
    const detail::MappedPoint* below = nullptr;
    const detail::MappedPoint* above = nullptr;
    for (const auto& p : points) {
      if (p.cocomo_ordinal < x) below = &p;
      if (p.cocomo_ordinal > x && !above) above = &p;
    }
    std::string neighbours;
    if (below) neighbours += to_string(rating_from_ordinal(below->cocomo_ordinal)) + "->" + to_string(below->seer);
    if (above) {
      if (!neighbours.empty()) neighbours += ", ";
      neighbours += to_string(rating_from_ordinal(above->cocomo_ordinal)) + "->" + to_string(above->seer);
    }
    if (policy == GapPolicy::error || (!below && !above)) {
      throw MappingGapError("no " + param + " mapping for " + driver + "=" + to_string(rating) +
                            " (nearest defined: " + (neighbours.empty() ? "none" : neighbours) + ")");
    }
    double seer_ordinal = 0.0;
    if (below && above) {
      const double t = (x - below->cocomo_ordinal) / (above->cocomo_ordinal - below->cocomo_ordinal);
      seer_ordinal = below->seer.ordinal() + t * (above->seer.ordinal() - below->seer.ordinal());
    } else {
      seer_ordinal = (below ? below : above)->seer.ordinal();
    }
    const auto* source = below ? below : above;
    out.push_back(SeerAssignment{param, rating_from_ordinal(seer_ordinal), source->row_index, true,
                                 "interpolated from " + neighbours});
  }
  return out;
}

// ---------------------------------------------------------------------------
// COCOMO 81 -> COCOMO II

struct RosettaEntry {
  std::string cocomo81_driver;
  std::string cocomo2_driver;  // empty: dropped
  std::vector<std::pair<RatingLevel, RatingLevel>> rating_map;

  friend bool operator==(const RosettaEntry&, const RosettaEntry&) = default;
};

struct Rosetta {
  std::vector<RosettaEntry> entries;

  const RosettaEntry* find(std::string_view driver) const {
    const std::string key = upper_ascii(driver);
    for (const auto& entry : entries) {
      if (entry.cocomo81_driver == key) return &entry;
    }
    return nullptr;
  }

  /// Renames every shared driver to itself.
  static Rosetta identity(const std::vector<std::string>& drivers) {
    Rosetta out;
    for (const auto& d : drivers) out.entries.push_back({upper_ascii(d), upper_ascii(d), {}});
    return out;
  }
};

inline Rosetta parse_rosetta(std::string_view text) {
  const auto table = csv::parse(text);
  const auto c_from = csv::column_index(table.header, "cocomo81_driver");
  const auto c_to = csv::column_index(table.header, "cocomo2_driver");
  const auto c_map = csv::column_index(table.header, "rating_map");
  Rosetta out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    if (row.size() != table.header.size()) {
      throw ParseError("rosetta line " + std::to_string(table.line_numbers[i]) + ": expected " +
                       std::to_string(table.header.size()) + " fields");
    }
    RosettaEntry entry;
    entry.cocomo81_driver = upper_ascii(row[c_from]);
    entry.cocomo2_driver = row[c_to] == "-" ? std::string{} : upper_ascii(row[c_to]);
    std::string_view spec = row[c_map];
    std::size_t pos = 0;
    while (pos < spec.size()) {
      const auto end = spec.find(';', pos);
      const auto pair = detail::trim(spec.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
      if (!pair.empty()) {
        const auto colon = pair.find(':');
        if (colon == std::string_view::npos) {
          throw ParseError("rosetta line " + std::to_string(table.line_numbers[i]) + ": bad rating pair '" +
                           std::string(pair) + "'");
        }
        entry.rating_map.emplace_back(parse_rating(pair.substr(0, colon)), parse_rating(pair.substr(colon + 1)));
      }
      if (end == std::string_view::npos) break;
      pos = end + 1;
    }
    out.entries.push_back(std::move(entry));
  }
  return out;
}

inline Rosetta load_rosetta(const std::string& path) { return parse_rosetta(csv::read_file(path)); }

inline const Rosetta& default_rosetta() {
  static const Rosetta rosetta = parse_rosetta(R"(cocomo81_driver,cocomo2_driver,rating_map
RELY,RELY,
DATA,DATA,
CPLX,CPLX,
TIME,TIME,
STOR,STOR,
VIRT,PVOL,
TURN,TURN,
ACAP,ACAP,
AEXP,APEX,
PCAP,PCAP,
VEXP,PLEX,
LEXP,LTEX,
MODP,PMAT,
TOOL,TOOL,
SCED,SCED,
)");
  return rosetta;
}

struct Cocomo2Conversion {
  std::map<std::string, RatingLevel> ratings;
  std::vector<std::string> dropped;  // drivers the rosetta removes
};

inline Cocomo2Conversion cocomo81_to_cocomoII(const std::map<std::string, RatingLevel>& record,
                                              const Rosetta& rosetta) {
  Cocomo2Conversion out;
  for (const auto& [driver, rating] : record) {
    const auto* entry = rosetta.find(driver);
    if (!entry) throw ConversionError("no rosetta entry for COCOMO 81 driver " + upper_ascii(driver));
    if (entry->cocomo2_driver.empty()) {
      out.dropped.push_back(entry->cocomo81_driver);
      continue;
    }
    RatingLevel converted = rating;
    for (const auto& [from, to] : entry->rating_map) {
      if (from == rating) {
        converted = to;
        break;
      }
    }
    if (out.ratings.contains(entry->cocomo2_driver)) {
      throw ConversionError("two COCOMO 81 drivers convert to " + entry->cocomo2_driver);
    }
    out.ratings.emplace(entry->cocomo2_driver, converted);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Whole-dataset transformation

struct TransformLogEntry {
  std::string record_id;
  std::string action;  // renamed | dropped | mapped | gap-interpolated | shadowed | unused-driver
  std::string cocomo_driver;
  std::string cocomo_rating;
  std::string seer_param;
  std::string seer_rating;
  std::string detail;
};

struct RecordError {
  std::string record_id;
  std::string message;
};

struct TransformOptions {
  bool strict = false;
  GapPolicy gaps = GapPolicy::interpolate;
};

struct TransformResult {
  std::vector<ProjectRecord> projects;
  std::vector<TransformLogEntry> log;
  std::vector<RecordError> errors;
};

/// Transforms COCOMO-rated records into SEER-rated projects. With a rosetta,
/// records are treated as COCOMO 81 and converted to COCOMO II first.
/// In strict mode any record error (including mapping gaps) fails the batch;
/// otherwise failed records are skipped and reported, and the batch fails
/// only when every record failed.
inline TransformResult transform_dataset(const std::vector<CocomoRecord>& records, const Rosetta* rosetta,
                                         const MappingTable& table, TransformOptions options = {}) {
  TransformResult result;
  const GapPolicy gaps = options.strict ? GapPolicy::error : options.gaps;
  for (const auto& record : records) {
    std::vector<TransformLogEntry> log;
    try {
      std::map<std::string, RatingLevel> drivers;
      if (rosetta) {
        for (const auto& [driver, rating] : record.drivers) {
          const auto* entry = rosetta->find(driver);
          if (!entry) throw ConversionError("no rosetta entry for COCOMO 81 driver " + upper_ascii(driver));
          if (entry->cocomo2_driver.empty()) {
            log.push_back({record.id, "dropped", entry->cocomo81_driver, to_string(rating), "", "", ""});
          } else if (entry->cocomo2_driver != entry->cocomo81_driver) {
            log.push_back({record.id, "renamed", entry->cocomo81_driver, to_string(rating), "", "",
                           "-> " + entry->cocomo2_driver});
          }
        }
        drivers = cocomo81_to_cocomoII(record.drivers, *rosetta).ratings;
      } else {
        for (const auto& [driver, rating] : record.drivers) drivers.emplace(upper_ascii(driver), rating);
      }

      ProjectRecord project{record.id, record.source, record.mode, record.size_kloc, record.actual_effort_pm, {}, {}};
      std::map<std::string, std::string> origin;
      // Table order decides precedence when two drivers feed one parameter.
      std::vector<std::string> driver_order;
      for (const auto& row : table.rows) {
        if (drivers.contains(row.cocomo_driver) &&
            std::find(driver_order.begin(), driver_order.end(), row.cocomo_driver) == driver_order.end()) {
          driver_order.push_back(row.cocomo_driver);
        }
      }
      for (const auto& [driver, rating] : drivers) {
        if (!table.has_driver(driver)) {
          log.push_back({record.id, "unused-driver", driver, to_string(rating), "", "", "no SEER parameter"});
        }
      }
      for (const auto& driver : driver_order) {
        const RatingLevel rating = drivers.at(driver);
        std::vector<SeerAssignment> assignments;
        try {
          assignments = cocomo_to_seer(driver, rating, table, gaps);
        } catch (const MappingGapError& e) {
          throw MappingGapError("record " + record.id + ": " + e.what());
        }
        for (const auto& a : assignments) {
          if (project.ratings.contains(a.seer_param)) {
            log.push_back({record.id, "shadowed", driver, to_string(rating), a.seer_param, to_string(a.level),
                           "already set from " + origin[a.seer_param]});
            continue;
          }
          project.ratings.emplace(a.seer_param, a.level);
          origin[a.seer_param] = driver;
          log.push_back({record.id, a.gap_resolved ? "gap-interpolated" : "mapped", driver, to_string(rating),
                         a.seer_param, to_string(a.level),
                         a.gap_resolved ? a.note : "row " + std::to_string(a.row_index + 1)});
        }
      }
      result.projects.push_back(std::move(project));
      result.log.insert(result.log.end(), log.begin(), log.end());
    } catch (const Error& e) {
      std::string message = e.what();
      if (message.find(record.id) == std::string::npos) message = "record " + record.id + ": " + message;
      if (options.strict) {
        if (dynamic_cast<const MappingGapError*>(&e)) throw MappingGapError(message);
        throw ConversionError(message);
      }
      result.errors.push_back({record.id, message});
    }
  }
  if (!records.empty() && result.projects.empty()) {
    std::string message = "every record failed to transform";
    if (!result.errors.empty()) message += "; first: " + result.errors.front().message;
    throw ConversionError(message);
  }
  return result;
}

inline std::string format_transform_log(const std::vector<TransformLogEntry>& log) {
  std::string out = "record_id,action,cocomo_driver,cocomo_rating,seer_param,seer_rating,detail\n";
  for (const auto& e : log) {
    out += csv::format_row({e.record_id, e.action, e.cocomo_driver, e.cocomo_rating, e.seer_param, e.seer_rating,
                            e.detail});
  }
  return out;
}

}  // namespace nfseer
