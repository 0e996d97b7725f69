#include "fairaudit/cohort.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "json.hpp"

namespace fairaudit {

namespace {

std::string row_prefix(int64_t row) {
  return "row " + std::to_string(row) + ": ";
}

// RFC 4180 field splitter. Handles quoted fields, "" escapes, and bare or
// CRLF line endings; quoted fields may span lines.
class CsvReader {
public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  // Returns false at end of input. Throws on a dangling quote.
  bool next_row(std::vector<std::string>& fields) {
    fields.clear();
    std::string field;
    bool in_quotes = false;
    bool saw_any = false;
    int c;
    while ((c = in_.get()) != EOF) {
      saw_any = true;
      if (in_quotes) {
        if (c == '"') {
          if (in_.peek() == '"') {
            in_.get();
            field.push_back('"');
          } else {
            in_quotes = false;
          }
        } else {
          field.push_back(static_cast<char>(c));
        }
      } else if (c == '"') {
        in_quotes = true;
      } else if (c == ',') {
        fields.push_back(std::move(field));
        field.clear();
      } else if (c == '\r') {
        if (in_.peek() == '\n') in_.get();
        fields.push_back(std::move(field));
        return true;
      } else if (c == '\n') {
        fields.push_back(std::move(field));
        return true;
      } else {
        field.push_back(static_cast<char>(c));
      }
    }
    if (in_quotes) throw ValidationError("unterminated quoted field");
    if (!saw_any) return false;
    fields.push_back(std::move(field));
    return true;
  }

private:
  std::istream& in_;
};

void csv_escape_to(std::string& out, const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) {
    out += s;
    return;
  }
  out.push_back('"');
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const char* begin = s.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end != begin + s.size() || errno == ERANGE || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

int parse_binary(const std::string& s, const std::string& column, int64_t row) {
  if (s == "0") return 0;
  if (s == "1") return 1;
  const auto d = parse_double(s);
  if (d && (*d == 0.0 || *d == 1.0)) return static_cast<int>(*d);
  throw ValidationError(row_prefix(row) + "column '" + column +
                        "' must be 0 or 1, got '" + s + "'");
}

struct RawTable {
  std::vector<std::string> header;
  // One row per record; empty optional = missing cell.
  std::vector<std::vector<std::optional<std::string>>> rows;
};

RawTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open input file: " + path);
  CsvReader reader(in);
  RawTable table;
  std::vector<std::string> fields;
  if (!reader.next_row(fields)) {
    throw ValidationError("empty file: " + path);
  }
  table.header = fields;
  while (reader.next_row(fields)) {
    if (fields.size() != table.header.size()) {
      throw ValidationError(row_prefix(table.rows.size() + 1) + "expected " +
                            std::to_string(table.header.size()) +
                            " fields, got " + std::to_string(fields.size()));
    }
    std::vector<std::optional<std::string>> row(fields.size());
    for (size_t i = 0; i < fields.size(); ++i) {
      if (!fields[i].empty()) row[i] = fields[i];
    }
    table.rows.push_back(std::move(row));
  }
  if (table.rows.empty()) {
    throw ValidationError("no data rows in: " + path);
  }
  return table;
}

RawTable read_jsonl(const std::string& path, const ColumnSpec& spec) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open input file: " + path);

  // Synthesize a header from the declared columns; JSONL has no header row.
  RawTable table;
  if (!spec.id.empty()) table.header.push_back(spec.id);
  table.header.push_back(spec.y_true);
  if (!spec.y_score.empty()) table.header.push_back(spec.y_score);
  if (!spec.y_pred.empty()) table.header.push_back(spec.y_pred);
  for (const auto& a : spec.attributes) table.header.push_back(a);
  for (const auto& c : spec.covariates) table.header.push_back(c);

  std::string line;
  int64_t row_no = 0;
  bool any_line = false;
  while (std::getline(in, line)) {
    any_line = true;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++row_no;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(row_prefix(row_no) + "invalid JSON: " + e.what());
    }
    if (!obj.is_object()) {
      throw ValidationError(row_prefix(row_no) + "expected a JSON object");
    }
    std::vector<std::optional<std::string>> row(table.header.size());
    for (size_t i = 0; i < table.header.size(); ++i) {
      const auto it = obj.find(table.header[i]);
      if (it == obj.end() || it->is_null()) continue;
      if (it->is_string()) {
        if (!it->get<std::string>().empty()) row[i] = it->get<std::string>();
      } else if (it->is_number_integer()) {
        row[i] = std::to_string(it->get<int64_t>());
      } else if (it->is_number()) {
        row[i] = format_shortest(it->get<double>());
      } else if (it->is_boolean()) {
        row[i] = it->get<bool>() ? "1" : "0";
      } else {
        throw ValidationError(row_prefix(row_no) + "column '" +
                              table.header[i] + "' has unsupported type");
      }
    }
    table.rows.push_back(std::move(row));
  }
  if (!any_line) throw ValidationError("empty file: " + path);
  if (table.rows.empty()) throw ValidationError("no data rows in: " + path);
  return table;
}

int find_column(const std::vector<std::string>& header,
                const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

int require_column(const std::vector<std::string>& header,
                   const std::string& name) {
  const int idx = find_column(header, name);
  if (idx < 0) {
    throw ValidationError("missing column '" + name + "' in header");
  }
  return idx;
}

AuditCohort build_cohort(const RawTable& table, const ColumnSpec& spec,
                         const std::string& source) {
  if (spec.y_true.empty()) {
    throw ConfigError("column declaration for y_true is required");
  }
  if (spec.y_score.empty() && spec.y_pred.empty()) {
    throw ConfigError("at least one of y_score/y_pred columns is required");
  }
  if (spec.attributes.empty()) {
    throw ConfigError("at least one attribute column is required");
  }
  {
    std::set<std::string> seen;
    for (const auto& a : spec.attributes) {
      if (!seen.insert(a).second) {
        throw ConfigError("duplicate attribute column '" + a + "'");
      }
    }
    for (const auto& c : spec.covariates) {
      if (!seen.insert(c).second) {
        throw ConfigError("duplicate column '" + c + "'");
      }
    }
  }

  const int id_idx = spec.id.empty() ? -1 : require_column(table.header, spec.id);
  const int yt_idx = require_column(table.header, spec.y_true);
  const int ys_idx =
      spec.y_score.empty() ? -1 : require_column(table.header, spec.y_score);
  const int yp_idx =
      spec.y_pred.empty() ? -1 : require_column(table.header, spec.y_pred);
  std::vector<int> attr_idx;
  for (const auto& a : spec.attributes) {
    attr_idx.push_back(require_column(table.header, a));
  }
  std::vector<int> cov_idx;
  for (const auto& c : spec.covariates) {
    cov_idx.push_back(require_column(table.header, c));
  }

  const int64_t n = static_cast<int64_t>(table.rows.size());
  AuditCohort cohort;
  cohort.provenance = {source, n};
  cohort.schema.attributes = spec.attributes;
  cohort.schema.covariates = spec.covariates;
  cohort.ids.resize(n);
  cohort.y_true.resize(n);
  cohort.y_score.assign(n, std::numeric_limits<double>::quiet_NaN());
  cohort.y_pred.assign(n, -1);

  // Pass 1: validate roles, collect raw attribute/covariate strings.
  std::vector<std::vector<std::string>> attr_raw(spec.attributes.size());
  std::vector<std::vector<std::optional<std::string>>> cov_raw(
      spec.covariates.size());
  for (auto& col : attr_raw) col.resize(n);
  for (auto& col : cov_raw) col.resize(n);

  for (int64_t i = 0; i < n; ++i) {
    const auto& row = table.rows[i];
    const int64_t rn = i + 1;
    cohort.ids[i] = id_idx >= 0 && row[id_idx] ? *row[id_idx]
                                               : std::to_string(rn);
    if (!row[yt_idx]) {
      throw ValidationError(row_prefix(rn) + "column '" + spec.y_true +
                            "' is missing");
    }
    cohort.y_true[i] =
        static_cast<uint8_t>(parse_binary(*row[yt_idx], spec.y_true, rn));
    if (ys_idx >= 0 && row[ys_idx]) {
      const auto v = parse_double(*row[ys_idx]);
      if (!v || *v < 0.0 || *v > 1.0) {
        throw ValidationError(row_prefix(rn) + "column '" + spec.y_score +
                              "' must be in [0,1], got '" + *row[ys_idx] +
                              "'");
      }
      cohort.y_score[i] = *v;
    }
    if (yp_idx >= 0 && row[yp_idx]) {
      cohort.y_pred[i] =
          static_cast<int8_t>(parse_binary(*row[yp_idx], spec.y_pred, rn));
    }
    if (cohort.y_pred[i] < 0 && std::isnan(cohort.y_score[i])) {
      throw ValidationError(row_prefix(rn) +
                            "record has neither y_score nor y_pred");
    }
    for (size_t a = 0; a < attr_idx.size(); ++a) {
      if (!row[attr_idx[a]]) {
        if (spec.missing_policy == MissingPolicy::error) {
          throw ValidationError(row_prefix(rn) + "attribute column '" +
                                spec.attributes[a] + "' is missing");
        }
        attr_raw[a][i] = kUnknownCategory;
      } else {
        attr_raw[a][i] = *row[attr_idx[a]];
      }
    }
    for (size_t c = 0; c < cov_idx.size(); ++c) {
      if (!row[cov_idx[c]]) {
        throw ValidationError(row_prefix(rn) + "covariate column '" +
                              spec.covariates[c] + "' is missing");
      }
      cov_raw[c][i] = *row[cov_idx[c]];
    }
  }

  // Pass 2: freeze vocabularies (sorted, so they are stable under row
  // shuffles) and encode.
  cohort.attr_codes.resize(spec.attributes.size());
  cohort.schema.attr_vocab.resize(spec.attributes.size());
  for (size_t a = 0; a < attr_raw.size(); ++a) {
    std::set<std::string> vocab(attr_raw[a].begin(), attr_raw[a].end());
    cohort.schema.attr_vocab[a].assign(vocab.begin(), vocab.end());
    std::map<std::string, int32_t> code;
    for (size_t k = 0; k < cohort.schema.attr_vocab[a].size(); ++k) {
      code[cohort.schema.attr_vocab[a][k]] = static_cast<int32_t>(k);
    }
    cohort.attr_codes[a].resize(n);
    for (int64_t i = 0; i < n; ++i) {
      cohort.attr_codes[a][i] = code[attr_raw[a][i]];
    }
  }

  cohort.schema.covariate_numeric.resize(spec.covariates.size());
  cohort.schema.cov_vocab.resize(spec.covariates.size());
  cohort.cov_num.resize(spec.covariates.size());
  cohort.cov_code.resize(spec.covariates.size());
  for (size_t c = 0; c < cov_raw.size(); ++c) {
    bool numeric = true;
    for (int64_t i = 0; i < n && numeric; ++i) {
      numeric = parse_double(*cov_raw[c][i]).has_value();
    }
    cohort.schema.covariate_numeric[c] = numeric;
    if (numeric) {
      cohort.cov_num[c].resize(n);
      for (int64_t i = 0; i < n; ++i) {
        cohort.cov_num[c][i] = *parse_double(*cov_raw[c][i]);
      }
    } else {
      std::set<std::string> vocab;
      for (int64_t i = 0; i < n; ++i) vocab.insert(*cov_raw[c][i]);
      cohort.schema.cov_vocab[c].assign(vocab.begin(), vocab.end());
      std::map<std::string, int32_t> code;
      for (size_t k = 0; k < cohort.schema.cov_vocab[c].size(); ++k) {
        code[cohort.schema.cov_vocab[c][k]] = static_cast<int32_t>(k);
      }
      cohort.cov_code[c].resize(n);
      for (int64_t i = 0; i < n; ++i) {
        cohort.cov_code[c][i] = code[*cov_raw[c][i]];
      }
    }
  }
  return cohort;
}

}  // namespace

int CohortSchema::attribute_index(const std::string& name) const {
  const auto it = std::find(attributes.begin(), attributes.end(), name);
  return it == attributes.end() ? -1
                                : static_cast<int>(it - attributes.begin());
}

int CohortSchema::covariate_index(const std::string& name) const {
  const auto it = std::find(covariates.begin(), covariates.end(), name);
  return it == covariates.end() ? -1
                                : static_cast<int>(it - covariates.begin());
}

AuditCohort load_cohort(const std::string& path, const ColumnSpec& spec,
                        TableFormat format) {
  const RawTable table = format == TableFormat::csv
                             ? read_csv(path)
                             : read_jsonl(path, spec);
  return build_cohort(table, spec, path);
}

AuditCohort cohort_from_records(const std::vector<PredictionRecord>& records,
                                const ColumnSpec& spec,
                                const std::string& source) {
  if (records.empty()) throw ValidationError("empty record set");
  RawTable table;
  if (!spec.id.empty()) table.header.push_back(spec.id);
  table.header.push_back(spec.y_true);
  if (!spec.y_score.empty()) table.header.push_back(spec.y_score);
  if (!spec.y_pred.empty()) table.header.push_back(spec.y_pred);
  for (const auto& a : spec.attributes) table.header.push_back(a);
  for (const auto& c : spec.covariates) table.header.push_back(c);

  for (const auto& rec : records) {
    std::vector<std::optional<std::string>> row(table.header.size());
    size_t col = 0;
    if (!spec.id.empty()) row[col++] = rec.id;
    row[col++] = std::to_string(rec.y_true);
    if (!spec.y_score.empty()) {
      if (rec.y_score) row[col] = format_shortest(*rec.y_score);
      ++col;
    }
    if (!spec.y_pred.empty()) {
      if (rec.y_pred) row[col] = std::to_string(*rec.y_pred);
      ++col;
    }
    for (const auto& name : spec.attributes) {
      for (const auto& [k, v] : rec.attributes) {
        if (k == name) row[col] = v;
      }
      ++col;
    }
    for (const auto& name : spec.covariates) {
      for (const auto& [k, v] : rec.covariates) {
        if (k == name) row[col] = v.numeric ? format_shortest(v.num) : v.cat;
      }
      ++col;
    }
    table.rows.push_back(std::move(row));
  }
  return build_cohort(table, spec, source);
}

PredictionRecord record_view(const AuditCohort& cohort, int64_t i) {
  PredictionRecord rec;
  rec.id = cohort.ids[i];
  rec.y_true = cohort.y_true[i];
  if (cohort.has_score(i)) rec.y_score = cohort.y_score[i];
  if (cohort.has_pred(i)) rec.y_pred = cohort.y_pred[i];
  for (size_t a = 0; a < cohort.schema.attributes.size(); ++a) {
    rec.attributes.emplace_back(
        cohort.schema.attributes[a],
        cohort.schema.attr_vocab[a][cohort.attr_codes[a][i]]);
  }
  for (size_t c = 0; c < cohort.schema.covariates.size(); ++c) {
    CovariateValue v;
    if (cohort.schema.covariate_numeric[c]) {
      v.numeric = true;
      v.num = cohort.cov_num[c][i];
    } else {
      v.cat = cohort.schema.cov_vocab[c][cohort.cov_code[c][i]];
    }
    rec.covariates.emplace_back(cohort.schema.covariates[c], v);
  }
  return rec;
}

void write_cohort_csv(const AuditCohort& cohort, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file: " + path);
  std::string line = "id,y_true,y_pred,y_score";
  for (const auto& a : cohort.schema.attributes) {
    line.push_back(',');
    csv_escape_to(line, a);
  }
  for (const auto& c : cohort.schema.covariates) {
    line.push_back(',');
    csv_escape_to(line, c);
  }
  out << line << "\n";
  for (int64_t i = 0; i < cohort.size(); ++i) {
    line.clear();
    csv_escape_to(line, cohort.ids[i]);
    line += ",";
    line += std::to_string(static_cast<int>(cohort.y_true[i]));
    line += ",";
    if (cohort.has_pred(i)) {
      line += std::to_string(static_cast<int>(cohort.y_pred[i]));
    }
    line += ",";
    if (cohort.has_score(i)) line += format_shortest(cohort.y_score[i]);
    for (size_t a = 0; a < cohort.schema.attributes.size(); ++a) {
      line.push_back(',');
      csv_escape_to(line,
                    cohort.schema.attr_vocab[a][cohort.attr_codes[a][i]]);
    }
    for (size_t c = 0; c < cohort.schema.covariates.size(); ++c) {
      line.push_back(',');
      if (cohort.schema.covariate_numeric[c]) {
        line += format_shortest(cohort.cov_num[c][i]);
      } else {
        csv_escape_to(line,
                      cohort.schema.cov_vocab[c][cohort.cov_code[c][i]]);
      }
    }
    out << line << "\n";
  }
  if (!out) throw ValidationError("write failed: " + path);
}

GroupingAxis make_axis(std::string name, std::vector<std::string> attributes,
                       const CohortSchema& schema) {
  if (attributes.empty()) {
    throw ConfigError("axis '" + name + "' has no attributes");
  }
  std::sort(attributes.begin(), attributes.end());
  for (size_t i = 1; i < attributes.size(); ++i) {
    if (attributes[i] == attributes[i - 1]) {
      throw ConfigError("axis '" + name + "' repeats attribute '" +
                        attributes[i] + "'");
    }
  }
  for (const auto& a : attributes) {
    if (schema.attribute_index(a) < 0) {
      throw ConfigError("axis '" + name + "' names undeclared attribute '" +
                        a + "'");
    }
  }
  return GroupingAxis{std::move(name), std::move(attributes)};
}

std::string SubgroupKey::label() const {
  std::string s;
  for (size_t i = 0; i < categories.size(); ++i) {
    if (i) s += " / ";
    s += categories[i];
  }
  return s;
}

AxisIndex enumerate_subgroups(const AuditCohort& cohort,
                              const GroupingAxis& axis) {
  std::vector<int> attr_pos;
  for (const auto& a : axis.attribute_names) {
    const int idx = cohort.schema.attribute_index(a);
    if (idx < 0) {
      throw ConfigError("axis '" + axis.name +
                        "' names undeclared attribute '" + a + "'");
    }
    attr_pos.push_back(idx);
  }

  const int64_t n = cohort.size();
  // Mixed-radix composite code per record, then compact to observed cells.
  std::vector<int64_t> radix(attr_pos.size());
  int64_t total = 1;
  for (size_t k = 0; k < attr_pos.size(); ++k) {
    radix[k] = static_cast<int64_t>(cohort.schema.attr_vocab[attr_pos[k]].size());
    total *= radix[k];
  }
  std::vector<int64_t> composite(n);
  for (int64_t i = 0; i < n; ++i) {
    int64_t code = 0;
    for (size_t k = 0; k < attr_pos.size(); ++k) {
      code = code * radix[k] + cohort.attr_codes[attr_pos[k]][i];
    }
    composite[i] = code;
  }
  std::map<int64_t, int64_t> counts;  // composite -> count, sorted by code
  for (int64_t c : composite) ++counts[c];

  AxisIndex index;
  index.axis = axis;
  std::map<int64_t, int32_t> cell_of_code;
  for (const auto& [code, count] : counts) {
    SubgroupKey key;
    int64_t rem = code;
    key.categories.resize(attr_pos.size());
    for (size_t k = attr_pos.size(); k-- > 0;) {
      key.categories[k] =
          cohort.schema.attr_vocab[attr_pos[k]][rem % radix[k]];
      rem /= radix[k];
    }
    cell_of_code[code] = static_cast<int32_t>(index.keys.size());
    index.keys.push_back(std::move(key));
    index.counts.push_back(count);
  }
  // Vocabularies are sorted, so composite-code order is already the
  // lexicographic category order.
  index.cell_of_record.resize(n);
  for (int64_t i = 0; i < n; ++i) {
    index.cell_of_record[i] = cell_of_code[composite[i]];
  }
  return index;
}

MaskingSplit apply_masking(const AxisIndex& index,
                           const MaskingPolicy& policy) {
  if (policy.n_min < 0) throw ConfigError("n_min must be non-negative");
  MaskingSplit split;
  for (size_t k = 0; k < index.keys.size(); ++k) {
    if (index.counts[k] >= policy.n_min) {
      split.qualifying.push_back(static_cast<int32_t>(k));
    } else {
      split.masked.push_back(static_cast<int32_t>(k));
    }
  }
  return split;
}

namespace {

void apply_threshold(AuditCohort& cohort, int64_t i, double tau,
                     bool recompute) {
  if (cohort.has_pred(i) && !recompute) return;
  if (!cohort.has_score(i)) {
    if (cohort.has_pred(i)) return;
    throw ValidationError(row_prefix(i + 1) +
                          "record has neither y_score nor y_pred");
  }
  cohort.y_pred[i] = cohort.y_score[i] >= tau ? 1 : 0;
}

}  // namespace

AuditCohort derive_predictions(const AuditCohort& cohort, double tau,
                               bool recompute) {
  if (tau < 0.0 || tau > 1.0) {
    throw ConfigError("decision threshold must be in [0,1]");
  }
  AuditCohort out = cohort;
  for (int64_t i = 0; i < out.size(); ++i) {
    apply_threshold(out, i, tau, recompute);
  }
  return out;
}

AuditCohort derive_predictions(const AuditCohort& cohort,
                               const AxisIndex& index,
                               const std::vector<double>& cell_tau,
                               double fallback_tau, bool recompute) {
  if (cell_tau.size() != index.keys.size()) {
    throw ConfigError("threshold table size does not match axis cells");
  }
  AuditCohort out = cohort;
  for (int64_t i = 0; i < out.size(); ++i) {
    const double tau = cell_tau[index.cell_of_record[i]];
    apply_threshold(out, i, std::isnan(tau) ? fallback_tau : tau, recompute);
  }
  return out;
}

}  // namespace fairaudit
