#include <charconv>
#include <fstream>
#include <sstream>

#include "mpml/io.hpp"

namespace mpml::data {

namespace {

std::string line_msg(const std::string& path, int line, const std::string& what) {
  return path + ":" + std::to_string(line) + ": " + what;
}

double parse_double(const std::string& s, const std::string& path, int line) {
  double value = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw InputError(line_msg(path, line, "cannot parse number '" + s + "'"));
  return value;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string token;
  while (is >> token) out.push_back(token);
  return out;
}

int find_value(const std::vector<std::string>& values, const std::string& v) {
  for (size_t i = 0; i < values.size(); ++i) {
    if (values[i] == v) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace

std::string csv_quote(const std::string& field) {
  bool needs_quotes = field.find_first_of(",\"\n\r") != std::string::npos;
  if (!needs_quotes) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line, int line_number) {
  std::vector<std::string> fields;
  std::string current;
  bool in_quotes = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        current += c;
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current += c;
    }
  }
  if (in_quotes)
    throw InputError("line " + std::to_string(line_number) + ": unterminated quoted field");
  fields.push_back(std::move(current));
  return fields;
}

Dataset load_csv(const std::string& path, const AttributeSchema& schema,
                 const CsvOptions& options, LoadReport* report) {
  schema.validate();
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);

  LoadReport local;
  std::string line;
  int line_no = 0;

  if (!std::getline(in, line)) throw InputError(path + ": empty file");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header = split_csv_line(line, line_no);
  if (static_cast<int>(header.size()) != schema.attribute_count() + 1)
    throw InputError(line_msg(path, line_no, "header has " + std::to_string(header.size()) +
                                                 " columns, schema expects " +
                                                 std::to_string(schema.attribute_count() + 1)));
  for (int j = 0; j < schema.attribute_count(); ++j) {
    if (header[static_cast<size_t>(j)] != schema.attributes[static_cast<size_t>(j)].name)
      throw InputError(line_msg(path, line_no,
                                "header column '" + header[static_cast<size_t>(j)] +
                                    "' does not match schema attribute '" +
                                    schema.attributes[static_cast<size_t>(j)].name + "'"));
  }
  if (header.back() != "label")
    throw InputError(line_msg(path, line_no, "final header column must be 'label'"));

  Dataset dataset;
  dataset.schema = schema;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields = split_csv_line(line, line_no);
    if (static_cast<int>(fields.size()) != schema.attribute_count() + 1)
      throw InputError(line_msg(path, line_no, "expected " +
                                                   std::to_string(schema.attribute_count() + 1) +
                                                   " fields, found " +
                                                   std::to_string(fields.size())));
    bool missing = false;
    for (const std::string& f : fields) {
      if (f.empty()) missing = true;
    }
    if (missing) {
      if (options.on_missing == MissingPolicy::DropRow) {
        ++local.dropped_rows;
        continue;
      }
      throw InputError(line_msg(path, line_no, "missing value"));
    }

    Record r;
    r.values.reserve(schema.attributes.size());
    for (int j = 0; j < schema.attribute_count(); ++j) {
      const Attribute& a = schema.attributes[static_cast<size_t>(j)];
      const std::string& f = fields[static_cast<size_t>(j)];
      if (a.is_categorical()) {
        int idx = find_value(a.categorical().values, f);
        if (idx < 0)
          throw InputError(
              line_msg(path, line_no, "unknown value '" + f + "' for attribute " + a.name));
        r.values.emplace_back(idx);
      } else {
        double v = parse_double(f, path, line_no);
        const NumericKind& nk = a.numeric();
        if (v < nk.min) {
          v = nk.min;
          ++local.clipped_values;
        } else if (v > nk.max) {
          v = nk.max;
          ++local.clipped_values;
        }
        r.values.emplace_back(v);
      }
    }
    int label = find_value(schema.label_values, fields.back());
    if (label < 0)
      throw InputError(line_msg(path, line_no, "unknown label '" + fields.back() + "'"));
    r.label = label;
    dataset.records.push_back(std::move(r));
  }
  if (report) *report = local;
  return dataset;
}

void save_csv(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  for (int j = 0; j < dataset.schema.attribute_count(); ++j) {
    out << csv_quote(dataset.schema.attributes[static_cast<size_t>(j)].name) << ',';
  }
  out << "label\n";
  for (const Record& r : dataset.records) {
    for (size_t j = 0; j < r.values.size(); ++j) {
      const Attribute& a = dataset.schema.attributes[j];
      if (a.is_categorical()) {
        out << csv_quote(a.categorical().values[static_cast<size_t>(std::get<int>(r.values[j]))]);
      } else {
        out << format_full(std::get<double>(r.values[j]));
      }
      out << ',';
    }
    out << csv_quote(dataset.schema.label_values[static_cast<size_t>(r.label)]) << '\n';
  }
}

AttributeSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  AttributeSchema schema;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::vector<std::string> tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens[0] == "attribute") {
      if (tokens.size() < 3) throw InputError(line_msg(path, line_no, "malformed attribute"));
      Attribute a;
      a.name = tokens[1];
      if (tokens[2] == "categorical") {
        if (tokens.size() < 4)
          throw InputError(line_msg(path, line_no, "categorical attribute needs values"));
        CategoricalKind kind;
        kind.values.assign(tokens.begin() + 3, tokens.end());
        a.kind = std::move(kind);
      } else if (tokens[2] == "numeric") {
        if (tokens.size() != 5)
          throw InputError(line_msg(path, line_no, "numeric attribute needs min and max"));
        NumericKind kind;
        kind.min = parse_double(tokens[3], path, line_no);
        kind.max = parse_double(tokens[4], path, line_no);
        a.kind = kind;
      } else {
        throw InputError(line_msg(path, line_no, "unknown attribute kind " + tokens[2]));
      }
      schema.attributes.push_back(std::move(a));
    } else if (tokens[0] == "label") {
      if (tokens.size() < 2) throw InputError(line_msg(path, line_no, "label needs values"));
      schema.label_values.assign(tokens.begin() + 1, tokens.end());
    } else {
      throw InputError(line_msg(path, line_no, "unknown directive " + tokens[0]));
    }
  }
  schema.validate();
  return schema;
}

void save_schema(const AttributeSchema& schema, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  for (const Attribute& a : schema.attributes) {
    out << "attribute " << a.name;
    if (a.is_categorical()) {
      out << " categorical";
      for (const std::string& v : a.categorical().values) out << ' ' << v;
    } else {
      out << " numeric " << format_full(a.numeric().min) << ' ' << format_full(a.numeric().max);
    }
    out << '\n';
  }
  out << "label";
  for (const std::string& v : schema.label_values) out << ' ' << v;
  out << '\n';
}

BowCorpus load_bow(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  BowCorpus corpus;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::vector<std::string> tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens[0] == "vocab") {
      corpus.vocabulary.assign(tokens.begin() + 1, tokens.end());
    } else if (tokens[0] == "labels") {
      corpus.label_values.assign(tokens.begin() + 1, tokens.end());
    } else if (tokens[0] == "doc") {
      if (tokens.size() < 2) throw InputError(line_msg(path, line_no, "doc needs a label"));
      BowDocument d;
      d.label = find_value(corpus.label_values, tokens[1]);
      if (d.label < 0)
        throw InputError(line_msg(path, line_no, "unknown label '" + tokens[1] + "'"));
      d.counts.assign(corpus.vocabulary.size(), 0);
      for (size_t t = 2; t < tokens.size(); ++t) {
        auto colon = tokens[t].rfind(':');
        if (colon == std::string::npos)
          throw InputError(line_msg(path, line_no, "expected token:count, got " + tokens[t]));
        std::string token = tokens[t].substr(0, colon);
        int count = static_cast<int>(parse_double(tokens[t].substr(colon + 1), path, line_no));
        int idx = corpus.token_index(token);
        if (idx < 0)
          throw InputError(line_msg(path, line_no, "token '" + token + "' not in vocabulary"));
        d.counts[static_cast<size_t>(idx)] = count;
      }
      corpus.documents.push_back(std::move(d));
    } else {
      throw InputError(line_msg(path, line_no, "unknown directive " + tokens[0]));
    }
  }
  corpus.validate();
  return corpus;
}

void save_bow(const BowCorpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << "vocab";
  for (const std::string& t : corpus.vocabulary) out << ' ' << t;
  out << "\nlabels";
  for (const std::string& l : corpus.label_values) out << ' ' << l;
  out << '\n';
  for (const BowDocument& d : corpus.documents) {
    out << "doc " << corpus.label_values[static_cast<size_t>(d.label)];
    for (size_t j = 0; j < d.counts.size(); ++j) {
      if (d.counts[j] > 0) out << ' ' << corpus.vocabulary[j] << ':' << d.counts[j];
    }
    out << '\n';
  }
}

}  // namespace mpml::data
