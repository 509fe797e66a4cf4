#pragma once

#include <string>
#include <vector>

#include "mpml/dataset.hpp"

namespace mpml::data {

enum class MissingPolicy { Fail, DropRow };

struct CsvOptions {
  MissingPolicy on_missing = MissingPolicy::Fail;
};

struct LoadReport {
  int clipped_values = 0;  // numeric values clipped into [min, max]
  int dropped_rows = 0;
};

// CSV layout: header row of attribute names then "label"; one record per
// line; RFC-style double-quote escaping; UTF-8.
Dataset load_csv(const std::string& path, const AttributeSchema& schema,
                 const CsvOptions& options = {}, LoadReport* report = nullptr);
void save_csv(const Dataset& dataset, const std::string& path);

// Schema file: one directive per line.
//   attribute <name> categorical <value>...
//   attribute <name> numeric <min> <max>
//   label <value>...
AttributeSchema load_schema(const std::string& path);
void save_schema(const AttributeSchema& schema, const std::string& path);

// Bag-of-words corpus file:
//   vocab <token>...
//   labels <label>...
//   doc <label> <token>:<count>...
BowCorpus load_bow(const std::string& path);
void save_bow(const BowCorpus& corpus, const std::string& path);

std::string csv_quote(const std::string& field);
std::vector<std::string> split_csv_line(const std::string& line, int line_number);

}  // namespace mpml::data
