#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mpml/attack.hpp"
#include "mpml/defense.hpp"
#include "mpml/synth.hpp"

namespace mpml::exp {

// One directive per line: key followed by whitespace-separated value tokens.
// '#' starts a comment. A repeated key overrides the earlier entry.
struct KeyValueConfig {
  std::vector<std::pair<std::string, std::vector<std::string>>> entries;

  static KeyValueConfig parse_file(const std::string& path);
  static KeyValueConfig parse_text(const std::string& text, const std::string& origin);

  void set(const std::string& key, std::vector<std::string> tokens);
  bool has(const std::string& key) const;
  const std::vector<std::string>* find(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& def) const;
  double get_double(const std::string& key, double def) const;
  int get_int(const std::string& key, int def) const;
  uint64_t get_u64(const std::string& key, uint64_t def) const;
  bool get_bool(const std::string& key, bool def) const;
  std::vector<double> get_doubles(const std::string& key, std::vector<double> def) const;
  std::vector<int> get_ints(const std::string& key, std::vector<int> def) const;
  std::vector<std::string> get_strings(const std::string& key,
                                       std::vector<std::string> def) const;

  // Resolved entries, sorted by key, one per line; input to the config hash.
  std::string canonical_text() const;
};

uint64_t fnv1a64(const std::string& text);

enum class SourceKind { Synthetic, Csv, Bow, BowSynthetic };

struct AttackConfig {
  // attribute index -> raw value token, resolved against the schema at run
  // time (value name, category index, or numeric value).
  std::vector<std::pair<int, std::string>> attributes;
  std::string label;  // label name or index
  std::string token;  // text contamination token
  std::vector<double> fractions{0.0};
  std::vector<int> attacker_party_counts{1};
};

struct ExperimentConfig {
  std::string name = "experiment";
  uint64_t master_seed = 0;
  int repetitions = 10;
  std::string out_dir = "results";

  SourceKind source = SourceKind::Synthetic;
  data::SynthSpec synth;
  std::string csv_path;
  std::string schema_path;
  std::string bow_path;
  data::BowSynthSpec bow_synth;

  int n_parties = 10;
  int train_per_party = 500;
  int val_size = 1000;

  AttackConfig attack;

  std::vector<int> hidden_sizes{64, 32};
  double learning_rate = 0.01;
  double momentum = 0.5;
  int epochs = 20;
  int batch_size = 32;

  std::optional<defense::DefenseConfig> defense;
  bool measure_membership = false;
  bool measure_pivot = false;
  int pivot_bins = 0;

  std::string config_hash_source;  // canonical text the hash is taken over

  static ExperimentConfig from_kv(const KeyValueConfig& kv);
  void validate() const;
};

struct ResultRow {
  int scenario = 0;
  double fraction = 0.0;
  int attacker_parties = 0;
  int repetition = 0;
  uint64_t seed = 0;
  int budget = 0;

  double val_acc_multi;
  double contam_acc_multi;
  double val_acc_local;
  double contam_acc_local;
  double val_acc_defended;
  double contam_acc_defended;
  double mi_acc_multi;
  double mi_acc_defended;
  double entropy_q;
  double entropy_q_given_f;
  double entropy_q_given_f_defended;

  std::string per_label_precision;  // semicolon-joined; '-' marks "no predictions"
  std::string released;             // one char per party: M or L
  std::string released_defended;

  // Kept out of the deterministic result files; emitted to timing.csv only.
  double wall_seconds = 0.0;
  std::string notes;

  ResultRow();
};

// Column names of results.csv, in emission order (wall_seconds excluded).
const std::vector<std::string>& result_columns();
std::vector<std::string> result_fields(const ResultRow& row);

struct RunPaths {
  std::string results_csv;
  std::string summary_csv;
  std::string results_txt;
  std::string manifest_txt;
  std::string timing_csv;
};

struct RunOutput {
  std::vector<ResultRow> rows;
  RunPaths paths;
};

struct RunOptions {
  int jobs = 1;
  std::string out_override;
  bool quiet = false;
};

// Pre-loaded file-backed sources so repeated scenarios do not re-read disk.
struct SourceData {
  std::optional<data::Dataset> csv;
  std::optional<data::BowCorpus> bow;
};

SourceData load_source(const ExperimentConfig& cfg);

ResultRow run_single(const ExperimentConfig& cfg, const SourceData& source, int scenario_index,
                     double fraction, int attacker_count, int repetition);

RunOutput run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path);
void write_results_text(const std::vector<ResultRow>& rows, const std::string& path);
void write_summary_csv(const std::vector<ResultRow>& rows, const std::string& path);
void write_timing_csv(const std::vector<ResultRow>& rows, const std::string& path);
void write_manifest(const ExperimentConfig& cfg, int scenario_count, const std::string& path);

// Parses a results/summary CSV back into cells; used by round-trip checks.
std::vector<std::vector<std::string>> read_csv_file(const std::string& path);

}  // namespace mpml::exp
