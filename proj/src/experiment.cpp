#include "mpml/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "mpml/analysis.hpp"
#include "mpml/io.hpp"
#include "mpml/server.hpp"

namespace mpml::exp {

namespace {

constexpr const char* kVersion = "mpml 0.1.0";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Seed stream tags within one (scenario, repetition) cell.
enum SeedTag : uint64_t {
  kSeedData = 1,
  kSeedPartition = 2,
  kSeedAttack = 3,
  kSeedModel = 4,
  kSeedMembership = 5,
  kSeedDefense = 6
};

double parse_double_token(const std::string& s, const std::string& key) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw InputError("config key " + key + ": cannot parse number '" + s + "'");
  return v;
}

long parse_long_token(const std::string& s, const std::string& key) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw InputError("config key " + key + ": cannot parse integer '" + s + "'");
  return v;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_text(const std::string& text, const std::string& origin) {
  KeyValueConfig kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    std::vector<std::string> tokens;
    std::string tok;
    while (ls >> tok) tokens.push_back(tok);
    if (tokens.empty())
      throw InputError(origin + ":" + std::to_string(line_no) + ": key '" + key +
                       "' has no value");
    kv.set(key, std::move(tokens));
  }
  return kv;
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_text(buffer.str(), path);
}

void KeyValueConfig::set(const std::string& key, std::vector<std::string> tokens) {
  for (auto& entry : entries) {
    if (entry.first == key) {
      entry.second = std::move(tokens);
      return;
    }
  }
  entries.emplace_back(key, std::move(tokens));
}

bool KeyValueConfig::has(const std::string& key) const { return find(key) != nullptr; }

const std::vector<std::string>* KeyValueConfig::find(const std::string& key) const {
  for (const auto& entry : entries) {
    if (entry.first == key) return &entry.second;
  }
  return nullptr;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& def) const {
  const auto* tokens = find(key);
  return tokens ? tokens->front() : def;
}

double KeyValueConfig::get_double(const std::string& key, double def) const {
  const auto* tokens = find(key);
  return tokens ? parse_double_token(tokens->front(), key) : def;
}

int KeyValueConfig::get_int(const std::string& key, int def) const {
  const auto* tokens = find(key);
  return tokens ? static_cast<int>(parse_long_token(tokens->front(), key)) : def;
}

uint64_t KeyValueConfig::get_u64(const std::string& key, uint64_t def) const {
  const auto* tokens = find(key);
  if (!tokens) return def;
  uint64_t v = 0;
  const std::string& s = tokens->front();
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw InputError("config key " + key + ": cannot parse seed '" + s + "'");
  return v;
}

bool KeyValueConfig::get_bool(const std::string& key, bool def) const {
  const auto* tokens = find(key);
  if (!tokens) return def;
  const std::string& s = tokens->front();
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw InputError("config key " + key + ": expected boolean, got '" + s + "'");
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key,
                                                std::vector<double> def) const {
  const auto* tokens = find(key);
  if (!tokens) return def;
  std::vector<double> out;
  for (const std::string& t : *tokens) out.push_back(parse_double_token(t, key));
  return out;
}

std::vector<int> KeyValueConfig::get_ints(const std::string& key, std::vector<int> def) const {
  const auto* tokens = find(key);
  if (!tokens) return def;
  std::vector<int> out;
  for (const std::string& t : *tokens) out.push_back(static_cast<int>(parse_long_token(t, key)));
  return out;
}

std::vector<std::string> KeyValueConfig::get_strings(const std::string& key,
                                                     std::vector<std::string> def) const {
  const auto* tokens = find(key);
  return tokens ? *tokens : def;
}

std::string KeyValueConfig::canonical_text() const {
  std::vector<std::pair<std::string, std::vector<std::string>>> sorted = entries;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::string out;
  for (const auto& [key, tokens] : sorted) {
    out += key;
    for (const std::string& t : tokens) {
      out += ' ';
      out += t;
    }
    out += '\n';
  }
  return out;
}

uint64_t fnv1a64(const std::string& text) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ExperimentConfig ExperimentConfig::from_kv(const KeyValueConfig& kv) {
  ExperimentConfig cfg;
  cfg.name = kv.get_string("name", cfg.name);
  cfg.master_seed = kv.get_u64("seed", cfg.master_seed);
  cfg.repetitions = kv.get_int("repetitions", cfg.repetitions);
  cfg.out_dir = kv.get_string("out", cfg.out_dir);

  const std::string source = kv.get_string("data", "synthetic");
  if (source == "synthetic") cfg.source = SourceKind::Synthetic;
  else if (source == "csv") cfg.source = SourceKind::Csv;
  else if (source == "bow") cfg.source = SourceKind::Bow;
  else if (source == "bow_synthetic") cfg.source = SourceKind::BowSynthetic;
  else throw InputError("config: unknown data source '" + source + "'");

  cfg.synth.categorical_cardinalities = kv.get_ints("synth.categorical", {6, 4, 4, 3});
  cfg.synth.numeric_attributes = kv.get_int("synth.numeric", 2);
  cfg.synth.classes = kv.get_int("synth.classes", 4);
  cfg.synth.rule_sharpness = kv.get_double("synth.sharpness", cfg.synth.rule_sharpness);
  cfg.synth.party_shift = kv.get_double("synth.party_shift", 0.0);
  cfg.synth.shift_attribute = kv.get_int("synth.shift_attribute", 0);
  if (kv.has("synth.bias")) {
    const auto tokens = kv.get_strings("synth.bias", {});
    if (tokens.size() % 4 != 0)
      throw InputError("config: synth.bias expects groups of 4 values (attr value label strength)");
    for (size_t i = 0; i < tokens.size(); i += 4) {
      data::SynthBias b;
      b.attribute = static_cast<int>(parse_long_token(tokens[i], "synth.bias"));
      b.value = static_cast<int>(parse_long_token(tokens[i + 1], "synth.bias"));
      b.label = static_cast<int>(parse_long_token(tokens[i + 2], "synth.bias"));
      b.strength = parse_double_token(tokens[i + 3], "synth.bias");
      cfg.synth.biases.push_back(b);
    }
  }

  cfg.csv_path = kv.get_string("csv.path", "");
  cfg.schema_path = kv.get_string("csv.schema", "");
  cfg.bow_path = kv.get_string("bow.path", "");
  cfg.bow_synth.vocab_size = kv.get_int("bow.vocab", cfg.bow_synth.vocab_size);
  cfg.bow_synth.classes = kv.get_int("bow.classes", cfg.bow_synth.classes);
  cfg.bow_synth.tokens_per_doc = kv.get_int("bow.tokens_per_doc", cfg.bow_synth.tokens_per_doc);
  cfg.bow_synth.class_affinity = kv.get_double("bow.affinity", cfg.bow_synth.class_affinity);
  cfg.bow_synth.nuisance_token = kv.get_string("bow.nuisance_token", "");
  cfg.bow_synth.nuisance_rate = kv.get_double("bow.nuisance_rate", 0.0);

  cfg.n_parties = kv.get_int("parties", cfg.n_parties);
  cfg.train_per_party = kv.get_int("train_per_party", cfg.train_per_party);
  cfg.val_size = kv.get_int("val_size", cfg.val_size);

  if (kv.has("attack.attributes")) {
    for (const std::string& t : kv.get_strings("attack.attributes", {})) {
      auto colon = t.find(':');
      if (colon == std::string::npos)
        throw InputError("config: attack.attributes expects attr:value tokens");
      const int attr = static_cast<int>(parse_long_token(t.substr(0, colon), "attack.attributes"));
      cfg.attack.attributes.emplace_back(attr, t.substr(colon + 1));
    }
  }
  cfg.attack.label = kv.get_string("attack.label", "0");
  cfg.attack.token = kv.get_string("attack.token", "");
  cfg.attack.fractions = kv.get_doubles("attack.fractions", cfg.attack.fractions);
  cfg.attack.attacker_party_counts =
      kv.get_ints("attack.attacker_parties", cfg.attack.attacker_party_counts);

  cfg.hidden_sizes = kv.get_ints("model.hidden", cfg.hidden_sizes);
  cfg.learning_rate = kv.get_double("model.learning_rate", cfg.learning_rate);
  cfg.momentum = kv.get_double("model.momentum", cfg.momentum);
  cfg.epochs = kv.get_int("model.epochs", cfg.epochs);
  cfg.batch_size = kv.get_int("model.batch", cfg.batch_size);

  const std::string variant = kv.get_string("defense.variant", "none");
  if (variant != "none") {
    defense::DefenseConfig d;
    if (variant == "onehot") d.variant = defense::Variant::OneHotParty;
    else if (variant == "uniform_kl") d.variant = defense::Variant::UniformKL;
    else throw InputError("config: unknown defense.variant '" + variant + "'");
    d.c_weight = kv.get_double("defense.c", d.c_weight);
    d.g_hidden_sizes = kv.get_ints("defense.g_hidden", {});
    d.g_steps_per_f_step = kv.get_int("defense.g_steps", d.g_steps_per_f_step);
    d.feed_probabilities = kv.get_bool("defense.feed_probabilities", false);
    d.seed = kv.get_u64("defense.seed", 0);
    d.validate();
    cfg.defense = d;
  }

  cfg.measure_membership = kv.get_bool("metrics.membership", false);
  cfg.measure_pivot = kv.get_bool("metrics.pivot", false);
  cfg.pivot_bins = kv.get_int("metrics.pivot_bins", 0);

  cfg.config_hash_source = kv.canonical_text();
  cfg.validate();
  return cfg;
}

void ExperimentConfig::validate() const {
  if (repetitions < 1) throw InputError("config: repetitions must be >= 1");
  if (n_parties < 2) throw InputError("config: need at least 2 parties");
  if (train_per_party < 1 || val_size < 1) throw InputError("config: sizes must be positive");
  if (attack.fractions.empty()) throw InputError("config: empty fraction sweep");
  for (double f : attack.fractions) {
    if (f < 0.0 || f > 1.0) throw InputError("config: fractions must be in [0,1]");
  }
  if (attack.attacker_party_counts.empty())
    throw InputError("config: empty attacker party sweep");
  for (int a : attack.attacker_party_counts) {
    if (a < 1 || a > n_parties)
      throw InputError("config: attacker party count must be in [1, parties]");
  }
  if (hidden_sizes.empty()) throw InputError("config: no hidden sizes");
  if (source == SourceKind::Csv && (csv_path.empty() || schema_path.empty()))
    throw InputError("config: csv source needs csv.path and csv.schema");
  if (source == SourceKind::Bow && bow_path.empty())
    throw InputError("config: bow source needs bow.path");
}

ResultRow::ResultRow()
    : val_acc_multi(kNaN),
      contam_acc_multi(kNaN),
      val_acc_local(kNaN),
      contam_acc_local(kNaN),
      val_acc_defended(kNaN),
      contam_acc_defended(kNaN),
      mi_acc_multi(kNaN),
      mi_acc_defended(kNaN),
      entropy_q(kNaN),
      entropy_q_given_f(kNaN),
      entropy_q_given_f_defended(kNaN) {}

const std::vector<std::string>& result_columns() {
  static const std::vector<std::string> columns = {
      "scenario",          "fraction",
      "attacker_parties",  "repetition",
      "seed",              "budget",
      "val_acc_multi",     "contam_acc_multi",
      "val_acc_local",     "contam_acc_local",
      "val_acc_defended",  "contam_acc_defended",
      "mi_acc_multi",      "mi_acc_defended",
      "entropy_q",         "entropy_q_given_f",
      "entropy_q_given_f_defended",
      "per_label_precision", "released",
      "released_defended", "notes"};
  return columns;
}

std::vector<std::string> result_fields(const ResultRow& r) {
  return {std::to_string(r.scenario),
          format_g6(r.fraction),
          std::to_string(r.attacker_parties),
          std::to_string(r.repetition),
          std::to_string(r.seed),
          std::to_string(r.budget),
          format_g6(r.val_acc_multi),
          format_g6(r.contam_acc_multi),
          format_g6(r.val_acc_local),
          format_g6(r.contam_acc_local),
          format_g6(r.val_acc_defended),
          format_g6(r.contam_acc_defended),
          format_g6(r.mi_acc_multi),
          format_g6(r.mi_acc_defended),
          format_g6(r.entropy_q),
          format_g6(r.entropy_q_given_f),
          format_g6(r.entropy_q_given_f_defended),
          r.per_label_precision,
          r.released,
          r.released_defended,
          r.notes};
}

SourceData load_source(const ExperimentConfig& cfg) {
  SourceData src;
  if (cfg.source == SourceKind::Csv) {
    data::AttributeSchema schema = data::load_schema(cfg.schema_path);
    data::CsvOptions options;
    options.on_missing = data::MissingPolicy::DropRow;
    src.csv = data::load_csv(cfg.csv_path, schema, options);
  } else if (cfg.source == SourceKind::Bow) {
    src.bow = data::load_bow(cfg.bow_path);
  }
  return src;
}

namespace {

data::AttributeValue resolve_attack_value(const data::Attribute& attr, const std::string& token) {
  if (attr.is_categorical()) {
    const auto& values = attr.categorical().values;
    for (size_t i = 0; i < values.size(); ++i) {
      if (values[i] == token) return static_cast<int>(i);
    }
    return static_cast<int>(parse_long_token(token, "attack.attributes"));
  }
  return parse_double_token(token, "attack.attributes");
}

int resolve_label(const std::vector<std::string>& label_values, const std::string& token) {
  for (size_t i = 0; i < label_values.size(); ++i) {
    if (label_values[i] == token) return static_cast<int>(i);
  }
  return static_cast<int>(parse_long_token(token, "attack.label"));
}

attack::AttackSpec resolve_tabular_attack(const ExperimentConfig& cfg,
                                          const data::AttributeSchema& schema, int budget,
                                          int attacker_count) {
  attack::AttackSpec spec;
  for (const auto& [attr_idx, token] : cfg.attack.attributes) {
    if (attr_idx < 0 || attr_idx >= schema.attribute_count())
      throw InputError("attack.attributes: index out of range");
    spec.attributes.push_back(
        {attr_idx, resolve_attack_value(schema.attributes[static_cast<size_t>(attr_idx)], token)});
  }
  spec.contaminated_label = resolve_label(schema.label_values, cfg.attack.label);
  spec.budget = budget;
  for (int a = 0; a < attacker_count; ++a) spec.attacker_parties.push_back(a);
  return spec;
}

std::string precision_string(const analysis::PerLabelPrecision& p) {
  std::string out;
  for (size_t k = 0; k < p.precision.size(); ++k) {
    if (k) out += ';';
    out += p.defined[k] ? format_g6(p.precision[k]) : std::string("-");
  }
  return out;
}

std::string released_string(const std::vector<server::ReleaseDecision>& decisions) {
  std::string out;
  for (const server::ReleaseDecision& d : decisions)
    out += d.released == server::Released::Local ? 'L' : 'M';
  return out;
}

nn::MlpConfig scenario_model_config(const ExperimentConfig& cfg, int input_width, int classes,
                                    uint64_t seed) {
  nn::MlpConfig model = nn::make_config(cfg.hidden_sizes, input_width, classes);
  model.learning_rate = cfg.learning_rate;
  model.momentum = cfg.momentum;
  model.epochs = cfg.epochs;
  model.batch_size = cfg.batch_size;
  model.seed = seed;
  return model;
}

struct PreparedTabular {
  std::vector<data::PartyData> parties;
  data::Dataset shared_val;
};

PreparedTabular prepare_tabular(const ExperimentConfig& cfg, const SourceData& source,
                                uint64_t rep_seed) {
  PreparedTabular prep;
  if (cfg.source == SourceKind::Synthetic) {
    if (cfg.synth.party_shift > 0.0) {
      data::PartitionResult r =
          data::synth_generate_parties(cfg.synth, cfg.n_parties, cfg.train_per_party, cfg.val_size,
                                       seed_mix(rep_seed, kSeedData));
      prep.parties = std::move(r.parties);
      prep.shared_val = std::move(r.shared_val);
    } else {
      data::SynthSpec spec = cfg.synth;
      spec.records = cfg.n_parties * cfg.train_per_party + cfg.val_size;
      data::Dataset pool = data::synth_generate(spec, seed_mix(rep_seed, kSeedData));
      data::PartitionResult r = data::partition(pool, cfg.n_parties, cfg.train_per_party,
                                                cfg.val_size, seed_mix(rep_seed, kSeedPartition));
      prep.parties = std::move(r.parties);
      prep.shared_val = std::move(r.shared_val);
    }
  } else {
    data::PartitionResult r = data::partition(*source.csv, cfg.n_parties, cfg.train_per_party,
                                              cfg.val_size, seed_mix(rep_seed, kSeedPartition));
    prep.parties = std::move(r.parties);
    prep.shared_val = std::move(r.shared_val);
  }
  return prep;
}

struct PreparedBow {
  std::vector<data::BowCorpus> parties;       // training corpora
  std::vector<data::BowCorpus> party_vals;    // per-party validation slices
  data::BowCorpus shared_val;
};

PreparedBow prepare_bow(const ExperimentConfig& cfg, const SourceData& source, uint64_t rep_seed) {
  data::BowCorpus corpus;
  const int need = cfg.n_parties * cfg.train_per_party + cfg.val_size;
  if (cfg.source == SourceKind::Bow) {
    corpus = *source.bow;
  } else {
    data::BowSynthSpec spec = cfg.bow_synth;
    if (spec.documents <= 0) spec.documents = need;
    corpus = data::synth_bow_generate(spec, seed_mix(rep_seed, kSeedData));
  }
  if (corpus.size() < need)
    throw InputError("bow corpus has " + std::to_string(corpus.size()) + " documents, need " +
                     std::to_string(need));

  std::vector<int> order = identity_permutation(corpus.size());
  Rng rng(seed_mix(rep_seed, kSeedPartition));
  rng.shuffle(order);

  auto take = [&](int begin, int end) {
    data::BowCorpus slice;
    slice.vocabulary = corpus.vocabulary;
    slice.label_values = corpus.label_values;
    for (int i = begin; i < end; ++i)
      slice.documents.push_back(corpus.documents[static_cast<size_t>(order[static_cast<size_t>(i)])]);
    return slice;
  };

  PreparedBow prep;
  int cursor = 0;
  for (int p = 0; p < cfg.n_parties; ++p) {
    prep.parties.push_back(take(cursor, cursor + cfg.train_per_party));
    cursor += cfg.train_per_party;
  }
  prep.shared_val.vocabulary = corpus.vocabulary;
  prep.shared_val.label_values = corpus.label_values;
  const int base = cfg.val_size / cfg.n_parties;
  const int rem = cfg.val_size % cfg.n_parties;
  for (int p = 0; p < cfg.n_parties; ++p) {
    const int slice = base + (p < rem ? 1 : 0);
    prep.party_vals.push_back(take(cursor, cursor + slice));
    cursor += slice;
    for (const data::BowDocument& d : prep.party_vals.back().documents)
      prep.shared_val.documents.push_back(d);
  }
  return prep;
}

}  // namespace

ResultRow run_single(const ExperimentConfig& cfg, const SourceData& source, int scenario_index,
                     double fraction, int attacker_count, int repetition) {
  const auto t0 = std::chrono::steady_clock::now();
  ResultRow row;
  row.scenario = scenario_index;
  row.fraction = fraction;
  row.attacker_parties = attacker_count;
  row.repetition = repetition;
  row.seed = seed_mix(cfg.master_seed, static_cast<uint64_t>(scenario_index),
                      static_cast<uint64_t>(repetition));
  row.budget = static_cast<int>(
      std::llround(fraction * cfg.n_parties * static_cast<double>(cfg.train_per_party)));
  if (row.budget > attacker_count * cfg.train_per_party)
    throw InputError("budget " + std::to_string(row.budget) + " exceeds attacker capacity " +
                     std::to_string(attacker_count * cfg.train_per_party));

  const bool text = cfg.source == SourceKind::Bow || cfg.source == SourceKind::BowSynthetic;
  const uint64_t model_seed = seed_mix(row.seed, kSeedModel);
  const uint64_t mi_seed = seed_mix(row.seed, kSeedMembership);

  std::vector<server::EncodedParty> encoded;
  nn::Batch shared_val_batch;
  int n_classes = 0;

  // Metric closures bound below per data kind.
  data::Dataset tab_shared_val;
  attack::AttackSpec tab_spec;
  data::BowCorpus bow_shared_val;
  bool have_attack = false;

  if (!text) {
    PreparedTabular prep = prepare_tabular(cfg, source, row.seed);
    n_classes = prep.shared_val.schema.class_count();
    have_attack = !cfg.attack.attributes.empty();
    if (have_attack) {
      tab_spec = resolve_tabular_attack(cfg, prep.shared_val.schema, row.budget, attacker_count);
      if (row.budget > 0) {
        attack::DistributionOutcome attacked =
            attack::distribute_contamination(prep.parties, tab_spec, seed_mix(row.seed, kSeedAttack));
        prep.parties = std::move(attacked.parties);
      }
    } else if (row.budget > 0) {
      throw InputError("positive contamination fraction but no attack.attributes configured");
    }
    for (const data::PartyData& p : prep.parties) {
      server::EncodedParty e;
      e.party_id = p.party_id;
      e.train = data::encode(p.train);
      e.val = data::encode(p.val);
      encoded.push_back(std::move(e));
    }
    shared_val_batch = data::encode(prep.shared_val);
    tab_shared_val = std::move(prep.shared_val);
  } else {
    PreparedBow prep = prepare_bow(cfg, source, row.seed);
    n_classes = prep.shared_val.class_count();
    have_attack = !cfg.attack.token.empty();
    attack::AttackSpec spec;
    if (have_attack) {
      spec.token = cfg.attack.token;
      spec.contaminated_label = resolve_label(prep.shared_val.label_values, cfg.attack.label);
      spec.budget = row.budget;
      for (int a = 0; a < attacker_count; ++a) spec.attacker_parties.push_back(a);
      if (row.budget > 0) {
        attack::BowDistributionOutcome attacked = attack::distribute_contamination_bow(
            prep.parties, spec, seed_mix(row.seed, kSeedAttack));
        prep.parties = std::move(attacked.parties);
      }
    } else if (row.budget > 0) {
      throw InputError("positive contamination fraction but no attack.token configured");
    }
    // One vocabulary across training corpora, validation slices and the
    // shared set, so every encoded batch has the same width.
    std::vector<data::BowCorpus> all = prep.parties;
    for (const data::BowCorpus& v : prep.party_vals) all.push_back(v);
    all.push_back(prep.shared_val);
    data::align_vocabulary(all);
    for (int p = 0; p < cfg.n_parties; ++p) {
      server::EncodedParty e;
      e.party_id = p;
      e.train = data::bow_encode(all[static_cast<size_t>(p)]);
      e.val = data::bow_encode(all[static_cast<size_t>(cfg.n_parties + p)]);
      encoded.push_back(std::move(e));
    }
    bow_shared_val = all.back();
    shared_val_batch = data::bow_encode(bow_shared_val);
    tab_spec.contaminated_label =
        have_attack ? resolve_label(bow_shared_val.label_values, cfg.attack.label) : 0;
  }

  const nn::MlpConfig model_cfg =
      scenario_model_config(cfg, shared_val_batch.features.cols, n_classes, model_seed);

  server::TrainOutcome outcome = server::train_model_encoded(encoded, model_cfg, std::nullopt);
  const nn::MlpModel& multi = outcome.multi_party_model;

  auto contamination_of = [&](const nn::MlpModel& model) -> double {
    if (!have_attack) return kNaN;
    try {
      if (text)
        return analysis::contamination_accuracy_bow(model, bow_shared_val, cfg.attack.token,
                                                    tab_spec.contaminated_label);
      return analysis::contamination_accuracy(model, tab_shared_val, tab_spec);
    } catch (const UndefinedMetricError& e) {
      if (row.notes.empty()) row.notes = e.what();
      return kNaN;
    }
  };

  row.val_acc_multi = 1.0 - server::validation_error(multi, shared_val_batch);
  row.contam_acc_multi = contamination_of(multi);
  row.per_label_precision =
      precision_string(analysis::per_label_precision(multi, shared_val_batch));
  row.released = released_string(outcome.decisions);

  // Local baselines come from victim parties only, matching the convention
  // that the local model is trained on clean data.
  {
    double val_sum = 0.0, contam_sum = 0.0;
    int val_n = 0, contam_n = 0;
    for (size_t i = 0; i < encoded.size(); ++i) {
      const int id = encoded[i].party_id;
      const bool attacker = row.budget > 0 && id < attacker_count;
      if (attacker && encoded.size() > static_cast<size_t>(attacker_count)) continue;
      const nn::MlpModel& local = outcome.local_models[i];
      val_sum += 1.0 - server::validation_error(local, shared_val_batch);
      ++val_n;
      const double c = contamination_of(local);
      if (!std::isnan(c)) {
        contam_sum += c;
        ++contam_n;
      }
    }
    if (val_n > 0) row.val_acc_local = val_sum / val_n;
    if (contam_n > 0) row.contam_acc_local = contam_sum / contam_n;
  }

  server::PooledData pooled = server::pool_encoded(encoded);

  std::optional<nn::MlpModel> defended;
  if (cfg.defense) {
    defense::DefenseConfig d = *cfg.defense;
    d.seed = seed_mix(row.seed, kSeedDefense);
    defense::AdversarialOutcome adv = defense::adversarial_train(
        pooled.batch, pooled.party_ids, cfg.n_parties, model_cfg, d);
    defended = std::move(adv.f);
    row.val_acc_defended = 1.0 - server::validation_error(*defended, shared_val_batch);
    row.contam_acc_defended = contamination_of(*defended);
    row.released_defended = released_string(
        server::release_decisions(*defended, outcome.local_models, encoded));
  }

  if (cfg.measure_membership) {
    nn::MlpConfig h_cfg = analysis::default_attacker_config(n_classes, cfg.n_parties, mi_seed);
    row.mi_acc_multi = analysis::membership_inference_accuracy(multi, pooled.batch,
                                                               pooled.party_ids, cfg.n_parties,
                                                               h_cfg);
    if (defended)
      row.mi_acc_defended = analysis::membership_inference_accuracy(
          *defended, pooled.batch, pooled.party_ids, cfg.n_parties, h_cfg);
  }

  if (cfg.measure_pivot) {
    analysis::PivotDiagnostic d = analysis::pivot_diagnostic(
        multi, pooled.batch.features, pooled.party_ids, cfg.n_parties, cfg.pivot_bins);
    row.entropy_q = d.entropy_q;
    row.entropy_q_given_f = d.entropy_q_given_f;
    if (defended) {
      analysis::PivotDiagnostic dd = analysis::pivot_diagnostic(
          *defended, pooled.batch.features, pooled.party_ids, cfg.n_parties, cfg.pivot_bins);
      row.entropy_q_given_f_defended = dd.entropy_q_given_f;
    }
  }

  row.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

namespace {

struct Scenario {
  int index = 0;
  double fraction = 0.0;
  int attacker_count = 0;
};

std::vector<Scenario> scenario_list(const ExperimentConfig& cfg) {
  std::vector<Scenario> scenarios;
  int index = 0;
  for (double f : cfg.attack.fractions) {
    for (int a : cfg.attack.attacker_party_counts) {
      scenarios.push_back({index++, f, a});
    }
  }
  return scenarios;
}

void write_csv_row(std::ofstream& out, const std::vector<std::string>& fields) {
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << data::csv_quote(fields[i]);
  }
  out << '\n';
}

struct MetricColumn {
  const char* name;
  double ResultRow::* member;
};

constexpr MetricColumn kMetricColumns[] = {
    {"val_acc_multi", &ResultRow::val_acc_multi},
    {"contam_acc_multi", &ResultRow::contam_acc_multi},
    {"val_acc_local", &ResultRow::val_acc_local},
    {"contam_acc_local", &ResultRow::contam_acc_local},
    {"val_acc_defended", &ResultRow::val_acc_defended},
    {"contam_acc_defended", &ResultRow::contam_acc_defended},
    {"mi_acc_multi", &ResultRow::mi_acc_multi},
    {"mi_acc_defended", &ResultRow::mi_acc_defended},
    {"entropy_q", &ResultRow::entropy_q},
    {"entropy_q_given_f", &ResultRow::entropy_q_given_f},
    {"entropy_q_given_f_defended", &ResultRow::entropy_q_given_f_defended},
};

}  // namespace

void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  if (rows.empty()) throw InputError("write_results_csv: no rows");
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  write_csv_row(out, result_columns());
  for (const ResultRow& r : rows) write_csv_row(out, result_fields(r));
  if (!out) throw InputError("write failed for " + path);
}

void write_results_text(const std::vector<ResultRow>& rows, const std::string& path) {
  if (rows.empty()) throw InputError("write_results_text: no rows");
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  const auto& columns = result_columns();
  for (const ResultRow& r : rows) {
    const auto fields = result_fields(r);
    for (size_t i = 0; i < columns.size(); ++i)
      out << columns[i] << ' ' << (fields[i].empty() ? "-" : fields[i]) << '\n';
    out << '\n';
  }
  if (!out) throw InputError("write failed for " + path);
}

void write_summary_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  if (rows.empty()) throw InputError("write_summary_csv: no rows");
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);

  std::vector<std::string> header = {"scenario", "fraction", "attacker_parties", "repetitions"};
  for (const MetricColumn& m : kMetricColumns) {
    header.push_back(std::string(m.name) + "_mean");
    header.push_back(std::string(m.name) + "_min");
    header.push_back(std::string(m.name) + "_max");
  }
  write_csv_row(out, header);

  int max_scenario = 0;
  for (const ResultRow& r : rows) max_scenario = std::max(max_scenario, r.scenario);
  for (int s = 0; s <= max_scenario; ++s) {
    std::vector<const ResultRow*> group;
    for (const ResultRow& r : rows) {
      if (r.scenario == s) group.push_back(&r);
    }
    if (group.empty()) continue;
    std::vector<std::string> fields = {std::to_string(s), format_g6(group.front()->fraction),
                                       std::to_string(group.front()->attacker_parties),
                                       std::to_string(group.size())};
    for (const MetricColumn& m : kMetricColumns) {
      double sum = 0.0, mn = 0.0, mx = 0.0;
      int n = 0;
      for (const ResultRow* r : group) {
        const double v = r->*(m.member);
        if (std::isnan(v)) continue;
        if (n == 0) {
          mn = mx = v;
        } else {
          mn = std::min(mn, v);
          mx = std::max(mx, v);
        }
        sum += v;
        ++n;
      }
      if (n == 0) {
        fields.push_back("nan");
        fields.push_back("nan");
        fields.push_back("nan");
      } else {
        fields.push_back(format_g6(sum / n));
        fields.push_back(format_g6(mn));
        fields.push_back(format_g6(mx));
      }
    }
    write_csv_row(out, fields);
  }
  if (!out) throw InputError("write failed for " + path);
}

void write_timing_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << "scenario,repetition,wall_seconds\n";
  for (const ResultRow& r : rows)
    out << r.scenario << ',' << r.repetition << ',' << format_g6(r.wall_seconds) << '\n';
}

void write_manifest(const ExperimentConfig& cfg, int scenario_count, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(fnv1a64(cfg.config_hash_source)));
  out << "name " << cfg.name << '\n';
  out << "version " << kVersion << '\n';
  out << "config_hash " << hash << '\n';
  out << "master_seed " << cfg.master_seed << '\n';
  out << "scenarios " << scenario_count << '\n';
  out << "repetitions " << cfg.repetitions << '\n';
  out << "config_begin\n" << cfg.config_hash_source << "config_end\n";
}

std::vector<std::vector<std::string>> read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(data::split_csv_line(line, line_no));
  }
  return rows;
}

RunOutput run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  const SourceData source = load_source(cfg);
  const std::vector<Scenario> scenarios = scenario_list(cfg);

  std::vector<std::vector<ResultRow>> per_scenario(scenarios.size());
  std::atomic<size_t> next{0};

  auto worker = [&]() {
    while (true) {
      const size_t s = next.fetch_add(1);
      if (s >= scenarios.size()) return;
      const Scenario& sc = scenarios[s];
      for (int rep = 0; rep < cfg.repetitions; ++rep) {
        try {
          per_scenario[s].push_back(
              run_single(cfg, source, sc.index, sc.fraction, sc.attacker_count, rep));
        } catch (const std::exception& e) {
          // The scenario aborts; the error lands in this row's notes and the
          // run continues with the next scenario.
          ResultRow row;
          row.scenario = sc.index;
          row.fraction = sc.fraction;
          row.attacker_parties = sc.attacker_count;
          row.repetition = rep;
          row.seed = seed_mix(cfg.master_seed, static_cast<uint64_t>(sc.index),
                              static_cast<uint64_t>(rep));
          row.notes = std::string("error: ") + e.what();
          per_scenario[s].push_back(std::move(row));
          break;
        }
        if (!opts.quiet)
          std::fprintf(stderr, "[%s] scenario %d rep %d done\n", cfg.name.c_str(), sc.index, rep);
      }
    }
  };

  const int jobs = std::max(1, opts.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  RunOutput output;
  for (const std::vector<ResultRow>& rows : per_scenario)
    output.rows.insert(output.rows.end(), rows.begin(), rows.end());

  const std::string dir = opts.out_override.empty() ? cfg.out_dir : opts.out_override;
  std::filesystem::create_directories(dir);
  output.paths.results_csv = dir + "/results.csv";
  output.paths.summary_csv = dir + "/summary.csv";
  output.paths.results_txt = dir + "/results.txt";
  output.paths.manifest_txt = dir + "/manifest.txt";
  output.paths.timing_csv = dir + "/timing.csv";
  write_results_csv(output.rows, output.paths.results_csv);
  write_summary_csv(output.rows, output.paths.summary_csv);
  write_results_text(output.rows, output.paths.results_txt);
  write_manifest(cfg, static_cast<int>(scenarios.size()), output.paths.manifest_txt);
  write_timing_csv(output.rows, output.paths.timing_csv);
  return output;
}

}  // namespace mpml::exp
