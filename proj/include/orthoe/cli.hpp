#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "orthoe/kg_data.hpp"
#include "orthoe/model.hpp"
#include "orthoe/optim.hpp"

namespace orthoe {

/// Contents of a key=value config file.
struct RunConfig {
  ModelConfig model;
  std::size_t eval_every = 1;
  std::size_t patience = 50;

  void validate() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// One `key = value` per line; `#` starts a comment. Keys are the
/// ModelConfig fields plus eval_every and patience. Unknown or repeated keys
/// and malformed values throw ConfigError. The result is validated.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);
std::string format_config(const RunConfig& config);

struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  ModelConfig config;
  std::string dataset_name;
  Vocabulary vocab;
  std::size_t epoch = 0;
  double valid_mrr = 0.0;
  ModelParams params;
  RelationOptimizer rel_opt;
  EntityOptimizer ent_opt;
};

/// Magic, JSON manifest, then the raw little-endian f64 payload: entity
/// matrices, biases, relation blocks, per-block Adam m, v and step count,
/// entity and bias Adagrad accumulators. Throws PreconditionError if any
/// block is farther than 1e−6 from orthogonal.
std::vector<char> serialize_checkpoint(const Checkpoint& ckpt);
/// Rejects wrong magic, version, endianness or width (CompatibilityError),
/// truncation or trailing bytes (ParseError) and non-orthogonal blocks
/// (PreconditionError).
Checkpoint deserialize_checkpoint(std::span<const char> bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Up to `limit` candidates closest to `name` by edit distance.
std::vector<std::string> near_matches(const std::string& name,
                                      const std::vector<std::string>& candidates,
                                      std::size_t limit = 3);
std::size_t edit_distance(const std::string& a, const std::string& b);

struct CommandOptions {
  std::filesystem::path config;
  std::filesystem::path data;
  std::filesystem::path out;
  std::filesystem::path checkpoint;
  std::string split = "valid";
  std::string kind;
  std::vector<std::string> relations;
  std::size_t threads = 1;
  std::optional<std::uint64_t> seed;
  std::size_t bins = 100;
  bool both_sides = false;
};

/// Parses the TSV dataset in --data and writes a binary cache to --out plus
/// entities.txt and relations.txt next to it.
int cmd_prepare(const CommandOptions& opts, std::ostream& out);
/// Trains into --out: checkpoint.bin (best valid MRR), metrics.tsv,
/// timing.tsv and config.txt.
int cmd_train(const CommandOptions& opts, std::ostream& out);
/// Prints a metrics table and the `mrr=… h1=… h3=… h10=… n=…` line.
int cmd_eval(const CommandOptions& opts, std::ostream& out);
/// Writes <kind>.csv and <kind>.json into --out.
int cmd_analyze(const CommandOptions& opts, std::ostream& out);
int cmd_param_count(const CommandOptions& opts, std::ostream& out);

/// Process exit status for an error escaping a command.
int exit_code_for(const std::exception& e) noexcept;

}  // namespace orthoe
