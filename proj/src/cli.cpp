#include "orthoe/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "orthoe/errors.hpp"
#include "orthoe/eval.hpp"
#include "orthoe/io.hpp"
#include "orthoe/patterns.hpp"
#include "orthoe/trainer.hpp"

namespace orthoe {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config

void RunConfig::validate() const {
  model.validate();
  if (eval_every == 0) throw ConfigError("eval_every must be at least 1");
  if (patience == 0) throw ConfigError("patience must be at least 1");
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& text, std::size_t line) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("line " + std::to_string(line) + ": bad value '" + text + "' for " + key);
  }
  return value;
}

}  // namespace

RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  ModelConfig& m = cfg.model;
  std::map<std::string, std::string> seen;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.emplace(key, value).second) {
      throw ConfigError("line " + std::to_string(line_no) + ": repeated key " + key);
    }
    auto size = [&] { return parse_number<std::size_t>(key, value, line_no); };
    auto real = [&] { return parse_number<double>(key, value, line_no); };
    if (key == "n") m.n = size();
    else if (key == "m") m.m = size();
    else if (key == "d") m.d = size();
    else if (key == "negative_k") m.negative_k = size();
    else if (key == "lr_entity") m.lr_entity = real();
    else if (key == "lr_relation") m.lr_relation = real();
    else if (key == "batch_size") m.batch_size = size();
    else if (key == "max_epochs") m.max_epochs = size();
    else if (key == "seed") m.seed = parse_number<std::uint64_t>(key, value, line_no);
    else if (key == "eval_every") cfg.eval_every = size();
    else if (key == "patience") cfg.patience = size();
    else throw ConfigError("line " + std::to_string(line_no) + ": unknown key " + key);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in);
}

std::string format_config(const RunConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "n = " << c.model.n << "\nm = " << c.model.m << "\nd = " << c.model.d
     << "\nnegative_k = " << c.model.negative_k << "\nlr_entity = " << c.model.lr_entity
     << "\nlr_relation = " << c.model.lr_relation << "\nbatch_size = " << c.model.batch_size
     << "\nmax_epochs = " << c.model.max_epochs << "\nseed = " << c.model.seed
     << "\neval_every = " << c.eval_every << "\npatience = " << c.patience << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Checkpoint

namespace {

constexpr char kCheckpointMagic[8] = {'O', 'R', 'T', 'H', 'O', 'E', 'C', 'K'};

nlohmann::ordered_json config_json(const ModelConfig& c) {
  return {{"n", c.n},
          {"m", c.m},
          {"d", c.d},
          {"negative_k", c.negative_k},
          {"lr_entity", c.lr_entity},
          {"lr_relation", c.lr_relation},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"seed", c.seed}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.n = j.at("n").get<std::size_t>();
  c.m = j.at("m").get<std::size_t>();
  c.d = j.at("d").get<std::size_t>();
  c.negative_k = j.at("negative_k").get<std::size_t>();
  c.lr_entity = j.at("lr_entity").get<double>();
  c.lr_relation = j.at("lr_relation").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.max_epochs = j.at("max_epochs").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

std::vector<char> serialize_checkpoint(const Checkpoint& ck) {
  const EntityTable& ent = ck.params.entities;
  const RelationTable& rel = ck.params.relations;
  if (ent.count() != ck.vocab.num_entities() || rel.count() != ck.vocab.num_relations()) {
    throw ShapeError("checkpoint parameters do not match vocabulary sizes");
  }
  if (ent.n() != ck.config.n || ent.m() != ck.config.m || rel.dim() != ck.config.n ||
      rel.block_dim() != ck.config.d) {
    throw ShapeError("checkpoint parameters do not match the config");
  }
  const double resid = rel.max_orthogonality_residual();
  if (!(resid <= BlockDiagOrthogonal::kOrthogonalityTolerance)) {
    throw PreconditionError("refusing to save relation blocks with orthogonality residual " +
                            std::to_string(resid));
  }

  nlohmann::ordered_json manifest;
  manifest["format_version"] = Checkpoint::kFormatVersion;
  manifest["endianness"] = "little";
  manifest["numeric_width"] = 64;
  manifest["dataset"] = ck.dataset_name;
  manifest["epoch"] = ck.epoch;
  manifest["valid_mrr"] = ck.valid_mrr;
  manifest["config"] = config_json(ck.config);
  manifest["num_entities"] = ck.vocab.num_entities();
  manifest["num_relations"] = ck.vocab.num_relations();
  manifest["entity_names"] = ck.vocab.entity_names();
  manifest["relation_names"] = ck.vocab.relation_names();

  ByteWriter w;
  w.raw(kCheckpointMagic);
  w.string(manifest.dump());
  w.f64s(ent.values());
  w.f64s(ent.biases());
  for (RelationId r = 0; r < rel.count(); ++r)
    for (const auto& b : rel[r].blocks()) w.f64s(b.values());

  const std::size_t d = ck.config.d;
  const std::size_t nb = ck.config.n / d;
  for (RelationId r = 0; r < rel.count(); ++r) {
    for (std::size_t b = 0; b < nb; ++b) {
      const RiemannianAdamState& s = ck.rel_opt.states(r)[b];
      const DenseMatrix zero(d, d);
      w.f64s((s.m.size() ? s.m : zero).values());
      w.f64s((s.v.size() ? s.v : zero).values());
      w.u64(s.step_count);
    }
  }
  w.f64s(ck.ent_opt.accum());
  w.f64s(ck.ent_opt.bias_accum());
  return w.bytes();
}

Checkpoint deserialize_checkpoint(std::span<const char> bytes) {
  ByteReader r(bytes);
  const auto magic = r.raw(sizeof kCheckpointMagic);
  if (!std::equal(magic.begin(), magic.end(), kCheckpointMagic)) {
    throw CompatibilityError("not a checkpoint file");
  }
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(r.string());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint manifest: ") + e.what(), 0);
  }

  Checkpoint ck;
  try {
    if (manifest.at("format_version").get<int>() != Checkpoint::kFormatVersion) {
      throw CompatibilityError("unsupported checkpoint format version " +
                               manifest.at("format_version").dump());
    }
    if (manifest.at("endianness").get<std::string>() != "little") {
      throw CompatibilityError("checkpoint endianness tag is not 'little'");
    }
    if (manifest.at("numeric_width").get<int>() != 64) {
      throw CompatibilityError("checkpoint numeric width is not 64");
    }
    ck.config = config_from_json(manifest.at("config"));
    ck.dataset_name = manifest.at("dataset").get<std::string>();
    ck.epoch = manifest.at("epoch").get<std::size_t>();
    ck.valid_mrr = manifest.at("valid_mrr").get<double>();
    ck.vocab = Vocabulary(manifest.at("entity_names").get<std::vector<std::string>>(),
                          manifest.at("relation_names").get<std::vector<std::string>>());
    if (manifest.at("num_entities").get<std::size_t>() != ck.vocab.num_entities() ||
        manifest.at("num_relations").get<std::size_t>() != ck.vocab.num_relations()) {
      throw ParseError("checkpoint vocabulary counts disagree with the name lists", 0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint manifest: ") + e.what(), 0);
  }
  ck.config.validate();

  const ModelConfig& c = ck.config;
  const std::size_t ne = ck.vocab.num_entities();
  const std::size_t nr = ck.vocab.num_relations();
  const std::size_t nb = c.n / c.d;

  EntityTable ent(ne, c.n, c.m);
  r.f64s(ent.values());
  r.f64s(ent.biases());
  std::vector<BlockDiagOrthogonal> rels;
  rels.reserve(nr);
  for (std::size_t i = 0; i < nr; ++i) {
    std::vector<DenseMatrix> blocks;
    for (std::size_t b = 0; b < nb; ++b) {
      DenseMatrix x(c.d, c.d);
      r.f64s(x.values());
      blocks.push_back(std::move(x));
    }
    rels.push_back(BlockDiagOrthogonal::from_blocks(std::move(blocks)));
  }
  ck.params = ModelParams{std::move(ent), RelationTable(std::move(rels))};

  ck.rel_opt = RelationOptimizer(ck.params.relations, c.lr_relation);
  for (RelationId i = 0; i < nr; ++i) {
    for (std::size_t b = 0; b < nb; ++b) {
      RiemannianAdamState& s = ck.rel_opt.states(i)[b];
      r.f64s(s.m.values());
      r.f64s(s.v.values());
      s.step_count = r.u64();
    }
  }
  ck.ent_opt = EntityOptimizer(ck.params.entities, c.lr_entity);
  r.f64s(ck.ent_opt.accum());
  r.f64s(ck.ent_opt.bias_accum());
  if (!r.at_end()) throw ParseError("checkpoint has trailing bytes", 0);
  return ck;
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const fs::path& path) {
  return deserialize_checkpoint(read_file(path));
}

// ---------------------------------------------------------------------------
// Name lookup

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::vector<std::string> near_matches(const std::string& name,
                                      const std::vector<std::string>& candidates,
                                      std::size_t limit) {
  std::vector<std::pair<std::size_t, std::string>> scored;
  scored.reserve(candidates.size());
  for (const auto& c : candidates) scored.emplace_back(edit_distance(name, c), c);
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < scored.size() && i < limit; ++i) out.push_back(scored[i].second);
  return out;
}

// ---------------------------------------------------------------------------
// Commands

namespace {

void require(const fs::path& p, const char* flag) {
  if (p.empty()) throw ConfigError(std::string("missing required flag ") + flag);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Dataset dataset_for(const fs::path& data) {
  Dataset ds = load_dataset_any(data);
  if (ds.name.empty()) ds.name = fs::path(data).filename().string();
  return ds;
}

RelationId lookup_relation(const Vocabulary& vocab, const std::string& name) {
  if (auto id = vocab.find_relation(name)) return *id;
  std::string msg = "unknown relation '" + name + "'";
  const auto near = near_matches(name, vocab.relation_names());
  if (!near.empty()) {
    msg += "; did you mean";
    for (std::size_t i = 0; i < near.size(); ++i) msg += (i ? ", '" : " '") + near[i] + "'";
    msg += "?";
  }
  throw VocabularyError(msg);
}

}  // namespace

int cmd_prepare(const CommandOptions& opts, std::ostream& out) {
  require(opts.data, "--data");
  require(opts.out, "--out");
  const Dataset ds = load_dataset(opts.data);
  fs::path cache = opts.out;
  if (fs::is_directory(cache) || cache.extension().empty()) {
    fs::create_directories(cache);
    cache /= "dataset.bin";
  } else if (cache.has_parent_path()) {
    fs::create_directories(cache.parent_path());
  }
  save_dataset_cache(ds, cache);
  write_names(ds.vocab.entity_names(), cache.parent_path() / "entities.txt");
  write_names(ds.vocab.relation_names(), cache.parent_path() / "relations.txt");
  out << "dataset " << ds.name << ": " << ds.vocab.num_entities() << " entities, "
      << ds.vocab.num_relations() << " relations, " << ds.train.triples.size() << " train / "
      << ds.valid.triples.size() << " valid / " << ds.test.triples.size() << " test\n"
      << "wrote " << cache.string() << "\n";
  return 0;
}

int cmd_train(const CommandOptions& opts, std::ostream& out) {
  require(opts.config, "--config");
  require(opts.data, "--data");
  require(opts.out, "--out");
  RunConfig rc = load_config(opts.config);
  if (opts.seed) rc.model.seed = *opts.seed;
  rc.validate();

  const Dataset ds = dataset_for(opts.data);
  const FilterIndex filter = build_filter_index(ds);
  fs::create_directories(opts.out);
  {
    const std::string text = format_config(rc);
    write_file(opts.out / "config.txt", std::span<const char>(text.data(), text.size()));
  }

  std::ofstream metrics(opts.out / "metrics.tsv");
  std::ofstream timing(opts.out / "timing.tsv");
  metrics << "epoch\ttrain_loss\tvalid_mrr\n";
  timing << "epoch\tseconds\n";

  TrainOptions to{rc.model, rc.eval_every, rc.patience, opts.threads};
  TrainCallbacks cb;
  cb.on_epoch = [&](const EpochRecord& rec) {
    metrics << rec.epoch << '\t' << fmt("%.10g", rec.train_loss) << '\t'
            << (rec.valid_mrr ? fmt("%.10g", *rec.valid_mrr) : std::string("-")) << '\n';
    metrics.flush();
    timing << rec.epoch << '\t' << fmt("%.3f", rec.seconds) << '\n';
    timing.flush();
    out << "epoch " << rec.epoch << " loss " << fmt("%.6f", rec.train_loss);
    if (rec.valid_mrr) out << " valid_mrr " << fmt("%.6f", *rec.valid_mrr);
    out << "\n";
  };
  cb.on_best = [&](const TrainState& st) {
    Checkpoint ck{rc.model, ds.name, ds.vocab, st.epoch, st.valid_mrr,
                  st.params,  st.rel_opt, st.ent_opt};
    ck.params.relations.stabilize();
    save_checkpoint(ck, opts.out / "checkpoint.bin");
  };
  const TrainResult res =
      train_orthogonal(ds.train, ds.valid, filter, ds.vocab.num_entities(),
                       ds.vocab.num_relations(), to, cb);
  out << "best_epoch=" << res.best_epoch << " valid_mrr=" << fmt("%.6f", res.best_valid_mrr)
      << " epochs_run=" << res.history.size() << "\n";
  return 0;
}

int cmd_eval(const CommandOptions& opts, std::ostream& out) {
  require(opts.checkpoint, "--checkpoint");
  require(opts.data, "--data");
  const Checkpoint ck = load_checkpoint(opts.checkpoint);
  const Dataset ds = dataset_for(opts.data);
  if (!(ds.vocab == ck.vocab)) {
    throw CompatibilityError(
        "checkpoint vocabulary (" + std::to_string(ck.vocab.num_entities()) + " entities, " +
        std::to_string(ck.vocab.num_relations()) + " relations) does not match the data (" +
        std::to_string(ds.vocab.num_entities()) + " entities, " +
        std::to_string(ds.vocab.num_relations()) + " relations)");
  }
  const TripleSet* split = nullptr;
  if (opts.split == "valid") split = &ds.valid;
  else if (opts.split == "test") split = &ds.test;
  else throw ConfigError("--split must be valid or test, got '" + opts.split + "'");

  const FilterIndex filter = build_filter_index(ds);
  const Metrics m =
      opts.both_sides
          ? evaluate_both_sides(ck.params.entities, ck.params.relations, *split, filter,
                                build_head_filter_index(ds), opts.threads)
          : evaluate(ck.params.entities, ck.params.relations, *split, filter, opts.threads);
  out << "split    " << opts.split << (opts.both_sides ? " (head+tail)" : " (tail)") << "\n"
      << "queries  " << m.count << "\n"
      << "MRR      " << fmt("%.4f", m.mrr) << "\n"
      << "Hits@1   " << fmt("%.4f", m.hits(1)) << "\n"
      << "Hits@3   " << fmt("%.4f", m.hits(3)) << "\n"
      << "Hits@10  " << fmt("%.4f", m.hits(10)) << "\n"
      << m.to_record() << "\n";
  return 0;
}

int cmd_analyze(const CommandOptions& opts, std::ostream& out) {
  require(opts.checkpoint, "--checkpoint");
  if (opts.kind.empty()) throw ConfigError("missing required flag --kind");
  const Checkpoint ck = load_checkpoint(opts.checkpoint);
  std::vector<BlockDiagOrthogonal> rels;
  for (const auto& name : opts.relations) {
    rels.push_back(ck.params.relations[lookup_relation(ck.vocab, name)]);
  }
  const ResidualReport rep = analyze_relations(opts.kind, rels, opts.relations, opts.bins);
  const fs::path dir = opts.out.empty() ? fs::path(".") : opts.out;
  fs::create_directories(dir);
  const std::string csv = histogram_csv(rep);
  const std::string json = report_json(rep);
  write_file(dir / (opts.kind + ".csv"), std::span<const char>(csv.data(), csv.size()));
  write_file(dir / (opts.kind + ".json"), std::span<const char>(json.data(), json.size()));
  out << "kind=" << rep.kind << " residual_norm=" << fmt("%.6e", rep.residual_norm);
  if (rep.kind == "commutator-gap") out << " swapped_norm=" << fmt("%.6e", rep.swapped_norm);
  out << "\n";
  return 0;
}

int cmd_param_count(const CommandOptions& opts, std::ostream& out) {
  require(opts.config, "--config");
  const RunConfig rc = load_config(opts.config);
  const ModelConfig& c = rc.model;
  std::size_t ne = 0;
  if (!opts.data.empty()) ne = dataset_for(opts.data).vocab.num_entities();
  const ParameterCounts pc = parameter_counts(c, ne);
  // A 2×2 rotation model over the same n·m entity entries has one angle per
  // pair of entries.
  const double reference = static_cast<double>(c.n * c.m) / 2.0;
  out << "entity_params_per_entity=" << pc.entity_params_per_entity << "\n"
      << "relation_params_per_relation=" << pc.relation_params_per_relation << "\n"
      << "rotation_reference_per_relation=" << fmt("%g", reference) << "\n"
      << "relation_ratio_vs_rotation="
      << fmt("%.6g", static_cast<double>(pc.relation_params_per_relation) / reference) << "\n";
  if (ne) out << "entity_params_total=" << pc.entity_params_total << "\n";
  return 0;
}

int exit_code_for(const std::exception& e) noexcept {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const ParseError*>(&e)) return 3;
  if (dynamic_cast<const VocabularyError*>(&e)) return 4;
  if (dynamic_cast<const CompatibilityError*>(&e)) return 5;
  if (dynamic_cast<const NumericError*>(&e)) return 6;
  if (dynamic_cast<const Error*>(&e)) return 7;
  return 1;
}

}  // namespace orthoe
