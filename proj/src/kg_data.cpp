#include "orthoe/kg_data.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "orthoe/errors.hpp"
#include "orthoe/io.hpp"

namespace orthoe {

namespace {

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    const std::uint64_t a = (static_cast<std::uint64_t>(t.head) << 32) | t.tail;
    return static_cast<std::size_t>(mix64(a ^ mix64(t.relation)));
  }
};

constexpr char kCacheMagic[8] = {'O', 'R', 'T', 'H', 'O', 'E', 'D', 'S'};
constexpr int kCacheVersion = 1;

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> entity_names,
                       std::vector<std::string> relation_names) {
  for (const auto& n : entity_names) {
    if (find_entity(n)) throw VocabularyError("duplicate entity name '" + n + "'");
    add_entity(n);
  }
  for (const auto& n : relation_names) {
    if (find_relation(n)) throw VocabularyError("duplicate relation name '" + n + "'");
    add_relation(n);
  }
}

EntityId Vocabulary::add_entity(std::string_view name) {
  auto [it, inserted] =
      entity_ids_.try_emplace(std::string(name), static_cast<EntityId>(entity_names_.size()));
  if (inserted) entity_names_.emplace_back(name);
  return it->second;
}

RelationId Vocabulary::add_relation(std::string_view name) {
  auto [it, inserted] = relation_ids_.try_emplace(
      std::string(name), static_cast<RelationId>(relation_names_.size()));
  if (inserted) relation_names_.emplace_back(name);
  return it->second;
}

std::optional<EntityId> Vocabulary::find_entity(std::string_view name) const {
  auto it = entity_ids_.find(std::string(name));
  if (it == entity_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<RelationId> Vocabulary::find_relation(std::string_view name) const {
  auto it = relation_ids_.find(std::string(name));
  if (it == relation_ids_.end()) return std::nullopt;
  return it->second;
}

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "?";
}

TripleSet parse_split(std::istream& in, Vocabulary& vocab, Split split, VocabMode mode) {
  TripleSet out{split, {}};
  std::unordered_map<Triple, std::size_t, TripleHash> seen;
  std::string line;
  std::size_t line_no = 0;
  const std::string where = std::string(split_name(split)) + " line ";

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view fields[3];
    std::size_t count = 0;
    std::size_t start = 0;
    bool too_many = false;
    for (;;) {
      const std::size_t tab = line.find('\t', start);
      const std::string_view field =
          std::string_view(line).substr(start, tab == std::string::npos ? std::string::npos
                                                                         : tab - start);
      if (count == 3) {
        too_many = true;
        break;
      }
      fields[count++] = field;
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (too_many || count != 3 || fields[0].empty() || fields[1].empty() ||
        fields[2].empty()) {
      throw ParseError(where + std::to_string(line_no) +
                           ": expected three tab-separated fields head<TAB>relation<TAB>tail",
                       line_no);
    }

    Triple t;
    if (mode == VocabMode::kExtend) {
      t.head = vocab.add_entity(fields[0]);
      t.relation = vocab.add_relation(fields[1]);
      t.tail = vocab.add_entity(fields[2]);
    } else {
      auto h = vocab.find_entity(fields[0]);
      auto r = vocab.find_relation(fields[1]);
      auto tl = vocab.find_entity(fields[2]);
      if (!h || !tl) {
        throw VocabularyError(where + std::to_string(line_no) + ": unknown entity '" +
                              std::string(!h ? fields[0] : fields[2]) + "'");
      }
      if (!r) {
        throw VocabularyError(where + std::to_string(line_no) + ": unknown relation '" +
                              std::string(fields[1]) + "'");
      }
      t = {*h, *r, *tl};
    }
    auto [it, inserted] = seen.try_emplace(t, line_no);
    if (!inserted) {
      throw ParseError(where + std::to_string(line_no) + ": duplicate of line " +
                           std::to_string(it->second),
                       line_no);
    }
    out.triples.push_back(t);
  }
  return out;
}

TripleSet load_split(const std::filesystem::path& path, Vocabulary& vocab, Split split,
                     VocabMode mode) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  try {
    return parse_split(in, vocab, split, mode);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

namespace {

Dataset load_dataset_impl(const std::filesystem::path& dir, Vocabulary vocab,
                          VocabMode mode) {
  Dataset data;
  data.name = dir.filename().empty() ? dir.parent_path().filename().string()
                                     : dir.filename().string();
  data.vocab = std::move(vocab);
  data.train = load_split(dir / "train.txt", data.vocab, Split::kTrain, mode);
  data.valid = load_split(dir / "valid.txt", data.vocab, Split::kValid, mode);
  data.test = load_split(dir / "test.txt", data.vocab, Split::kTest, mode);
  return data;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& dir) {
  return load_dataset_impl(dir, Vocabulary{}, VocabMode::kExtend);
}

Dataset load_dataset(const std::filesystem::path& dir, const Vocabulary& frozen) {
  return load_dataset_impl(dir, frozen, VocabMode::kFrozen);
}

void save_dataset_cache(const Dataset& data, const std::filesystem::path& path) {
  nlohmann::json manifest = {
      {"format_version", kCacheVersion},
      {"name", data.name},
      {"endianness", "little"},
      {"entity_names", data.vocab.entity_names()},
      {"relation_names", data.vocab.relation_names()},
      {"counts",
       {{"train", data.train.triples.size()},
        {"valid", data.valid.triples.size()},
        {"test", data.test.triples.size()}}},
  };
  ByteWriter w;
  w.raw(std::span<const char>(kCacheMagic, sizeof kCacheMagic));
  w.string(manifest.dump());
  for (const TripleSet* s : {&data.train, &data.valid, &data.test})
    for (const Triple& t : s->triples) {
      w.u32(t.head);
      w.u32(t.relation);
      w.u32(t.tail);
    }
  write_file(path, w.bytes());
}

Dataset load_dataset_cache(const std::filesystem::path& path) {
  const std::vector<char> bytes = read_file(path);
  ByteReader r(bytes);
  const auto magic = r.raw(sizeof kCacheMagic);
  if (!std::equal(magic.begin(), magic.end(), kCacheMagic)) {
    throw ParseError(path.string() + ": not a dataset cache", 0);
  }
  const nlohmann::json manifest = nlohmann::json::parse(r.string());
  if (manifest.at("format_version").get<int>() != kCacheVersion) {
    throw CompatibilityError(path.string() + ": unsupported cache version");
  }
  Dataset data;
  data.name = manifest.at("name").get<std::string>();
  data.vocab = Vocabulary(manifest.at("entity_names").get<std::vector<std::string>>(),
                          manifest.at("relation_names").get<std::vector<std::string>>());
  const auto& counts = manifest.at("counts");
  auto read_split = [&](Split split, std::size_t n) {
    TripleSet s{split, {}};
    s.triples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      Triple t{r.u32(), r.u32(), r.u32()};
      if (t.head >= data.vocab.num_entities() || t.tail >= data.vocab.num_entities() ||
          t.relation >= data.vocab.num_relations()) {
        throw IndexError(path.string() + ": triple id out of vocabulary range");
      }
      s.triples.push_back(t);
    }
    return s;
  };
  data.train = read_split(Split::kTrain, counts.at("train").get<std::size_t>());
  data.valid = read_split(Split::kValid, counts.at("valid").get<std::size_t>());
  data.test = read_split(Split::kTest, counts.at("test").get<std::size_t>());
  if (!r.at_end()) throw ParseError(path.string() + ": trailing bytes", 0);
  return data;
}

Dataset load_dataset_any(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return load_dataset(path);
  return load_dataset_cache(path);
}

// ---------------------------------------------------------------------------
// FilterIndex

void FilterIndex::add(EntityId anchor, RelationId relation, EntityId answer) {
  map_[key(anchor, relation)].push_back(answer);
}

void FilterIndex::finalize() {
  for (auto& [k, v] : map_) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
}

std::span<const EntityId> FilterIndex::answers(EntityId anchor, RelationId relation) const {
  auto it = map_.find(key(anchor, relation));
  if (it == map_.end()) return {};
  return it->second;
}

bool FilterIndex::contains(EntityId anchor, RelationId relation, EntityId answer) const {
  auto a = answers(anchor, relation);
  return std::binary_search(a.begin(), a.end(), answer);
}

FilterIndex build_filter_index(std::span<const TripleSet* const> splits) {
  FilterIndex index;
  for (const TripleSet* s : splits)
    for (const Triple& t : s->triples) index.add(t.head, t.relation, t.tail);
  index.finalize();
  return index;
}

FilterIndex build_filter_index(const Dataset& data) {
  const TripleSet* splits[] = {&data.train, &data.valid, &data.test};
  return build_filter_index(splits);
}

FilterIndex build_head_filter_index(const Dataset& data) {
  FilterIndex index;
  for (const TripleSet* s : {&data.train, &data.valid, &data.test})
    for (const Triple& t : s->triples) index.add(t.tail, t.relation, t.head);
  index.finalize();
  return index;
}

std::vector<EntityId> sample_negatives(std::size_t num_entities, std::size_t k, Rng& rng) {
  if (k == 0) return {};
  if (num_entities < 2) {
    throw PreconditionError("sample_negatives: need at least two entities");
  }
  std::uniform_int_distribution<EntityId> pick(0, static_cast<EntityId>(num_entities - 1));
  std::vector<EntityId> out(k);
  for (auto& e : out) e = pick(rng);
  return out;
}

void write_names(const std::vector<std::string>& names, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& n : names) out << n << '\n';
}

}  // namespace orthoe
