#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "orthoe/random.hpp"

namespace orthoe {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

/// Bijective name ↔ id maps for entities and relations. Ids are contiguous
/// from 0 in order of first appearance.
class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> entity_names, std::vector<std::string> relation_names);

  EntityId add_entity(std::string_view name);
  RelationId add_relation(std::string_view name);

  std::optional<EntityId> find_entity(std::string_view name) const;
  std::optional<RelationId> find_relation(std::string_view name) const;

  std::size_t num_entities() const noexcept { return entity_names_.size(); }
  std::size_t num_relations() const noexcept { return relation_names_.size(); }
  const std::string& entity_name(EntityId id) const { return entity_names_.at(id); }
  const std::string& relation_name(RelationId id) const { return relation_names_.at(id); }
  const std::vector<std::string>& entity_names() const noexcept { return entity_names_; }
  const std::vector<std::string>& relation_names() const noexcept { return relation_names_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.entity_names_ == b.entity_names_ && a.relation_names_ == b.relation_names_;
  }

 private:
  std::vector<std::string> entity_names_;
  std::vector<std::string> relation_names_;
  std::unordered_map<std::string, EntityId> entity_ids_;
  std::unordered_map<std::string, RelationId> relation_ids_;
};

enum class Split { kTrain, kValid, kTest };
std::string_view split_name(Split split);

struct TripleSet {
  Split split = Split::kTrain;
  std::vector<Triple> triples;
};

/// Whether unseen names extend the vocabulary or are rejected.
enum class VocabMode { kExtend, kFrozen };

/// Parses tab-separated head⟶relation⟶tail lines.
///
/// Errors: ParseError (with 1-based line number) for a line without exactly
/// three non-empty fields, for blank lines and for duplicate triples;
/// VocabularyError for an unseen name in kFrozen mode.
TripleSet parse_split(std::istream& in, Vocabulary& vocab, Split split, VocabMode mode);
TripleSet load_split(const std::filesystem::path& path, Vocabulary& vocab, Split split,
                     VocabMode mode);

/// A dataset directory's three splits over a shared vocabulary.
struct Dataset {
  std::string name;
  Vocabulary vocab;
  TripleSet train;
  TripleSet valid;
  TripleSet test;
};

/// Loads train.txt, valid.txt and test.txt from `dir`, assigning ids in
/// first-appearance order over train, then valid, then test. With a frozen
/// vocabulary every name must already be known.
Dataset load_dataset(const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir, const Vocabulary& frozen);

/// Binary dataset cache: JSON manifest plus little-endian uint32 triples.
void save_dataset_cache(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset_cache(const std::filesystem::path& path);
/// Directory of TSVs or a cache file.
Dataset load_dataset_any(const std::filesystem::path& path);

/// Known-true answers per (anchor, relation) over every split, used to
/// filter competing candidates during ranking. For tail prediction the
/// anchor is the head; the head-side index keys on the tail.
class FilterIndex {
 public:
  void add(EntityId anchor, RelationId relation, EntityId answer);
  /// Sorts and deduplicates every answer list. Called by the builders.
  void finalize();

  /// Sorted known answers; empty span when none.
  std::span<const EntityId> answers(EntityId anchor, RelationId relation) const;
  bool contains(EntityId anchor, RelationId relation, EntityId answer) const;
  std::size_t num_keys() const noexcept { return map_.size(); }

  friend bool operator==(const FilterIndex&, const FilterIndex&) = default;

 private:
  static std::uint64_t key(EntityId anchor, RelationId relation) noexcept {
    return (static_cast<std::uint64_t>(anchor) << 32) | relation;
  }
  std::unordered_map<std::uint64_t, std::vector<EntityId>> map_;
};

/// (head, relation) → tails over all given splits.
FilterIndex build_filter_index(std::span<const TripleSet* const> splits);
FilterIndex build_filter_index(const Dataset& data);
/// (tail, relation) → heads, for the optional head-side evaluation.
FilterIndex build_head_filter_index(const Dataset& data);

/// k entity ids drawn uniformly with replacement from [0, num_entities). The
/// true tail is not excluded.
std::vector<EntityId> sample_negatives(std::size_t num_entities, std::size_t k, Rng& rng);

/// Writes one name per line, in id order.
void write_names(const std::vector<std::string>& names, const std::filesystem::path& path);

}  // namespace orthoe
