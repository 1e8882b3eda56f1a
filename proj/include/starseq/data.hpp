#pragma once

// Interaction-log ingestion, implicit-feedback preprocessing, leave-one-out
// splitting, fixed-length windows, activity buckets, and a line-based dataset
// snapshot for reuse between CLI invocations.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "starseq/common.hpp"

namespace starseq {

struct Interaction {
  std::string user;
  std::string item;
  double rating = 0;
  std::int64_t timestamp = 0;
};

struct InteractionLog {
  std::vector<Interaction> records;
  std::size_t data_lines = 0;      // non-empty lines considered (header excluded)
  std::size_t malformed = 0;       // skipped: wrong arity or unparsable fields
  std::size_t deduplicated = 0;    // dropped repeats of a (user,item,timestamp)
  bool header_skipped = false;
};

// TSV columns: user, item, rating, timestamp (extra columns ignored).
// A leading header row is detected by a non-numeric rating field.
// More than 1% malformed data lines aborts ingestion.
InteractionLog parse_tsv(std::istream& in);
InteractionLog load_tsv(const std::string& path);
void write_tsv(const InteractionLog& log, const std::string& path);

struct PrepOptions {
  int min_user = 5;                // minimum interactions per retained user
  int min_item = 5;                // minimum interactions per retained item
  double rating_threshold = 4.0;   // keep records with rating >= threshold
};

// Dense-index dataset. vid 0 is the reserved padding item and never appears
// inside a sequence; real users/items are indexed in lexicographic id order.
struct Dataset {
  std::vector<std::string> user_ids;        // uid -> external id
  std::vector<std::string> item_ids;        // vid -> external id; [0] is the pad slot
  std::vector<std::vector<int>> sequences;  // uid -> chronological vids

  int user_count() const { return static_cast<int>(user_ids.size()); }
  int catalog_size() const { return static_cast<int>(item_ids.size()); }  // pad included
  int item_count() const { return catalog_size() - 1; }
};

// Rating filter, then iterative user/item minimum-count filtering to a fixed
// point, then dense reindexing. Sequences sort by timestamp; ties keep input
// order.
Dataset preprocess(const InteractionLog& log, const PrepOptions& opt);

// Per-user leave-one-out protocol: last item tests, second-last validates,
// the rest trains. Users with fewer than 3 interactions are excluded.
struct Split {
  std::vector<int> uids;                  // retained users, ascending
  std::vector<std::vector<int>> train;    // aligned with uids
  std::vector<int> val_target;
  std::vector<int> test_target;
  std::vector<int> excluded;              // uids with |S| < 3

  std::size_t user_count() const { return uids.size(); }
};

Split split_leave_one_out(const Dataset& ds);

// Right-aligned window of the last n items, left-padded with vid 0.
struct FixedSequence {
  std::vector<int> b;
  int pad_count = 0;

  int length() const { return static_cast<int>(b.size()); }
  bool all_padding() const { return pad_count == length(); }
};

FixedSequence to_fixed_length(const std::vector<int>& seq, int n);

// Ten percentile buckets of users by training-history length: five from the
// most active end (top 0-10% ... 40-50%) and five from the least active end.
// Boundaries use rank index floor(q*|U|), so with |U| not divisible by 10 the
// middle ranks may stay unbucketed. `members` holds indices into the split's
// per-user arrays, ordered ascending.
struct Bucket {
  std::string name;
  std::vector<int> members;
};

std::vector<Bucket> activity_buckets(const Split& split);

// Versioned tab-separated snapshot of a Dataset. The manifest data hash is
// the FNV-1a of exactly these bytes.
std::string serialize_snapshot(const Dataset& ds);
Dataset parse_snapshot(std::istream& in);
void save_snapshot(const Dataset& ds, const std::string& path);
Dataset load_snapshot(const std::string& path);
std::uint64_t snapshot_hash(const Dataset& ds);

// Deterministic synthetic log: `items` form one seeded permutation cycle and
// each user emits `steps` consecutive cycle elements from a random offset, so
// every item's successor is exactly predictable from the last item.
struct SynthOptions {
  int users = 200;
  int items = 50;
  int steps = 30;
};

InteractionLog synth_log(const SynthOptions& opt, std::uint64_t seed);

}  // namespace starseq
