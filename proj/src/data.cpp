#include "starseq/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace starseq {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end;
}

bool parse_int64(const std::string& s, std::int64_t& out) {
  if (s.empty()) return false;
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

InteractionLog parse_tsv(std::istream& in) {
  InteractionLog log;
  std::set<std::tuple<std::string, std::string, std::int64_t>> seen;
  std::string raw;
  bool first_data_line = true;
  while (std::getline(in, raw)) {
    std::string line = strip_cr(raw);
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (first_data_line) {
      first_data_line = false;
      double probe;
      if (fields.size() >= 4 && !parse_double(fields[2], probe)) {
        log.header_skipped = true;
        continue;
      }
    }
    ++log.data_lines;
    Interaction rec;
    if (fields.size() < 4 || fields[0].empty() || fields[1].empty() ||
        !parse_double(fields[2], rec.rating) || !parse_int64(fields[3], rec.timestamp)) {
      ++log.malformed;
      continue;
    }
    rec.user = fields[0];
    rec.item = fields[1];
    if (!seen.emplace(rec.user, rec.item, rec.timestamp).second) {
      ++log.deduplicated;
      continue;
    }
    log.records.push_back(std::move(rec));
  }
  if (log.data_lines > 0 &&
      static_cast<double>(log.malformed) > 0.01 * static_cast<double>(log.data_lines)) {
    throw IngestionError(std::to_string(log.malformed) + " of " +
                         std::to_string(log.data_lines) +
                         " lines malformed (limit 1%)");
  }
  return log;
}

InteractionLog load_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return parse_tsv(in);
}

void write_tsv(const InteractionLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "user\titem\trating\ttimestamp\n";
  std::ostringstream line;
  for (const auto& r : log.records) {
    line.str("");
    line << r.user << '\t' << r.item << '\t' << r.rating << '\t' << r.timestamp << '\n';
    out << line.str();
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

Dataset preprocess(const InteractionLog& log, const PrepOptions& opt) {
  if (opt.min_user < 1 || opt.min_item < 1) {
    throw ConfigError("minimum-count thresholds must be >= 1");
  }
  std::vector<const Interaction*> recs;
  for (const auto& r : log.records) {
    if (r.rating >= opt.rating_threshold) recs.push_back(&r);
  }
  std::size_t after_rating = recs.size();

  // Iterate the two count filters to a fixed point: dropping a user can push
  // an item below threshold and vice versa.
  std::unordered_set<std::string> dead_users, dead_items;
  while (true) {
    std::unordered_map<std::string, int> ucount, icount;
    for (const auto* r : recs) {
      if (dead_users.count(r->user) || dead_items.count(r->item)) continue;
      ++ucount[r->user];
      ++icount[r->item];
    }
    bool changed = false;
    for (const auto& [u, c] : ucount) {
      if (c < opt.min_user && dead_users.insert(u).second) changed = true;
    }
    for (const auto& [v, c] : icount) {
      if (c < opt.min_item && dead_items.insert(v).second) changed = true;
    }
    if (!changed) break;
  }
  std::vector<const Interaction*> kept;
  for (const auto* r : recs) {
    if (!dead_users.count(r->user) && !dead_items.count(r->item)) kept.push_back(r);
  }
  if (kept.empty()) {
    throw PreprocessError("no records survive preprocessing (input " +
                          std::to_string(log.records.size()) + ", after rating filter " +
                          std::to_string(after_rating) + ", after count filter 0)");
  }

  std::set<std::string> users, items;
  for (const auto* r : kept) {
    users.insert(r->user);
    items.insert(r->item);
  }
  Dataset ds;
  ds.user_ids.assign(users.begin(), users.end());
  ds.item_ids.push_back("");  // vid 0: padding slot, no external id
  ds.item_ids.insert(ds.item_ids.end(), items.begin(), items.end());
  std::unordered_map<std::string, int> uid_of, vid_of;
  for (int u = 0; u < ds.user_count(); ++u) uid_of[ds.user_ids[u]] = u;
  for (int v = 1; v < ds.catalog_size(); ++v) vid_of[ds.item_ids[v]] = v;

  // Bucket per user in input order, then stable-sort by timestamp so ties
  // keep file order.
  std::vector<std::vector<std::pair<std::int64_t, int>>> per_user(users.size());
  for (const auto* r : kept) {
    per_user[uid_of[r->user]].emplace_back(r->timestamp, vid_of[r->item]);
  }
  ds.sequences.resize(users.size());
  for (std::size_t u = 0; u < per_user.size(); ++u) {
    auto& seq = per_user[u];
    std::stable_sort(seq.begin(), seq.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    ds.sequences[u].reserve(seq.size());
    for (const auto& [ts, vid] : seq) ds.sequences[u].push_back(vid);
  }
  return ds;
}

Split split_leave_one_out(const Dataset& ds) {
  Split sp;
  for (int u = 0; u < ds.user_count(); ++u) {
    const auto& seq = ds.sequences[static_cast<std::size_t>(u)];
    if (seq.size() < 3) {
      sp.excluded.push_back(u);
      continue;
    }
    sp.uids.push_back(u);
    sp.train.emplace_back(seq.begin(), seq.end() - 2);
    sp.val_target.push_back(seq[seq.size() - 2]);
    sp.test_target.push_back(seq.back());
  }
  return sp;
}

FixedSequence to_fixed_length(const std::vector<int>& seq, int n) {
  if (n < 1) throw ContractError("fixed-length window requires n >= 1");
  FixedSequence fs;
  fs.b.assign(static_cast<std::size_t>(n), 0);
  int take = std::min<int>(n, static_cast<int>(seq.size()));
  fs.pad_count = n - take;
  for (int t = 0; t < take; ++t) {
    fs.b[static_cast<std::size_t>(fs.pad_count + t)] = seq[seq.size() - take + t];
  }
  return fs;
}

std::vector<Bucket> activity_buckets(const Split& split) {
  std::size_t n = split.user_count();
  if (n < 10) {
    throw ConfigError("activity buckets need at least 10 users, got " + std::to_string(n));
  }
  // Rank users by training length descending; split.uids is ascending, so
  // index order breaks ties by uid ascending.
  std::vector<int> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return split.train[static_cast<std::size_t>(a)].size() >
           split.train[static_cast<std::size_t>(b)].size();
  });

  auto boundary = [n](int tenths) {
    return static_cast<std::size_t>(tenths) * n / 10;  // floor(q*|U|)
  };
  std::vector<Bucket> out;
  const char* spans[5] = {"0_10", "10_20", "20_30", "30_40", "40_50"};
  for (int t = 0; t < 5; ++t) {
    Bucket b;
    b.name = std::string("top_") + spans[t];
    for (std::size_t r = boundary(t); r < boundary(t + 1); ++r) {
      b.members.push_back(order[r]);
    }
    std::sort(b.members.begin(), b.members.end());
    out.push_back(std::move(b));
  }
  for (int t = 4; t >= 0; --t) {
    Bucket b;
    b.name = std::string("bottom_") + spans[t];
    for (std::size_t r = n - boundary(t + 1); r < n - boundary(t); ++r) {
      b.members.push_back(order[r]);
    }
    std::sort(b.members.begin(), b.members.end());
    out.push_back(std::move(b));
  }
  return out;
}

std::string serialize_snapshot(const Dataset& ds) {
  std::ostringstream out;
  out << "starseq-snapshot\t1\n";
  out << "users\t" << ds.user_count() << "\n";
  out << "items\t" << ds.item_count() << "\n";
  for (int u = 0; u < ds.user_count(); ++u) {
    out << "user\t" << u << "\t" << ds.user_ids[static_cast<std::size_t>(u)] << "\n";
  }
  for (int v = 1; v < ds.catalog_size(); ++v) {
    out << "item\t" << v << "\t" << ds.item_ids[static_cast<std::size_t>(v)] << "\n";
  }
  for (int u = 0; u < ds.user_count(); ++u) {
    const auto& seq = ds.sequences[static_cast<std::size_t>(u)];
    out << "seq\t" << u << "\t" << seq.size() << "\t";
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (i) out << ' ';
      out << seq[i];
    }
    out << "\n";
  }
  out << "end\n";
  return out.str();
}

namespace {

[[noreturn]] void snapshot_fail(const std::string& why) {
  throw IoError("snapshot: " + why);
}

}  // namespace

Dataset parse_snapshot(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "starseq-snapshot\t1") {
    snapshot_fail("missing or unsupported version header");
  }
  auto next = [&](const char* what) {
    if (!std::getline(in, line)) snapshot_fail(std::string("truncated before ") + what);
    return split_tabs(strip_cr(line));
  };
  auto f = next("user count");
  if (f.size() != 2 || f[0] != "users") snapshot_fail("expected users line");
  int nu = std::stoi(f[1]);
  f = next("item count");
  if (f.size() != 2 || f[0] != "items") snapshot_fail("expected items line");
  int ni = std::stoi(f[1]);
  if (nu < 1 || ni < 1) snapshot_fail("empty dataset");

  Dataset ds;
  ds.user_ids.resize(static_cast<std::size_t>(nu));
  ds.item_ids.assign(static_cast<std::size_t>(ni) + 1, "");
  ds.sequences.resize(static_cast<std::size_t>(nu));
  for (int u = 0; u < nu; ++u) {
    f = next("user entry");
    if (f.size() != 3 || f[0] != "user" || std::stoi(f[1]) != u) {
      snapshot_fail("bad user entry " + std::to_string(u));
    }
    ds.user_ids[static_cast<std::size_t>(u)] = f[2];
  }
  for (int v = 1; v <= ni; ++v) {
    f = next("item entry");
    if (f.size() != 3 || f[0] != "item" || std::stoi(f[1]) != v) {
      snapshot_fail("bad item entry " + std::to_string(v));
    }
    ds.item_ids[static_cast<std::size_t>(v)] = f[2];
  }
  for (int u = 0; u < nu; ++u) {
    f = next("sequence entry");
    if (f.size() != 4 || f[0] != "seq" || std::stoi(f[1]) != u) {
      snapshot_fail("bad sequence entry " + std::to_string(u));
    }
    std::size_t len = static_cast<std::size_t>(std::stoul(f[2]));
    std::istringstream items(f[3]);
    auto& seq = ds.sequences[static_cast<std::size_t>(u)];
    int vid;
    while (items >> vid) {
      if (vid < 1 || vid > ni) snapshot_fail("vid out of range in sequence");
      seq.push_back(vid);
    }
    if (seq.size() != len) snapshot_fail("sequence length mismatch");
  }
  f = next("end marker");
  if (f.size() != 1 || f[0] != "end") snapshot_fail("missing end marker");
  return ds;
}

void save_snapshot(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << serialize_snapshot(ds);
  if (!out) throw IoError("write failed for '" + path + "'");
}

Dataset load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return parse_snapshot(in);
}

std::uint64_t snapshot_hash(const Dataset& ds) { return fnv1a64(serialize_snapshot(ds)); }

InteractionLog synth_log(const SynthOptions& opt, std::uint64_t seed) {
  if (opt.users < 1 || opt.items < 2 || opt.steps < 1) {
    throw ConfigError("synthetic log needs users >= 1, items >= 2, steps >= 1");
  }
  // One global permutation cycle: successor(perm[i]) = perm[(i+1) mod items].
  std::vector<int> perm(static_cast<std::size_t>(opt.items));
  for (int i = 0; i < opt.items; ++i) perm[static_cast<std::size_t>(i)] = i;
  Rng rng = make_rng(seed, "synth");
  shuffle_in_place(perm, rng);

  InteractionLog log;
  log.records.reserve(static_cast<std::size_t>(opt.users) *
                      static_cast<std::size_t>(opt.steps));
  for (int u = 0; u < opt.users; ++u) {
    std::size_t at = uniform_index(rng, static_cast<std::uint64_t>(opt.items));
    for (int s = 0; s < opt.steps; ++s) {
      Interaction rec;
      rec.user = std::to_string(u + 1);
      rec.item = std::to_string(perm[at] + 1);
      rec.rating = 5;
      rec.timestamp = s + 1;
      log.records.push_back(std::move(rec));
      at = (at + 1) % static_cast<std::size_t>(opt.items);
    }
  }
  log.data_lines = log.records.size();
  return log;
}

}  // namespace starseq
