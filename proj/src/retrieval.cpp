#include "orchnet/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "orchnet/csv.hpp"

namespace orchnet {

void DescriptorDB::append(int scan_index, const Descriptor& d) {
  if (dim_ == 0 && indices_.empty()) dim_ = d.size();
  if (d.size() != dim_) {
    throw UsageError("descriptor has " + std::to_string(d.size()) + " dimensions, database expects " +
                     std::to_string(dim_));
  }
  if (!indices_.empty() && scan_index <= indices_.back()) {
    throw UsageError("database scan indices must be strictly increasing");
  }
  indices_.push_back(scan_index);
  rows_.push_back(d);
}

std::vector<Neighbor> knn_search(const DescriptorDB& db, const Descriptor& query, std::size_t n) {
  if (db.empty()) throw UsageError("knn query on an empty database");
  if (n < 1) throw UsageError("knn query needs N >= 1");
  if (query.size() != db.dim()) throw UsageError("query dimension does not match the database");
  std::vector<Neighbor> all(db.size());
  for (std::size_t r = 0; r < db.size(); ++r) {
    all[r] = {db.scan_index(r), (db.descriptor(r) - query).norm()};
  }
  const auto closer = [](const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.scan_index < b.scan_index);
  };
  const std::size_t k = std::min(n, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), closer);
  all.resize(k);
  return all;
}

std::vector<int> knn_query(const DescriptorDB& db, const Descriptor& query, std::size_t n) {
  std::vector<int> out;
  for (const Neighbor& nb : knn_search(db, query, n)) out.push_back(nb.scan_index);
  return out;
}

std::size_t RecallCutoff::resolve(std::size_t db_size) const {
  if (!percent) return static_cast<std::size_t>(value);
  const double n = std::round(value / 100.0 * static_cast<double>(db_size));
  return std::max<std::size_t>(1, static_cast<std::size_t>(n));
}

std::string RecallCutoff::label() const {
  std::string v = csv::format_double(value);
  return percent ? v + "%" : v;
}

std::string RecallCutoff::file_tag() const {
  std::string v = csv::format_double(value);
  return percent ? v + "pct" : v;
}

RecallCutoff RecallCutoff::parse(const std::string& text) {
  RecallCutoff c;
  std::string number = text;
  if (number.size() > 3 && number.ends_with("pct")) {
    c.percent = true;
    number.resize(number.size() - 3);
  } else if (!number.empty() && number.back() == '%') {
    c.percent = true;
    number.pop_back();
  }
  try {
    c.value = csv::parse_double(number, "recall cutoff");
  } catch (const DataError&) {
    throw UsageError("invalid recall cutoff '" + text + "' (expected e.g. 1, 25 or 1pct)");
  }
  if (!(c.value > 0.0) || (!c.percent && c.value != std::floor(c.value))) {
    throw UsageError("invalid recall cutoff '" + text + "'");
  }
  return c;
}

double RecallReport::at(const std::string& label) const {
  for (std::size_t i = 0; i < cutoffs.size(); ++i) {
    if (cutoffs[i].label() == label || cutoffs[i].file_tag() == label) return recall[i];
  }
  throw UsageError("report has no cutoff " + label);
}

RecallReport evaluate_recall(const std::vector<Descriptor>& descriptors, const std::vector<SequenceEntry>& seq,
                             const LoopGroundTruth& gt, int gamma, const std::vector<RecallCutoff>& cutoffs,
                             const std::function<bool(int)>& include) {
  if (descriptors.size() != seq.size()) throw UsageError("one descriptor per sequence entry is required");
  if (cutoffs.empty()) throw UsageError("at least one recall cutoff is required");
  if (gamma != gt.gamma) throw UsageError("ground truth was built with a different gamma");

  RecallReport report;
  report.cutoffs = cutoffs;
  report.recall.assign(cutoffs.size(), 0.0);
  std::vector<std::size_t> hits(cutoffs.size(), 0);

  DescriptorDB db;
  std::size_t next = 0;  // next entry to insert
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const int index = seq[t].index;
    while (next < seq.size() && seq[next].index <= index - gamma) {
      db.append(seq[next].index, descriptors[next]);
      ++next;
    }
    if (!gt.is_anchor(index) || db.empty()) continue;
    if (include && !include(index)) continue;

    std::size_t max_n = 0;
    for (const auto& c : cutoffs) max_n = std::max(max_n, c.resolve(db.size()));
    const std::vector<int> ranked = knn_query(db, descriptors[t], max_n);

    AnchorResult ar;
    ar.anchor = index;
    ar.db_size = db.size();
    // rank of the first true positive in the list
    std::size_t first_hit = ranked.size();
    for (std::size_t r = 0; r < ranked.size(); ++r) {
      if (gt.is_positive(index, ranked[r])) {
        first_hit = r;
        break;
      }
    }
    for (std::size_t c = 0; c < cutoffs.size(); ++c) {
      const bool hit = first_hit < cutoffs[c].resolve(db.size());
      ar.hits.push_back(hit);
      if (hit) ++hits[c];
    }
    report.anchors.push_back(std::move(ar));
  }
  if (!report.anchors.empty()) {
    for (std::size_t c = 0; c < cutoffs.size(); ++c) {
      report.recall[c] = static_cast<double>(hits[c]) / static_cast<double>(report.anchors.size());
    }
  }
  return report;
}

RecallReport evaluate_recall(const std::function<Descriptor(const SequenceEntry&)>& describe,
                             const std::vector<SequenceEntry>& seq, const LoopGroundTruth& gt, int gamma,
                             const std::vector<RecallCutoff>& cutoffs, const std::function<bool(int)>& include) {
  std::vector<Descriptor> descriptors;
  descriptors.reserve(seq.size());
  for (const auto& e : seq) descriptors.push_back(describe(e));
  return evaluate_recall(descriptors, seq, gt, gamma, cutoffs, include);
}

std::string recall_csv(const RecallReport& report) {
  std::string out = "N,recall\n";
  for (std::size_t c = 0; c < report.cutoffs.size(); ++c) {
    out += report.cutoffs[c].label() + ',' + csv::format_double(report.recall[c]) + '\n';
  }
  return out;
}

std::string per_anchor_csv(const RecallReport& report, std::size_t cutoff) {
  std::string out = "anchor_index,hit,db_size\n";
  for (const auto& a : report.anchors) {
    out += std::to_string(a.anchor) + ',' + (a.hits.at(cutoff) ? "1" : "0") + ',' + std::to_string(a.db_size) + '\n';
  }
  return out;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("truncated descriptor database");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_descriptor_db(const std::filesystem::path& path, const DescriptorDB& db) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write("ORDB", 4);
  put_u32(out, kDescriptorDbVersion);
  put_u32(out, static_cast<std::uint32_t>(db.dim()));
  put_u32(out, static_cast<std::uint32_t>(db.size()));
  for (std::size_t r = 0; r < db.size(); ++r) {
    put_u32(out, static_cast<std::uint32_t>(db.scan_index(r)));
    for (Index k = 0; k < db.dim(); ++k) {
      std::uint64_t bits = 0;
      const double v = db.descriptor(r)(k);
      std::memcpy(&bits, &v, sizeof bits);
      unsigned char b[8];
      for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xffu);
      out.write(reinterpret_cast<const char*>(b), 8);
    }
  }
  if (!out) throw DataError("write failed for " + path.string());
}

DescriptorDB load_descriptor_db(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "ORDB", 4) != 0) throw DataError(path.string() + " is not an ORDB file");
  if (get_u32(in) != kDescriptorDbVersion) throw DataError("unsupported descriptor database version");
  const auto dim = static_cast<Index>(get_u32(in));
  const std::uint32_t rows = get_u32(in);
  DescriptorDB db(dim);
  for (std::uint32_t r = 0; r < rows; ++r) {
    const auto index = static_cast<int>(get_u32(in));
    Descriptor d(dim);
    for (Index k = 0; k < dim; ++k) {
      unsigned char b[8];
      if (!in.read(reinterpret_cast<char*>(b), 8)) throw DataError("truncated descriptor database");
      std::uint64_t bits = 0;
      for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
      std::memcpy(&d(k), &bits, sizeof bits);
    }
    db.append(index, d);
  }
  return db;
}

}  // namespace orchnet
