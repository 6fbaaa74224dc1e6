#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "orchnet/dataset.hpp"

namespace orchnet {

/// Append-only descriptor database keyed by scan index.
class DescriptorDB {
 public:
  explicit DescriptorDB(Index dim = 0) : dim_(dim) {}

  Index dim() const { return dim_; }
  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }

  /// Throws UsageError on a dimension mismatch or a non-increasing index.
  void append(int scan_index, const Descriptor& d);

  int scan_index(std::size_t row) const { return indices_[row]; }
  const Descriptor& descriptor(std::size_t row) const { return rows_[row]; }

 private:
  Index dim_;
  std::vector<int> indices_;
  std::vector<Descriptor> rows_;
};

struct Neighbor {
  int scan_index = 0;
  double distance = 0.0;
};

/// Exact top-N by L2 distance, ascending; ties go to the lower scan index.
std::vector<Neighbor> knn_search(const DescriptorDB& db, const Descriptor& query, std::size_t n);

/// Scan indices of knn_search.
std::vector<int> knn_query(const DescriptorDB& db, const Descriptor& query, std::size_t n);

/// A cutoff is either a fixed N or a percentage of the current database size.
struct RecallCutoff {
  double value = 1.0;
  bool percent = false;

  std::size_t resolve(std::size_t db_size) const;
  std::string label() const;  // "1", "5", "1%"
  std::string file_tag() const;  // "1", "5", "1pct"

  static RecallCutoff parse(const std::string& text);  // "1", "25", "1pct", "1%"
};

struct AnchorResult {
  int anchor = 0;
  std::size_t db_size = 0;
  std::vector<bool> hits;  // one flag per cutoff
};

struct RecallReport {
  std::vector<RecallCutoff> cutoffs;
  std::vector<double> recall;  // per cutoff
  std::vector<AnchorResult> anchors;

  double at(const std::string& label) const;
};

/// Incremental protocol: entries are visited in order; before entry t is
/// queried the database holds every entry with index <= t - gamma. Anchors
/// (optionally restricted by `include`) are scored as hits when any of the
/// top-N retrieved entries is one of their positives.
RecallReport evaluate_recall(const std::vector<Descriptor>& descriptors, const std::vector<SequenceEntry>& seq,
                             const LoopGroundTruth& gt, int gamma, const std::vector<RecallCutoff>& cutoffs,
                             const std::function<bool(int)>& include = {});

/// Descriptor source overload: `describe(entry)` is called once per entry.
RecallReport evaluate_recall(const std::function<Descriptor(const SequenceEntry&)>& describe,
                             const std::vector<SequenceEntry>& seq, const LoopGroundTruth& gt, int gamma,
                             const std::vector<RecallCutoff>& cutoffs, const std::function<bool(int)>& include = {});

std::string recall_csv(const RecallReport& report);
/// `anchor_index,hit,db_size` for the cutoff at position `cutoff`.
std::string per_anchor_csv(const RecallReport& report, std::size_t cutoff);

// Descriptor DB file: "ORDB", u32 version, u32 K, u32 rows, then per row
// (u32 scan index, f64 x K), little-endian.
inline constexpr std::uint32_t kDescriptorDbVersion = 1;

void save_descriptor_db(const std::filesystem::path& path, const DescriptorDB& db);
DescriptorDB load_descriptor_db(const std::filesystem::path& path);

}  // namespace orchnet
