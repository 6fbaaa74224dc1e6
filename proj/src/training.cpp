#include "orchnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "orchnet/csv.hpp"

namespace orchnet {

void TripletConfig::validate() const {
  if (margin < 0.0) throw UsageError("margin must be non-negative");
  if (negatives < 1) throw UsageError("at least one negative is required");
  if (epochs < 0) throw UsageError("epochs must be non-negative");
  if (!(lr > 0.0) || weight_decay < 0.0) throw UsageError("invalid optimizer settings");
}

TripletLoss lazy_triplet_loss(const Descriptor& anchor, const Descriptor& positive,
                              std::span<const Descriptor> negatives, double margin) {
  if (negatives.empty()) throw UsageError("lazy triplet loss needs at least one negative");
  if (anchor.size() != positive.size()) throw UsageError("descriptor dimension mismatch");
  TripletLoss out;
  out.negative_distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < negatives.size(); ++i) {
    if (negatives[i].size() != anchor.size()) throw UsageError("descriptor dimension mismatch");
    const double d = (negatives[i] - anchor).norm();
    if (d < out.negative_distance) {
      out.negative_distance = d;
      out.chosen_negative = static_cast<int>(i);
    }
  }
  out.positive_distance = (anchor - positive).norm();
  out.loss = std::max(out.positive_distance - out.negative_distance + margin, 0.0);
  return out;
}

TripletGrads lazy_triplet_backward(const Descriptor& anchor, const Descriptor& positive,
                                   std::span<const Descriptor> negatives, const TripletLoss& loss) {
  const Index k = anchor.size();
  TripletGrads g{Descriptor::Zero(k), Descriptor::Zero(k), Descriptor::Zero(k)};
  if (loss.loss <= 0.0) return g;
  const Descriptor& neg = negatives[static_cast<std::size_t>(loss.chosen_negative)];
  if (loss.positive_distance > 0.0) {
    const Descriptor u = (anchor - positive) / loss.positive_distance;
    g.anchor += u;
    g.positive -= u;
  }
  if (loss.negative_distance > 0.0) {
    const Descriptor u = (anchor - neg) / loss.negative_distance;
    g.anchor -= u;
    g.negative += u;
  }
  return g;
}

namespace {

std::uint64_t eval_seed(std::uint64_t seed, int index) { return mix_seed(seed, 0x5eed0000ULL + static_cast<std::uint64_t>(index)); }

}  // namespace

std::vector<Descriptor> describe_sequence(const Model& model, const Sequence& seq, std::uint64_t seed) {
  std::vector<Descriptor> out;
  out.reserve(seq.size());
  for (std::size_t k = 0; k < seq.size(); ++k) {
    out.push_back(model.describe(seq.scans[k], eval_seed(seed, seq.entries[k].index), false));
  }
  return out;
}

TrainResult train(Model& model, const Sequence& seq, const LoopGroundTruth& gt, const TripletConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (gt.anchors.empty()) throw DataError("training split contains no anchors");
  if (seq.scans.size() != seq.entries.size()) throw DataError("training needs every scan loaded");

  AdamW optimizer(model.parameters(), AdamWConfig{config.lr, config.weight_decay});
  Rng rng(mix_seed(config.seed, 0x7a1));
  std::vector<int> order = gt.anchors;
  TrainResult result;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (int anchor : order) {
      const std::uint64_t step_seed = rng();
      const Triplet t = sample_triplet(gt, seq.entries, anchor, config.negatives, mix_seed(step_seed, 0));

      Model::Cache anchor_cache;
      Model::Cache positive_cache;
      const Descriptor da =
          model.describe(seq.scan(t.anchor), mix_seed(step_seed, 1), config.augment, &anchor_cache);
      const Descriptor dp =
          model.describe(seq.scan(t.positive), mix_seed(step_seed, 2), config.augment, &positive_cache);
      std::vector<Descriptor> dn;
      dn.reserve(t.negatives.size());
      for (std::size_t i = 0; i < t.negatives.size(); ++i) {
        dn.push_back(model.describe(seq.scan(t.negatives[i]), mix_seed(step_seed, 3 + i), config.augment));
      }

      const TripletLoss loss = lazy_triplet_loss(da, dp, dn, config.margin);
      if (!std::isfinite(loss.loss)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", anchor " + std::to_string(anchor));
      }
      total += loss.loss;

      const TripletGrads g = lazy_triplet_backward(da, dp, dn, loss);
      if (loss.loss > 0.0) {
        model.backward(g.anchor, anchor_cache);
        model.backward(g.positive, positive_cache);
        // replay the chosen negative with a cache; same seed, same descriptor
        const auto chosen = static_cast<std::size_t>(loss.chosen_negative);
        Model::Cache negative_cache;
        model.describe(seq.scan(t.negatives[chosen]), mix_seed(step_seed, 3 + chosen), config.augment,
                       &negative_cache);
        model.backward(g.negative, negative_cache);
      }
      optimizer.step();
      model.head().clamp_gem_p();
      ++result.steps;
    }
    const double mean = total / static_cast<double>(order.size());
    result.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  return result;
}

std::string loss_trace_csv(const TrainResult& result) {
  std::string out = "epoch,mean_loss\n";
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
    out += std::to_string(e + 1) + ',' + csv::format_double(result.epoch_loss[e]) + '\n';
  }
  return out;
}

}  // namespace orchnet
