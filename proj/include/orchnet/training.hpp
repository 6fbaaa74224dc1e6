#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "orchnet/dataset.hpp"
#include "orchnet/model.hpp"

namespace orchnet {

struct TripletConfig {
  double margin = 0.5;
  int negatives = 20;
  int epochs = 100;
  double lr = 1e-4;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
  bool augment = true;

  void validate() const;
};

struct TripletLoss {
  double loss = 0.0;
  int chosen_negative = -1;  // position in the negative list
  double positive_distance = 0.0;
  double negative_distance = 0.0;
};

/// Hinge on the anchor-positive distance against the hardest (closest in
/// descriptor space) negative. Ties go to the lowest index.
TripletLoss lazy_triplet_loss(const Descriptor& anchor, const Descriptor& positive,
                              std::span<const Descriptor> negatives, double margin);

struct TripletGrads {
  Descriptor anchor;
  Descriptor positive;
  Descriptor negative;  // gradient of the chosen negative; all others get zero
};

/// Gradient of lazy_triplet_loss. Zero when the hinge is inactive; the
/// gradient of a zero-length difference is taken as zero.
TripletGrads lazy_triplet_backward(const Descriptor& anchor, const Descriptor& positive,
                                   std::span<const Descriptor> negatives, const TripletLoss& loss);

struct TrainResult {
  std::vector<double> epoch_loss;
  std::int64_t steps = 0;
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

/// Triplet training with one optimizer step per anchor. Anchors are visited in
/// a seeded shuffled order each epoch; every scan of a triplet gets its own
/// downsampling and yaw augmentation. Throws NumericError on a NaN loss.
TrainResult train(Model& model, const Sequence& seq, const LoopGroundTruth& gt, const TripletConfig& config,
                  const EpochCallback& on_epoch = {});

/// Descriptor of every entry, with no augmentation and a per-index
/// downsampling seed derived from `seed`.
std::vector<Descriptor> describe_sequence(const Model& model, const Sequence& seq, std::uint64_t seed);

std::string loss_trace_csv(const TrainResult& result);

}  // namespace orchnet
