#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "insmt/adam.hpp"
#include "insmt/align.hpp"
#include "insmt/config.hpp"
#include "insmt/model.hpp"

namespace insmt {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpochRecord {
  int epoch = 0;
  double train_xent = 0.0;              // nats per output symbol over the epoch
  std::optional<double> heldout_xent;   // set on evaluation epochs with a held-out set
  bool improved = false;
};

struct TrainState {
  ModelParams<float> params;
  AdamState<float> adam;
  int epoch = 0;
  double best_heldout = std::numeric_limits<double>::infinity();
  int evaluations_since_improvement = 0;
  std::string rng_state;
};

struct TrainResult {
  ModelParams<float> best;
  TrainState final_state;
  std::vector<EpochRecord> history;
  std::vector<double> heldout_trajectory;
  int best_epoch = 0;
  bool stopped_early = false;
};

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  // Fires whenever the held-out loss reaches a new best.
  std::function<void(const ModelParams<float>&, const EpochRecord&)> on_improvement;
};

// Source characters from source tokens, target characters from chunks (space included).
std::pair<CharVocab, CharVocab> build_vocabularies(std::span<const align::AlignedSentencePair> pairs);

// Sentences grouped by source length into batches of at most batch_size;
// batch order shuffled. Every index appears exactly once.
std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> source_lengths,
                                                   int batch_size, std::mt19937_64& rng);

// Mean negative log-likelihood per output symbol (characters, end-of-token
// markers, and position decisions).
template <typename T>
double heldout_xent(const ModelParams<T>& model, std::span<const align::AlignedSentencePair> pairs);

// Sum of sentence gradients over `indices`, split across `workers` threads
// with private graphs; partial sums are added in worker order. Returns the
// summed loss.
double accumulate_batch_gradients(const ModelParams<float>& model,
                                  std::span<const align::AlignedSentencePair> pairs,
                                  std::span<const std::size_t> indices, int workers,
                                  Gradients<float>& grads);

// Minibatch Adam with held-out early stopping. With an empty held-out set the
// final parameters are returned.
TrainResult train(const RunConfig& config, std::span<const align::AlignedSentencePair> train_pairs,
                  std::span<const align::AlignedSentencePair> heldout_pairs, const TrainHooks& hooks = {});

// Same, starting from an existing model instead of a fresh initialization.
TrainResult train_from(const RunConfig& config, ModelParams<float> initial,
                       std::span<const align::AlignedSentencePair> train_pairs,
                       std::span<const align::AlignedSentencePair> heldout_pairs,
                       const TrainHooks& hooks = {});

}  // namespace insmt
