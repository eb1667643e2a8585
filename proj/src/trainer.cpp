#include "insmt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "insmt/corpus.hpp"
#include "insmt/errors.hpp"
#include "insmt/utf8.hpp"

namespace insmt {

std::pair<CharVocab, CharVocab> build_vocabularies(std::span<const align::AlignedSentencePair> pairs) {
  std::set<char32_t> source, target;
  for (const auto& pair : pairs) {
    for (const auto& token : pair.source_tokens) {
      for (char32_t c : utf8::decode_or_throw(token)) source.insert(c);
    }
    for (const auto& chunk : pair.chunks) {
      for (char32_t c : utf8::decode_or_throw(chunk)) target.insert(c);
    }
  }
  return {CharVocab({source.begin(), source.end()}), CharVocab({target.begin(), target.end()})};
}

std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> source_lengths,
                                                   int batch_size, std::mt19937_64& rng) {
  if (batch_size <= 0) throw ContractViolation("make_batches: batch size must be positive");
  std::vector<std::size_t> order(source_lengths.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return source_lengths[a] < source_lengths[b];
  });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

template <typename T>
double heldout_xent(const ModelParams<T>& model, std::span<const align::AlignedSentencePair> pairs) {
  if (pairs.empty()) throw ContractViolation("heldout_xent: empty held-out set");
  double loss = 0.0;
  std::size_t symbols = 0;
  for (const auto& pair : pairs) {
    Graph<T> g(&model.params);
    loss += static_cast<double>(sentence_loss(g, model, pair).value()[0]);
    symbols += output_symbol_count(pair);
  }
  return loss / static_cast<double>(symbols);
}

template double heldout_xent(const ModelParams<float>&, std::span<const align::AlignedSentencePair>);
template double heldout_xent(const ModelParams<double>&, std::span<const align::AlignedSentencePair>);

namespace {

double sentence_gradients(const ModelParams<float>& model, const align::AlignedSentencePair& pair,
                          Gradients<float>& grads) {
  Graph<float> g(&model.params);
  Node<float> loss = sentence_loss(g, model, pair);
  const double value = loss.value()[0];
  if (!std::isfinite(value)) return value;
  g.backward(loss);
  g.accumulate_parameter_grads(grads);
  return value;
}

}  // namespace

double accumulate_batch_gradients(const ModelParams<float>& model,
                                  std::span<const align::AlignedSentencePair> pairs,
                                  std::span<const std::size_t> indices, int workers,
                                  Gradients<float>& grads) {
  const std::size_t n_workers =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, std::max<std::size_t>(indices.size(), 1));
  if (n_workers == 1) {
    double total = 0.0;
    for (std::size_t idx : indices) total += sentence_gradients(model, pairs[idx], grads);
    return total;
  }
  std::vector<Gradients<float>> partial(n_workers);
  std::vector<double> losses(n_workers, 0.0);
  std::vector<std::thread> threads;
  const std::size_t per = (indices.size() + n_workers - 1) / n_workers;
  for (std::size_t w = 0; w < n_workers; ++w) {
    threads.emplace_back([&, w] {
      partial[w] = zero_gradients(model.params);
      const std::size_t begin = std::min(indices.size(), w * per);
      const std::size_t end = std::min(indices.size(), begin + per);
      for (std::size_t k = begin; k < end; ++k) {
        losses[w] += sentence_gradients(model, pairs[indices[k]], partial[w]);
      }
    });
  }
  for (auto& t : threads) t.join();
  double total = 0.0;
  for (std::size_t w = 0; w < n_workers; ++w) {
    add_gradients(grads, partial[w]);
    total += losses[w];
  }
  return total;
}

TrainResult train(const RunConfig& config, std::span<const align::AlignedSentencePair> train_pairs,
                  std::span<const align::AlignedSentencePair> heldout_pairs, const TrainHooks& hooks) {
  if (train_pairs.empty()) throw ContractViolation("train: empty training set");
  auto [source_vocab, target_vocab] = build_vocabularies(train_pairs);
  ModelParams<float> initial =
      make_model<float>(config.model_config(), std::move(source_vocab), std::move(target_vocab), config.seed);
  return train_from(config, std::move(initial), train_pairs, heldout_pairs, hooks);
}

TrainResult train_from(const RunConfig& config, ModelParams<float> initial,
                       std::span<const align::AlignedSentencePair> train_pairs,
                       std::span<const align::AlignedSentencePair> heldout_pairs,
                       const TrainHooks& hooks) {
  validate(config);
  if (train_pairs.empty()) throw ContractViolation("train: empty training set");

  TrainResult result;
  TrainState& state = result.final_state;
  state.params = std::move(initial);
  state.adam = make_adam_state(state.params.params, config.adam_options());
  result.best = state.params;

  std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32), 0x5eedu};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> lengths;
  std::size_t train_symbols = 0;
  for (const auto& pair : train_pairs) {
    lengths.push_back(pair.source_tokens.size());
    train_symbols += output_symbol_count(pair);
  }

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    state.epoch = epoch;
    const auto batches = make_batches(lengths, config.batch_size, rng);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& batch = batches[b];
      Gradients<float> grads = zero_gradients(state.params.params);
      const double loss = accumulate_batch_gradients(state.params, train_pairs, batch, config.workers, grads);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "non-finite loss " << loss << " at epoch " << epoch << ", batch " << b + 1 << " of "
            << batches.size() << "; sentences:";
        for (std::size_t idx : batch) msg << "\n  #" << idx + 1 << ": " << join(train_pairs[idx].source_tokens);
        throw TrainingError(msg.str());
      }
      epoch_loss += loss;
      const double inv = 1.0 / static_cast<double>(batch.size());
      for (auto& g : grads) {
        for (float& v : g.values()) v = static_cast<float>(v * inv);
      }
      clip_global_norm(grads, config.clip_norm);
      adam_step(state.adam, state.params.params, grads);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_xent = epoch_loss / static_cast<double>(train_symbols);
    const bool evaluate = epoch % config.eval_interval == 0;
    if (heldout_pairs.empty()) {
      result.best = state.params;
      result.best_epoch = epoch;
    } else if (evaluate) {
      const double xent = heldout_xent(state.params, heldout_pairs);
      record.heldout_xent = xent;
      result.heldout_trajectory.push_back(xent);
      if (xent < state.best_heldout) {
        state.best_heldout = xent;
        state.evaluations_since_improvement = 0;
        record.improved = true;
        result.best = state.params;
        result.best_epoch = epoch;
      } else {
        ++state.evaluations_since_improvement;
      }
    }
    result.history.push_back(record);
    if (hooks.on_epoch) hooks.on_epoch(record);
    if (record.improved && hooks.on_improvement) hooks.on_improvement(result.best, record);
    if (!heldout_pairs.empty() && state.evaluations_since_improvement >= config.patience) {
      result.stopped_early = true;
      break;
    }
  }
  std::ostringstream rng_state;
  rng_state << rng;
  state.rng_state = rng_state.str();
  return result;
}

}  // namespace insmt
