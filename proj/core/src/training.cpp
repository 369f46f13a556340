#include "spine3d/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "spine3d/io.hpp"
#include "spine3d/parallel.hpp"
#include "spine3d/random.hpp"

namespace spine3d {

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("train: lr must be finite and >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("train: adam betas must be in [0, 1)");
  if (!(eps > 0.0)) throw std::invalid_argument("train: eps must be positive");
  if (lr_decay_every < 1) throw std::invalid_argument("train: lr_decay_every must be >= 1");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor < 1.0))
    throw std::invalid_argument("train: lr_decay_factor must be in (0, 1)");
  if (!(weight_penalty >= 0.0)) throw std::invalid_argument("train: weight_penalty must be >= 0");
  if (augment.crop_jitter_px < 0) throw std::invalid_argument("train: crop_jitter_px must be >= 0");
  if (!(augment.contrast_min > 0.0 && augment.contrast_min <= augment.contrast_max))
    throw std::invalid_argument("train: bad contrast range");
  if (!(augment.noise_frac >= 0.0)) throw std::invalid_argument("train: noise_frac must be >= 0");
  if (threads < 1) throw std::invalid_argument("train: threads must be >= 1");
}

double TrainConfig::lr_at(int epoch) const {
  return lr * std::pow(lr_decay_factor, epoch / lr_decay_every);
}

void augment_sample(Image2D& image, std::vector<double>& target, int out_curves, const AugmentConfig& cfg, Rng& rng) {
  const int j = cfg.crop_jitter_px;
  const int dr = j > 0 ? uniform_int(rng, -j, j) : 0;
  const int dc = j > 0 ? uniform_int(rng, -j, j) : 0;
  const double contrast = uniform(rng, cfg.contrast_min, cfg.contrast_max);

  Image2D out(image.rows, image.cols);
  for (int r = 0; r < image.rows; ++r)
    for (int c = 0; c < image.cols; ++c)
      if (image.inside(r - dr, c - dc)) out.at(r, c) = image.at(r - dr, c - dc) * contrast;
  if (cfg.noise_frac > 0.0) {
    const double sigma = cfg.noise_frac * *std::max_element(out.data.begin(), out.data.end());
    for (double& v : out.data) v += sigma * normal(rng);
  }
  image = std::move(out);

  // Level i now shows what level i - dr showed before; coronal x follows the column shift.
  const int levels = static_cast<int>(target.size()) / out_curves;
  const std::vector<double> old = target;
  for (int i = 0; i < levels; ++i) {
    const int src = std::clamp(i - dr, 0, levels - 1);
    for (int k = 0; k < out_curves; ++k) {
      double v = old[static_cast<std::size_t>(src) * out_curves + k];
      if (k < 3) v += dc;
      target[static_cast<std::size_t>(i) * out_curves + k] = v;
    }
  }
}

std::vector<double> mean_target(const std::vector<TrainSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("mean_target: no samples");
  std::vector<double> mean(samples.front().target.size(), 0.0);
  for (const TrainSample& s : samples) {
    if (s.target.size() != mean.size()) throw std::invalid_argument("mean_target: inconsistent target sizes");
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += s.target[i];
  }
  for (double& v : mean) v /= static_cast<double>(samples.size());
  return mean;
}

double evaluate_loss(const RegressorModel& model, const std::vector<TrainSample>& samples, int threads) {
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> losses(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t, std::size_t i) {
    losses[i] = l1_data_loss(forward(model, samples[i].image, Mode::Eval), samples[i].target);
  });
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(samples.size());
}

TrainHistory train(RegressorModel& model, const std::vector<TrainSample>& train_set,
                   const std::vector<TrainSample>& val_set, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  const auto outputs = static_cast<std::size_t>(model.config().outputs());
  for (const TrainSample& s : train_set)
    if (s.target.size() != outputs) throw std::invalid_argument("train: target size mismatch for sample " + s.id);

  const std::size_t P = model.parameter_count();
  const std::size_t n = train_set.size();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  std::vector<AlignedBuffer> sample_grads(std::min(batch, n), AlignedBuffer(P));
  std::vector<double> sample_loss(sample_grads.size());
  AlignedBuffer grad(P);
  std::vector<double> m(P, 0.0), v(P, 0.0);
  std::vector<std::size_t> order(n);
  long long step = 0;

  TrainHistory history;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at(epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, {0x5348u, static_cast<std::uint64_t>(epoch)}));
    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(uniform_int(shuffle_rng, 0, static_cast<int>(i - 1)))]);

    double epoch_loss = 0.0;
    for (std::size_t b0 = 0, bi = 0; b0 < n; b0 += batch, ++bi) {
      const std::size_t bn = std::min(batch, n - b0);
      parallel_for(bn, cfg.threads, [&](std::size_t, std::size_t j) {
        const std::size_t idx = order[b0 + j];
        const TrainSample& s = train_set[idx];
        Rng rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(idx)}));
        Image2D image = s.image;
        std::vector<double> target = s.target;
        if (cfg.augment.enabled) augment_sample(image, target, model.config().out_curves, cfg.augment, rng);
        ForwardTape tape;
        const std::vector<double> pred = forward(model, image, Mode::Train, &tape, &rng);
        sample_loss[j] = l1_data_loss(pred, target);
        std::fill(sample_grads[j].begin(), sample_grads[j].end(), 0.0);
        backward(model, tape, l1_loss_grad(pred, target), sample_grads[j]);
      });

      double data_loss = 0.0;
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t j = 0; j < bn; ++j) {
        data_loss += sample_loss[j];
        const AlignedBuffer& g = sample_grads[j];
        for (std::size_t i = 0; i < P; ++i) grad[i] += g[i];
      }
      data_loss /= static_cast<double>(bn);
      const double inv = 1.0 / static_cast<double>(bn);
      for (double& g : grad) g *= inv;

      double penalty = 0.0;
      if (cfg.weight_penalty > 0.0) {
        for (double w : model.parameters()) penalty += w * w;
        penalty *= cfg.weight_penalty;
        add_penalty_grad(model, cfg.weight_penalty, grad);
      }
      const double loss = data_loss + penalty;
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch + 1 << ", batch " << bi + 1 << " (samples";
        for (std::size_t j = 0; j < bn; ++j) msg << ' ' << train_set[order[b0 + j]].id;
        msg << ")";
        throw TrainingError(msg.str());
      }
      epoch_loss += loss * static_cast<double>(bn);

      ++step;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      auto params = model.parameters();
      for (std::size_t i = 0; i < P; ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
      }
      if (!model.all_finite())
        throw TrainingError("non-finite parameters after epoch " + std::to_string(epoch + 1) + ", batch " +
                            std::to_string(bi + 1));
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_loss = epoch_loss / static_cast<double>(n);
    rec.val_loss = evaluate_loss(model, val_set, cfg.threads);
    rec.lr = lr;
    history.epochs.push_back(rec);
    if (on_epoch && !on_epoch(rec)) break;
  }
  return history;
}

std::string format_history_csv(const TrainHistory& history) {
  CsvTable t;
  t.header = {"epoch", "train_loss", "val_loss", "lr"};
  for (const EpochRecord& r : history.epochs)
    t.rows.push_back({std::to_string(r.epoch), format_double(r.train_loss), format_double(r.val_loss),
                      format_double(r.lr)});
  return format_csv(t);
}

TrainHistory parse_history_csv(const std::string& text) {
  const CsvTable t = parse_csv(text);
  const int ce = t.column("epoch"), ct = t.column("train_loss"), cv = t.column("val_loss"), cl = t.column("lr");
  TrainHistory h;
  for (const auto& row : t.rows) {
    EpochRecord r;
    r.epoch = static_cast<int>(parse_int(row[ce], "epoch"));
    r.train_loss = parse_double(row[ct], "train_loss");
    r.val_loss = parse_double(row[cv], "val_loss");
    r.lr = parse_double(row[cl], "lr");
    h.epochs.push_back(r);
  }
  return h;
}

}  // namespace spine3d
