#include "spine3d/regressor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace spine3d {

namespace {

using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<RowVec>;
using ConstMapVec = Eigen::Map<const RowVec>;

void im2col(const RowMat& in, int size, int cin, int stride, int out_size, RowMat& cols) {
  cols.setZero(static_cast<Eigen::Index>(out_size) * out_size, 9 * cin);
  for (int oy = 0; oy < out_size; ++oy)
    for (int ox = 0; ox < out_size; ++ox) {
      const Eigen::Index row = static_cast<Eigen::Index>(oy) * out_size + ox;
      for (int ky = 0; ky < 3; ++ky) {
        const int iy = oy * stride + ky - 1;
        if (iy < 0 || iy >= size) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int ix = ox * stride + kx - 1;
          if (ix < 0 || ix >= size) continue;
          cols.row(row).segment((ky * 3 + kx) * cin, cin) = in.row(static_cast<Eigen::Index>(iy) * size + ix);
        }
      }
    }
}

void col2im(const RowMat& dcols, int size, int cin, int stride, int out_size, RowMat& din) {
  din.setZero(static_cast<Eigen::Index>(size) * size, cin);
  for (int oy = 0; oy < out_size; ++oy)
    for (int ox = 0; ox < out_size; ++ox) {
      const Eigen::Index row = static_cast<Eigen::Index>(oy) * out_size + ox;
      for (int ky = 0; ky < 3; ++ky) {
        const int iy = oy * stride + ky - 1;
        if (iy < 0 || iy >= size) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int ix = ox * stride + kx - 1;
          if (ix < 0 || ix >= size) continue;
          din.row(static_cast<Eigen::Index>(iy) * size + ix) += dcols.row(row).segment((ky * 3 + kx) * cin, cin);
        }
      }
    }
}

int rel_index(int i, int j, int g) { return i - j + g - 1; }

void attention_forward(const RegressorModel& model, ForwardTape& t) {
  const ModelConfig& cfg = model.config();
  const ParamLayout& L = model.layout();
  const auto p = model.parameters();
  const int D = cfg.feature_dim(), H = cfg.attn_heads, dh = D / H, g = cfg.grid_size();
  const Eigen::Index N = t.tokens.rows();
  const RowMat& X = t.tokens;

  ConstMapMat wq(p.data() + L.wq, D, D), wk(p.data() + L.wk, D, D), wv(p.data() + L.wv, D, D),
      wo(p.data() + L.wo, D, D);
  ConstMapVec bq(p.data() + L.bq, D), bk(p.data() + L.bk, D), bv(p.data() + L.bv, D), bo(p.data() + L.bo, D);

  t.q.noalias() = X * wq;
  t.q.rowwise() += bq;
  t.k.noalias() = X * wk;
  t.k.rowwise() += bk;
  t.v.noalias() = X * wv;
  t.v.rowwise() += bv;

  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const int span = 2 * g - 1;
  t.probs.resize(static_cast<std::size_t>(H));
  t.attn.resize(N, D);
  for (int h = 0; h < H; ++h) {
    RowMat s = (t.q.middleCols(h * dh, dh) * t.k.middleCols(h * dh, dh).transpose()) * scale;
    if (cfg.use_pos_encoding) {
      const double* rr = p.data() + L.rel_row + static_cast<std::size_t>(h) * span;
      const double* rc = p.data() + L.rel_col + static_cast<std::size_t>(h) * span;
      for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = 0; j < N; ++j) {
          const int ri = static_cast<int>(i) / g, ci = static_cast<int>(i) % g;
          const int rj = static_cast<int>(j) / g, cj = static_cast<int>(j) % g;
          s(i, j) += rr[rel_index(ri, rj, g)] + rc[rel_index(ci, cj, g)];
        }
    }
    for (Eigen::Index i = 0; i < N; ++i) {
      const double m = s.row(i).maxCoeff();
      s.row(i) = (s.row(i).array() - m).exp().matrix();
      s.row(i) /= s.row(i).sum();
    }
    t.attn.middleCols(h * dh, dh).noalias() = s * t.v.middleCols(h * dh, dh);
    t.probs[static_cast<std::size_t>(h)] = std::move(s);
  }
  t.y = X;
  t.y.noalias() += t.attn * wo;
  t.y.rowwise() += bo;
}

RowMat attention_backward(const RegressorModel& model, const ForwardTape& t, const RowMat& dy, std::span<double> grad) {
  const ModelConfig& cfg = model.config();
  const ParamLayout& L = model.layout();
  const auto p = model.parameters();
  const int D = cfg.feature_dim(), H = cfg.attn_heads, dh = D / H, g = cfg.grid_size();
  const Eigen::Index N = t.tokens.rows();
  const RowMat& X = t.tokens;

  ConstMapMat wq(p.data() + L.wq, D, D), wk(p.data() + L.wk, D, D), wv(p.data() + L.wv, D, D),
      wo(p.data() + L.wo, D, D);
  MapMat gwq(grad.data() + L.wq, D, D), gwk(grad.data() + L.wk, D, D), gwv(grad.data() + L.wv, D, D),
      gwo(grad.data() + L.wo, D, D);
  MapVec gbq(grad.data() + L.bq, D), gbk(grad.data() + L.bk, D), gbv(grad.data() + L.bv, D),
      gbo(grad.data() + L.bo, D);

  RowMat dx = dy;  // residual path
  gwo.noalias() += t.attn.transpose() * dy;
  gbo += dy.colwise().sum();
  const RowMat dattn = dy * wo.transpose();

  RowMat dq = RowMat::Zero(N, D), dk = RowMat::Zero(N, D), dv = RowMat::Zero(N, D);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const int span = 2 * g - 1;
  for (int h = 0; h < H; ++h) {
    const RowMat& P = t.probs[static_cast<std::size_t>(h)];
    const auto dOh = dattn.middleCols(h * dh, dh);
    const RowMat dP = dOh * t.v.middleCols(h * dh, dh).transpose();
    dv.middleCols(h * dh, dh).noalias() = P.transpose() * dOh;
    RowMat dS = P;
    for (Eigen::Index i = 0; i < N; ++i) {
      const double row_dot = dP.row(i).dot(P.row(i));
      dS.row(i) = P.row(i).cwiseProduct((dP.row(i).array() - row_dot).matrix());
    }
    if (cfg.use_pos_encoding) {
      double* rr = grad.data() + L.rel_row + static_cast<std::size_t>(h) * span;
      double* rc = grad.data() + L.rel_col + static_cast<std::size_t>(h) * span;
      for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = 0; j < N; ++j) {
          const int ri = static_cast<int>(i) / g, ci = static_cast<int>(i) % g;
          const int rj = static_cast<int>(j) / g, cj = static_cast<int>(j) % g;
          rr[rel_index(ri, rj, g)] += dS(i, j);
          rc[rel_index(ci, cj, g)] += dS(i, j);
        }
    }
    dq.middleCols(h * dh, dh).noalias() = (dS * t.k.middleCols(h * dh, dh)) * scale;
    dk.middleCols(h * dh, dh).noalias() = (dS.transpose() * t.q.middleCols(h * dh, dh)) * scale;
  }
  gwq.noalias() += X.transpose() * dq;
  gwk.noalias() += X.transpose() * dk;
  gwv.noalias() += X.transpose() * dv;
  gbq += dq.colwise().sum();
  gbk += dk.colwise().sum();
  gbv += dv.colwise().sum();
  dx.noalias() += dq * wq.transpose();
  dx.noalias() += dk * wk.transpose();
  dx.noalias() += dv * wv.transpose();
  return dx;
}

}  // namespace

int ModelConfig::grid_size() const {
  int s = input_size;
  for (const ConvStage& st : conv_stages) s = (s - 1) / std::max(st.stride, 1) + 1;
  return s;
}

void ModelConfig::validate() const {
  if (input_size < 1) throw std::invalid_argument("model: input_size must be positive");
  for (const ConvStage& st : conv_stages) {
    if (st.channels < 1) throw std::invalid_argument("model: conv channels must be positive");
    if (st.stride != 1 && st.stride != 2) throw std::invalid_argument("model: conv stride must be 1 or 2");
  }
  if (input_size == 224 && grid_size() != 7)
    throw std::invalid_argument("model: conv stages must reduce 224x224 to a 7x7 grid, got " +
                                std::to_string(grid_size()));
  if (use_attention) {
    if (attn_heads < 1 || feature_dim() % attn_heads != 0)
      throw std::invalid_argument("model: feature_dim must be divisible by attn_heads");
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw std::invalid_argument("model: dropout_p must be in [0, 1)");
  if (!(input_scale > 0.0) || !std::isfinite(input_scale)) throw std::invalid_argument("model: bad input_scale");
  if (out_levels < 1 || out_curves < 1) throw std::invalid_argument("model: output shape must be positive");
}

RegressorModel::RegressorModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::size_t off = 0;
  auto take = [&](std::size_t n) {
    const std::size_t at = off;
    off += n;
    return at;
  };
  int size = cfg_.input_size, cin = cfg_.input_channels();
  for (const ConvStage& st : cfg_.conv_stages) {
    ParamLayout::Conv c;
    c.cin = cin;
    c.cout = st.channels;
    c.stride = st.stride;
    c.in_size = size;
    c.out_size = (size - 1) / st.stride + 1;
    c.w = take(static_cast<std::size_t>(9) * cin * st.channels);
    c.b = take(static_cast<std::size_t>(st.channels));
    layout_.conv.push_back(c);
    size = c.out_size;
    cin = st.channels;
  }
  const auto D = static_cast<std::size_t>(cfg_.feature_dim());
  if (cfg_.use_attention) {
    layout_.wq = take(D * D);
    layout_.wk = take(D * D);
    layout_.wv = take(D * D);
    layout_.wo = take(D * D);
    layout_.bq = take(D);
    layout_.bk = take(D);
    layout_.bv = take(D);
    layout_.bo = take(D);
    if (cfg_.use_pos_encoding) {
      const auto span = static_cast<std::size_t>(cfg_.attn_heads) * (2 * cfg_.grid_size() - 1);
      layout_.rel_row = take(span);
      layout_.rel_col = take(span);
    }
  }
  layout_.wh = take(D * static_cast<std::size_t>(cfg_.outputs()));
  layout_.bh = take(static_cast<std::size_t>(cfg_.outputs()));
  layout_.total = off;
  params_.assign(off, 0.0);
  offset_.assign(static_cast<std::size_t>(cfg_.outputs()), 0.0);
}

std::vector<ParamBlock> RegressorModel::blocks() const {
  std::vector<ParamBlock> out;
  for (std::size_t i = 0; i < layout_.conv.size(); ++i) {
    const auto& c = layout_.conv[i];
    out.push_back({"conv" + std::to_string(i) + ".weight", c.w, static_cast<std::size_t>(9) * c.cin * c.cout});
    out.push_back({"conv" + std::to_string(i) + ".bias", c.b, static_cast<std::size_t>(c.cout)});
  }
  const auto D = static_cast<std::size_t>(cfg_.feature_dim());
  if (cfg_.use_attention) {
    out.push_back({"attn.wq", layout_.wq, D * D});
    out.push_back({"attn.wk", layout_.wk, D * D});
    out.push_back({"attn.wv", layout_.wv, D * D});
    out.push_back({"attn.wo", layout_.wo, D * D});
    out.push_back({"attn.bq", layout_.bq, D});
    out.push_back({"attn.bk", layout_.bk, D});
    out.push_back({"attn.bv", layout_.bv, D});
    out.push_back({"attn.bo", layout_.bo, D});
    if (cfg_.use_pos_encoding) {
      const auto span = static_cast<std::size_t>(cfg_.attn_heads) * (2 * cfg_.grid_size() - 1);
      out.push_back({"attn.rel_row", layout_.rel_row, span});
      out.push_back({"attn.rel_col", layout_.rel_col, span});
    }
  }
  out.push_back({"head.weight", layout_.wh, D * static_cast<std::size_t>(cfg_.outputs())});
  out.push_back({"head.bias", layout_.bh, static_cast<std::size_t>(cfg_.outputs())});
  return out;
}

void RegressorModel::initialize(std::uint64_t seed) {
  Rng rng(seed);
  std::fill(params_.begin(), params_.end(), 0.0);
  auto fill_uniform = [&](std::size_t at, std::size_t n, double bound) {
    for (std::size_t i = 0; i < n; ++i) params_[at + i] = uniform(rng, -bound, bound);
  };
  for (const auto& c : layout_.conv)
    fill_uniform(c.w, static_cast<std::size_t>(9) * c.cin * c.cout, std::sqrt(6.0 / (9.0 * c.cin)));
  const auto D = static_cast<std::size_t>(cfg_.feature_dim());
  const double linear_bound = std::sqrt(3.0 / static_cast<double>(D));
  if (cfg_.use_attention)
    for (std::size_t at : {layout_.wq, layout_.wk, layout_.wv, layout_.wo}) fill_uniform(at, D * D, linear_bound);
  fill_uniform(layout_.wh, D * static_cast<std::size_t>(cfg_.outputs()), linear_bound);
}

void RegressorModel::set_output_offset(std::span<const double> offset) {
  if (offset.size() != offset_.size()) throw std::invalid_argument("set_output_offset: expected one value per output");
  for (double v : offset)
    if (!std::isfinite(v)) throw std::invalid_argument("set_output_offset: non-finite value");
  offset_.assign(offset.begin(), offset.end());
}

bool RegressorModel::all_finite() const {
  return std::all_of(params_.begin(), params_.end(), [](double v) { return std::isfinite(v); });
}

std::vector<double> forward(const RegressorModel& model, const Image2D& image, Mode mode, ForwardTape* tape,
                            Rng* dropout_rng) {
  const ModelConfig& cfg = model.config();
  const ParamLayout& L = model.layout();
  const auto p = model.parameters();
  const int S = cfg.input_size;
  if (image.rows != S || image.cols != S)
    throw std::invalid_argument("forward: expected a " + std::to_string(S) + "x" + std::to_string(S) + " image");
  for (double v : image.data)
    if (!std::isfinite(v)) throw std::invalid_argument("forward: non-finite input");

  ForwardTape local;
  ForwardTape& t = tape ? *tape : local;

  RowMat input(static_cast<Eigen::Index>(S) * S, cfg.input_channels());
  const double denom = S > 1 ? S - 1.0 : 1.0;
  for (int r = 0; r < S; ++r)
    for (int c = 0; c < S; ++c) {
      const Eigen::Index i = static_cast<Eigen::Index>(r) * S + c;
      input(i, 0) = image.at(r, c) * cfg.input_scale;
      if (cfg.coord_channels) {
        input(i, 1) = -1.0 + 2.0 * c / denom;
        input(i, 2) = -1.0 + 2.0 * r / denom;
      }
    }

  t.cols.resize(L.conv.size());
  t.acts.resize(L.conv.size());
  const RowMat* current = &input;
  for (std::size_t l = 0; l < L.conv.size(); ++l) {
    const auto& c = L.conv[l];
    im2col(*current, c.in_size, c.cin, c.stride, c.out_size, t.cols[l]);
    ConstMapMat w(p.data() + c.w, 9 * c.cin, c.cout);
    ConstMapVec b(p.data() + c.b, c.cout);
    t.acts[l].noalias() = t.cols[l] * w;
    t.acts[l].rowwise() += b;
    t.acts[l] = t.acts[l].cwiseMax(0.0);
    current = &t.acts[l];
  }
  t.tokens = *current;

  if (cfg.use_attention) {
    attention_forward(model, t);
  } else {
    t.y = t.tokens;
  }
  t.pooled = t.y.colwise().mean();

  const int D = cfg.feature_dim();
  t.drop_scale = RowVec::Ones(D);
  if (mode == Mode::Train && cfg.dropout_p > 0.0) {
    if (!dropout_rng) throw std::invalid_argument("forward: train mode with dropout needs an rng");
    const double keep_scale = 1.0 / (1.0 - cfg.dropout_p);
    for (int d = 0; d < D; ++d) t.drop_scale(d) = uniform(*dropout_rng, 0.0, 1.0) < cfg.dropout_p ? 0.0 : keep_scale;
  }
  t.dropped = t.pooled.cwiseProduct(t.drop_scale);

  ConstMapMat wh(p.data() + L.wh, D, cfg.outputs());
  ConstMapVec bh(p.data() + L.bh, cfg.outputs());
  const RowVec out = t.dropped * wh + bh + ConstMapVec(model.output_offset().data(), cfg.outputs());
  return {out.data(), out.data() + out.size()};
}

void backward(const RegressorModel& model, const ForwardTape& t, std::span<const double> d_out,
              std::span<double> grad) {
  const ModelConfig& cfg = model.config();
  const ParamLayout& L = model.layout();
  const auto p = model.parameters();
  if (d_out.size() != static_cast<std::size_t>(cfg.outputs())) throw std::invalid_argument("backward: bad d_out size");
  if (grad.size() != model.parameter_count()) throw std::invalid_argument("backward: bad grad size");
  const int D = cfg.feature_dim();

  ConstMapVec dout(d_out.data(), cfg.outputs());
  ConstMapMat wh(p.data() + L.wh, D, cfg.outputs());
  MapMat gwh(grad.data() + L.wh, D, cfg.outputs());
  MapVec gbh(grad.data() + L.bh, cfg.outputs());
  gwh.noalias() += t.dropped.transpose() * dout;
  gbh += dout;
  const RowVec dpooled = (dout * wh.transpose()).cwiseProduct(t.drop_scale);

  const Eigen::Index N = t.y.rows();
  RowMat dy = dpooled.replicate(N, 1) / static_cast<double>(N);
  RowMat da = cfg.use_attention ? attention_backward(model, t, dy, grad) : dy;

  for (std::size_t l = L.conv.size(); l-- > 0;) {
    const auto& c = L.conv[l];
    const RowMat dz = da.cwiseProduct((t.acts[l].array() > 0.0).cast<double>().matrix());
    MapMat gw(grad.data() + c.w, 9 * c.cin, c.cout);
    MapVec gb(grad.data() + c.b, c.cout);
    gw.noalias() += t.cols[l].transpose() * dz;
    gb += dz.colwise().sum();
    if (l == 0) break;
    ConstMapMat w(p.data() + c.w, 9 * c.cin, c.cout);
    const RowMat dcols = dz * w.transpose();
    col2im(dcols, c.in_size, c.cin, c.stride, c.out_size, da);
  }
}

double l1_data_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty()) throw std::invalid_argument("l1_loss: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - target[i]);
  return s / static_cast<double>(pred.size());
}

double l1_loss(std::span<const double> pred, std::span<const double> target, const RegressorModel& model,
               double penalty) {
  double reg = 0.0;
  if (penalty != 0.0)
    for (double w : model.parameters()) reg += w * w;
  return l1_data_loss(pred, target) + penalty * reg;
}

std::vector<double> l1_loss_grad(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty()) throw std::invalid_argument("l1_loss_grad: shape mismatch");
  const double inv = 1.0 / static_cast<double>(pred.size());
  std::vector<double> g(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    g[i] = d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0);
  }
  return g;
}

void add_penalty_grad(const RegressorModel& model, double penalty, std::span<double> grad) {
  if (penalty == 0.0) return;
  const auto p = model.parameters();
  for (std::size_t i = 0; i < p.size(); ++i) grad[i] += 2.0 * penalty * p[i];
}

std::vector<double> attention_pooled(const RegressorModel& model, std::span<const double> tokens) {
  const int D = model.config().feature_dim();
  const auto N = static_cast<Eigen::Index>(model.config().token_count());
  if (tokens.size() != static_cast<std::size_t>(N * D)) throw std::invalid_argument("attention_pooled: bad token shape");
  ForwardTape t;
  t.tokens = ConstMapMat(tokens.data(), N, D);
  if (model.config().use_attention) attention_forward(model, t);
  else t.y = t.tokens;
  const RowVec pooled = t.y.colwise().mean();
  return {pooled.data(), pooled.data() + pooled.size()};
}

CurveSet curveset_from_outputs(std::span<const double> outputs) {
  if (outputs.size() != static_cast<std::size_t>(kLevels * kCurves))
    throw std::invalid_argument("curveset_from_outputs: expected 209 x 6 outputs");
  CurveSet cs = CurveSet::zeros();
  for (int z = 0; z < kLevels; ++z)
    for (int plane = 0; plane < 2; ++plane) {
      std::array<double, 3> v{};
      for (int k = 0; k < 3; ++k) {
        const double raw = outputs[static_cast<std::size_t>(z) * kCurves + plane * 3 + k];
        v[k] = std::isfinite(raw) ? std::clamp(raw, 1.0, static_cast<double>(kCross)) : kCross / 2.0;
      }
      std::sort(v.begin(), v.end());
      for (int k = 0; k < 3; ++k) cs.curve(plane * 3 + k)[z] = v[k];
    }
  return cs;
}

CurveSet predict_curveset(const RegressorModel& model, const Image2D& image) {
  return curveset_from_outputs(forward(model, image, Mode::Eval));
}

std::vector<double> flatten(const CurveSet& curves) {
  const std::size_t n = curves.coronal.size();
  std::vector<double> out(n * kCurves);
  for (std::size_t z = 0; z < n; ++z)
    for (int k = 0; k < kCurves; ++k) out[z * kCurves + k] = curves.curve(k)[z];
  return out;
}

}  // namespace spine3d
