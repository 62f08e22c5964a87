#include "guidedco/gnn.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace guidedco {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct FlatView {
  double* data;
  Eigen::Index size;
};

template <class Params>
std::vector<FlatView> flat_trainables(Params& p) {
  std::vector<FlatView> out;
  for_each_trainable(p, [&](const std::string&, auto& t) {
    out.push_back({const_cast<double*>(t.data()), t.size()});
  });
  return out;
}

MatrixXd glorot(int rows, int cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  MatrixXd m(rows, cols);
  // fill row-major so the draw order does not depend on storage order
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = (2.0 * rng.uniform() - 1.0) * limit;
  return m;
}

MatrixXd sigmoid_of(const MatrixXd& m, double shift = 0.0) {
  return m.unaryExpr([shift](double x) { return sigmoid(x + shift); });
}

// sigmoid(x + eps) given s = sigmoid(x); only entries where the shift is
// representable need recomputing.
MatrixXd shifted_sigmoid(const MatrixXd& x, const MatrixXd& s, double eps) {
  MatrixXd t = s;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x.data()[i] + eps != x.data()[i]) t.data()[i] = sigmoid(x.data()[i] + eps);
  }
  return t;
}

void scatter_add(const MatrixXd& cols, const std::vector<int>& index, MatrixXd& out) {
  for (Eigen::Index k = 0; k < cols.cols(); ++k) out.col(index[k]) += cols.col(k);
}

void check_finite(const MatrixXd& m, const std::string& where) {
  if (!m.allFinite()) throw std::runtime_error("non-finite activation in " + where);
}

MatrixXd batch_norm(const MatrixXd& h, const VectorXd& scale, const VectorXd& shift,
                    const VectorXd& running_mean, const VectorXd& running_var, NormMode mode,
                    double eps, BatchNormCache& cache) {
  const auto cols = h.cols();
  if (mode == NormMode::BatchStats && cols > 0) {
    cache.mean = h.rowwise().mean();
    cache.var = (h.colwise() - cache.mean).array().square().rowwise().mean();
  } else {
    cache.mean = running_mean;
    cache.var = running_var;
  }
  cache.inv_std = (cache.var.array() + eps).rsqrt();
  cache.normalized = (h.colwise() - cache.mean).array().colwise() * cache.inv_std.array();
  MatrixXd out = cache.normalized.array().colwise() * scale.array();
  out.colwise() += shift;
  return out;
}

// Returns dL/dh given dL/d(normalized) for the same cache.
MatrixXd batch_norm_backward(const MatrixXd& d_norm, const BatchNormCache& cache, NormMode mode) {
  const auto cols = d_norm.cols();
  if (mode == NormMode::FixedStats || cols == 0) {
    return d_norm.array().colwise() * cache.inv_std.array();
  }
  const double n = static_cast<double>(cols);
  const VectorXd sum_d = d_norm.rowwise().sum();
  const VectorXd sum_dx = d_norm.cwiseProduct(cache.normalized).rowwise().sum();
  MatrixXd out = n * d_norm;
  out.colwise() -= sum_d;
  out -= (cache.normalized.array().colwise() * sum_dx.array()).matrix();
  return (out.array().colwise() * (cache.inv_std.array() / n)).matrix();
}

}  // namespace

void GnnConfig::validate() const {
  if (layers < 1) throw std::invalid_argument("gnn: layers must be >= 1");
  if (hidden < 1) throw std::invalid_argument("gnn: hidden must be >= 1");
  if (head_layers < 1) throw std::invalid_argument("gnn: head_layers must be >= 1");
  if (!(epsilon > 0.0)) throw std::invalid_argument("gnn: epsilon must be > 0");
  if (node_features < 1 || edge_features < 1) throw std::invalid_argument("gnn: feature dims must be >= 1");
  if (!(bn_eps > 0.0)) throw std::invalid_argument("gnn: bn_eps must be > 0");
  if (!(bn_momentum >= 0.0 && bn_momentum <= 1.0)) throw std::invalid_argument("gnn: bn_momentum in [0,1]");
}

ModelParams init_params(const GnnConfig& config, Rng& rng) {
  config.validate();
  const int d = config.hidden;
  ModelParams p;
  p.config = config;
  p.node_embed_w = glorot(d, config.node_features, rng);
  p.node_embed_b = VectorXd::Zero(d);
  p.edge_embed_w = glorot(d, config.edge_features, rng);
  p.edge_embed_b = VectorXd::Zero(d);
  p.layers.resize(config.layers);
  for (auto& L : p.layers) {
    L.w1 = glorot(d, d, rng);
    L.w2 = glorot(d, d, rng);
    L.w3 = glorot(d, d, rng);
    L.w4 = glorot(d, d, rng);
    L.w5 = glorot(d, d, rng);
    L.node_scale = L.edge_scale = VectorXd::Ones(d);
    L.node_shift = L.edge_shift = VectorXd::Zero(d);
    L.node_mean = L.edge_mean = VectorXd::Zero(d);
    L.node_var = L.edge_var = VectorXd::Ones(d);
  }
  for (int h = 0; h < config.head_layers; ++h) {
    const int out = h + 1 == config.head_layers ? 1 : d;
    p.head_w.push_back(glorot(out, d, rng));
    p.head_b.push_back(VectorXd::Zero(out));
  }
  return p;
}

ParamGrads zero_grads(const ModelParams& params) {
  ParamGrads g;
  g.config = params.config;
  g.layers.resize(params.layers.size());
  g.node_embed_w = MatrixXd::Zero(params.node_embed_w.rows(), params.node_embed_w.cols());
  g.node_embed_b = VectorXd::Zero(params.node_embed_b.size());
  g.edge_embed_w = MatrixXd::Zero(params.edge_embed_w.rows(), params.edge_embed_w.cols());
  g.edge_embed_b = VectorXd::Zero(params.edge_embed_b.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& s = params.layers[l];
    auto& t = g.layers[l];
    t.w1 = MatrixXd::Zero(s.w1.rows(), s.w1.cols());
    t.w2 = MatrixXd::Zero(s.w2.rows(), s.w2.cols());
    t.w3 = MatrixXd::Zero(s.w3.rows(), s.w3.cols());
    t.w4 = MatrixXd::Zero(s.w4.rows(), s.w4.cols());
    t.w5 = MatrixXd::Zero(s.w5.rows(), s.w5.cols());
    t.node_scale = VectorXd::Zero(s.node_scale.size());
    t.node_shift = VectorXd::Zero(s.node_shift.size());
    t.edge_scale = VectorXd::Zero(s.edge_scale.size());
    t.edge_shift = VectorXd::Zero(s.edge_shift.size());
  }
  for (std::size_t h = 0; h < params.head_w.size(); ++h) {
    g.head_w.push_back(MatrixXd::Zero(params.head_w[h].rows(), params.head_w[h].cols()));
    g.head_b.push_back(VectorXd::Zero(params.head_b[h].size()));
  }
  return g;
}

std::size_t parameter_count(const ModelParams& params) {
  std::size_t n = 0;
  for_each_trainable(params, [&](const std::string&, const auto& t) { n += t.size(); });
  return n;
}

std::size_t parameter_count_formula(const GnnConfig& c) {
  const std::size_t d = c.hidden;
  return (c.node_features + 1) * d + (c.edge_features + 1) * d + c.layers * (5 * d * d + 4 * d) +
         (c.head_layers - 1) * (d * d + d) + (d + 1);
}

GnnInput make_input(const ProblemGraph& graph) {
  GnnInput in;
  const int n = graph.node_count();
  const std::size_t m = graph.edge_count();
  in.node_count = n;
  in.edges.assign(graph.edges().begin(), graph.edges().end());
  in.node_features.resize(2, n);
  in.edge_features.resize(2, static_cast<Eigen::Index>(m));
  if (graph.coords()) {
    const auto& pts = *graph.coords();
    for (int v = 0; v < n; ++v) in.node_features.col(v) << pts[v].x, pts[v].y;
    for (std::size_t e = 0; e < m; ++e) in.edge_features.col(e) << graph.weight(e), 1.0;
  } else {
    for (int v = 0; v < n; ++v)
      in.node_features.col(v) << static_cast<double>(graph.degree(v)) / n, 1.0;
    double mean = 0.0;
    for (double w : graph.weights()) mean += w;
    mean = m ? mean / m : 1.0;
    for (std::size_t e = 0; e < m; ++e) in.edge_features.col(e) << graph.weight(e) / mean, 1.0;
  }
  in.edge_offsets = {0, m};
  in.node_offsets = {0, n};
  return in;
}

GnnInput make_input(const ProblemInstance& instance) { return make_input(instance.graph); }

GnnInput concat_inputs(const std::vector<const GnnInput*>& parts) {
  GnnInput out;
  if (parts.empty()) return out;
  Eigen::Index total_nodes = 0, total_edges = 0;
  for (const auto* p : parts) {
    total_nodes += p->node_count;
    total_edges += static_cast<Eigen::Index>(p->edges.size());
  }
  out.node_features.resize(parts.front()->node_features.rows(), total_nodes);
  out.edge_features.resize(parts.front()->edge_features.rows(), total_edges);
  out.edges.reserve(total_edges);
  for (const auto* p : parts) {
    const int base = out.node_count;
    const auto ebase = static_cast<Eigen::Index>(out.edges.size());
    out.node_features.middleCols(base, p->node_count) = p->node_features;
    out.edge_features.middleCols(ebase, p->edges.size()) = p->edge_features;
    for (const auto& e : p->edges) out.edges.push_back({e.u + base, e.v + base});
    out.node_count += p->node_count;
    out.node_offsets.push_back(out.node_count);
    out.edge_offsets.push_back(out.edges.size());
  }
  return out;
}

ForwardResult forward(const ModelParams& params, const GnnInput& input, NormMode mode) {
  const auto& cfg = params.config;
  const int n = input.node_count;
  const auto m = static_cast<Eigen::Index>(input.edges.size());
  const Eigen::Index D = 2 * m;
  if (input.node_features.rows() != cfg.node_features || input.node_features.cols() != n)
    throw std::invalid_argument("gnn forward: node feature shape mismatch");
  if (input.edge_features.rows() != cfg.edge_features || input.edge_features.cols() != m)
    throw std::invalid_argument("gnn forward: edge feature shape mismatch");
  if (static_cast<int>(params.layers.size()) != cfg.layers ||
      static_cast<int>(params.head_w.size()) != cfg.head_layers)
    throw std::invalid_argument("gnn forward: parameters do not match config");

  ForwardResult res;
  ForwardTrace& tr = res.trace;
  tr.mode = mode;
  tr.node_count = n;
  tr.node_features = input.node_features;
  tr.edge_features = input.edge_features;
  tr.src.resize(D);
  tr.dst.resize(D);
  for (Eigen::Index e = 0; e < m; ++e) {
    const auto& ed = input.edges[e];
    if (ed.u < 0 || ed.v < 0 || ed.u >= n || ed.v >= n || ed.u == ed.v)
      throw std::invalid_argument("gnn forward: edge endpoint out of range");
    tr.src[2 * e] = ed.u;
    tr.dst[2 * e] = ed.v;
    tr.src[2 * e + 1] = ed.v;
    tr.dst[2 * e + 1] = ed.u;
  }

  MatrixXd x = params.node_embed_w * input.node_features;
  x.colwise() += params.node_embed_b;
  MatrixXd e_und = params.edge_embed_w * input.edge_features;
  e_und.colwise() += params.edge_embed_b;
  MatrixXd e(cfg.hidden, D);
  for (Eigen::Index k = 0; k < m; ++k) e.col(2 * k) = e.col(2 * k + 1) = e_und.col(k);

  tr.layers.resize(cfg.layers);
  for (int l = 0; l < cfg.layers; ++l) {
    const auto& L = params.layers[l];
    LayerTrace& lt = tr.layers[l];
    lt.x = x;
    lt.e = e;
    lt.s = sigmoid_of(e);
    const MatrixXd t = shifted_sigmoid(e, lt.s, cfg.epsilon);
    lt.den = MatrixXd::Zero(cfg.hidden, n);
    scatter_add(t, tr.src, lt.den);
    lt.w2x = L.w2 * x;

    MatrixXd hn = L.w1 * x;
    const MatrixXd msg = lt.s.cwiseProduct(lt.w2x(Eigen::all, tr.dst)).cwiseQuotient(lt.den(Eigen::all, tr.src));
    scatter_add(msg, tr.src, hn);
    const MatrixXd w4x = L.w4 * x;
    const MatrixXd w5x = L.w5 * x;
    MatrixXd he = L.w3 * e;
    he += w4x(Eigen::all, tr.src);
    he += w5x(Eigen::all, tr.dst);

    const MatrixXd nn = batch_norm(hn, L.node_scale, L.node_shift, L.node_mean, L.node_var, mode,
                                   cfg.bn_eps, lt.node_bn);
    const MatrixXd ne = batch_norm(he, L.edge_scale, L.edge_shift, L.edge_mean, L.edge_var, mode,
                                   cfg.bn_eps, lt.edge_bn);
    x += nn.cwiseMax(0.0);
    e += ne.cwiseMax(0.0);
    check_finite(x, "layer " + std::to_string(l) + " (nodes)");
    check_finite(e, "layer " + std::to_string(l) + " (edges)");
  }

  MatrixXd h = e;
  for (int i = 0; i < cfg.head_layers; ++i) {
    tr.head_inputs.push_back(h);
    MatrixXd z = params.head_w[i] * h;
    z.colwise() += params.head_b[i];
    h = i + 1 == cfg.head_layers ? z : z.cwiseMax(0.0);
  }
  check_finite(h, "head");
  tr.directed_out = h.row(0);
  res.scores.resize(m);
  for (Eigen::Index k = 0; k < m; ++k)
    res.scores[k] = 0.5 * (tr.directed_out(2 * k) + tr.directed_out(2 * k + 1));
  return res;
}

ForwardResult forward(const ModelParams& params, const GnnInput& input) {
  return forward(params, input, params.config.norm_mode);
}

EdgeScores predict(const ModelParams& params, const ProblemInstance& instance, NormMode mode) {
  return EdgeScores(forward(params, make_input(instance), mode).scores);
}

BackwardResult backward(const ModelParams& params, const ForwardTrace& tr,
                        const std::vector<double>& grad_scores) {
  const auto& cfg = params.config;
  const auto D = static_cast<Eigen::Index>(tr.src.size());
  const Eigen::Index m = D / 2;
  if (static_cast<Eigen::Index>(grad_scores.size()) != m)
    throw std::invalid_argument("gnn backward: gradient length does not match edge count");
  if (static_cast<int>(tr.layers.size()) != cfg.layers ||
      static_cast<int>(tr.head_inputs.size()) != cfg.head_layers)
    throw std::invalid_argument("gnn backward: trace does not match parameters");

  BackwardResult out;
  ParamGrads& g = out.grads;
  g = zero_grads(params);

  MatrixXd dz(1, D);
  for (Eigen::Index k = 0; k < m; ++k) dz(0, 2 * k) = dz(0, 2 * k + 1) = 0.5 * grad_scores[k];
  MatrixXd de;
  for (int i = cfg.head_layers - 1; i >= 0; --i) {
    const MatrixXd& hin = tr.head_inputs[i];
    g.head_w[i] += dz * hin.transpose();
    g.head_b[i] += dz.rowwise().sum();
    MatrixXd dh = params.head_w[i].transpose() * dz;
    if (i > 0) {
      dz = (hin.array() > 0.0).select(dh.array(), 0.0).matrix();
    } else {
      de = std::move(dh);
    }
  }

  MatrixXd dx = MatrixXd::Zero(cfg.hidden, tr.node_count);
  for (int l = cfg.layers - 1; l >= 0; --l) {
    const auto& L = params.layers[l];
    const LayerTrace& lt = tr.layers[l];
    auto& G = g.layers[l];

    // residual branches: x' = x + relu(bn(hn)), e' = e + relu(bn(he))
    const MatrixXd nn = (lt.node_bn.normalized.array().colwise() * L.node_scale.array()).colwise() +
                        L.node_shift.array();
    const MatrixXd ne = (lt.edge_bn.normalized.array().colwise() * L.edge_scale.array()).colwise() +
                        L.edge_shift.array();
    const MatrixXd dnn = (nn.array() > 0.0).select(dx.array(), 0.0).matrix();
    const MatrixXd dne = (ne.array() > 0.0).select(de.array(), 0.0).matrix();
    G.node_scale += dnn.cwiseProduct(lt.node_bn.normalized).rowwise().sum();
    G.node_shift += dnn.rowwise().sum();
    G.edge_scale += dne.cwiseProduct(lt.edge_bn.normalized).rowwise().sum();
    G.edge_shift += dne.rowwise().sum();
    const MatrixXd dhn = batch_norm_backward((dnn.array().colwise() * L.node_scale.array()).matrix(), lt.node_bn, tr.mode);
    const MatrixXd dhe = batch_norm_backward((dne.array().colwise() * L.edge_scale.array()).matrix(), lt.edge_bn, tr.mode);

    MatrixXd dx_in = dx;
    MatrixXd de_in = de;

    // node path: hn_i = W1 x_i + sum_k eta_k * (W2 x)_dst(k)
    G.w1 += dhn * lt.x.transpose();
    dx_in += L.w1.transpose() * dhn;
    const MatrixXd& s = lt.s;
    const MatrixXd t = shifted_sigmoid(lt.e, s, cfg.epsilon);
    const MatrixXd den_src = lt.den(Eigen::all, tr.src);
    const MatrixXd dh_src = dhn(Eigen::all, tr.src);
    const MatrixXd eta = s.cwiseQuotient(den_src);
    const MatrixXd deta = dh_src.cwiseProduct(lt.w2x(Eigen::all, tr.dst));
    MatrixXd dw2x = MatrixXd::Zero(cfg.hidden, tr.node_count);
    scatter_add(dh_src.cwiseProduct(eta), tr.dst, dw2x);
    MatrixXd dden = MatrixXd::Zero(cfg.hidden, tr.node_count);
    scatter_add(deta.cwiseProduct(eta).cwiseQuotient(den_src), tr.src, dden);
    de_in.array() += deta.cwiseQuotient(den_src).array() * s.array() * (1.0 - s.array()) -
                     dden(Eigen::all, tr.src).array() * t.array() * (1.0 - t.array());
    G.w2 += dw2x * lt.x.transpose();
    dx_in += L.w2.transpose() * dw2x;

    // edge path: he_k = W3 e_k + W4 x_src + W5 x_dst
    G.w3 += dhe * lt.e.transpose();
    de_in += L.w3.transpose() * dhe;
    MatrixXd g4 = MatrixXd::Zero(cfg.hidden, tr.node_count);
    MatrixXd g5 = MatrixXd::Zero(cfg.hidden, tr.node_count);
    scatter_add(dhe, tr.src, g4);
    scatter_add(dhe, tr.dst, g5);
    G.w4 += g4 * lt.x.transpose();
    G.w5 += g5 * lt.x.transpose();
    dx_in += L.w4.transpose() * g4 + L.w5.transpose() * g5;

    dx = std::move(dx_in);
    de = std::move(de_in);
  }

  g.node_embed_w += dx * tr.node_features.transpose();
  g.node_embed_b += dx.rowwise().sum();
  MatrixXd de_und(cfg.hidden, m);
  for (Eigen::Index k = 0; k < m; ++k) de_und.col(k) = de.col(2 * k) + de.col(2 * k + 1);
  g.edge_embed_w += de_und * tr.edge_features.transpose();
  g.edge_embed_b += de_und.rowwise().sum();
  out.edge_feature_grad = params.edge_embed_w.transpose() * de_und;
  return out;
}

void update_running_stats(ModelParams& params, const ForwardTrace& trace) {
  if (trace.mode != NormMode::BatchStats) return;
  const double mom = params.config.bn_momentum;
  auto fold = [mom](VectorXd& mean, VectorXd& var, const BatchNormCache& c, Eigen::Index count) {
    if (count == 0) return;
    const double unbias = count > 1 ? static_cast<double>(count) / (count - 1) : 1.0;
    mean = (1.0 - mom) * mean + mom * c.mean;
    var = (1.0 - mom) * var + mom * unbias * c.var;
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& lt = trace.layers[l];
    fold(params.layers[l].node_mean, params.layers[l].node_var, lt.node_bn, lt.node_bn.normalized.cols());
    fold(params.layers[l].edge_mean, params.layers[l].edge_var, lt.edge_bn, lt.edge_bn.normalized.cols());
  }
}

void add_grads(ParamGrads& into, const ParamGrads& g) {
  auto a = flat_trainables(into);
  auto b = flat_trainables(g);
  if (a.size() != b.size()) throw std::invalid_argument("add_grads: layout mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size != b[i].size) throw std::invalid_argument("add_grads: shape mismatch");
    for (Eigen::Index j = 0; j < a[i].size; ++j) a[i].data[j] += b[i].data[j];
  }
}

bool same_params(const ModelParams& a, const ModelParams& b) {
  bool same = true;
  std::vector<std::pair<const double*, Eigen::Index>> xs, ys;
  auto collect = [](auto& list) {
    return [&list](const std::string&, const auto& t) { list.emplace_back(t.data(), t.size()); };
  };
  for_each_trainable(a, collect(xs));
  for_each_buffer(a, collect(xs));
  for_each_trainable(b, collect(ys));
  for_each_buffer(b, collect(ys));
  if (xs.size() != ys.size()) return false;
  for (std::size_t i = 0; i < xs.size() && same; ++i) {
    if (xs[i].second != ys[i].second) return false;
    for (Eigen::Index j = 0; j < xs[i].second; ++j) same &= xs[i].first[j] == ys[i].first[j];
  }
  return same;
}

AdamWState make_adamw_state(const ModelParams& params) {
  return AdamWState{zero_grads(params), zero_grads(params), 0};
}

void adamw_step(ModelParams& params, const ParamGrads& grads, AdamWState& state,
                const AdamWOptions& o) {
  auto p = flat_trainables(params);
  auto gr = flat_trainables(grads);
  auto m = flat_trainables(state.m);
  auto v = flat_trainables(state.v);
  if (gr.size() != p.size() || m.size() != p.size() || v.size() != p.size())
    throw std::invalid_argument("adamw_step: layout mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  const double step_size = o.lr / bc1;
  const double decay = 1.0 - o.lr * o.weight_decay;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (gr[i].size != p[i].size) throw std::invalid_argument("adamw_step: shape mismatch");
    for (Eigen::Index j = 0; j < p[i].size; ++j) {
      const double gj = gr[i].data[j];
      double& mj = m[i].data[j];
      double& vj = v[i].data[j];
      p[i].data[j] *= decay;
      mj = o.beta1 * mj + (1.0 - o.beta1) * gj;
      vj = o.beta2 * vj + (1.0 - o.beta2) * gj * gj;
      p[i].data[j] -= step_size * mj / (std::sqrt(vj) / std::sqrt(bc2) + o.eps);
    }
  }
}

PlateauScheduler::PlateauScheduler(double factor, int patience, double threshold)
    : factor_(factor), patience_(patience), threshold_(threshold),
      best_(std::numeric_limits<double>::infinity()) {}

double PlateauScheduler::step(double metric) {
  if (metric < best_ * (1.0 - threshold_)) {
    best_ = metric;
    bad_ = 0;
    return 1.0;
  }
  if (++bad_ > patience_) {
    bad_ = 0;
    return factor_;
  }
  return 1.0;
}

}  // namespace guidedco
