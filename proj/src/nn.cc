// Copyright 2026 The Tasteseq Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tasteseq/nn.h"

#include <bit>
#include <cmath>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace tasteseq::nn {
namespace {

Matrix Sigmoid(const Matrix& a) {
  return (1.0 + (-a.array()).exp()).inverse().matrix();
}

void FillUniform(Eigen::Ref<Matrix> m, double limit, Rng& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = dist(rng);
  }
}

double GlorotLimit(int fan_in, int fan_out) {
  return std::sqrt(6.0 / (fan_in + fan_out));
}

// Row-major flattening helpers.
void Append(const Matrix& m, double*& out) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) *out++ = m(r, c);
  }
}
void Append(const Vector& v, double*& out) {
  for (Eigen::Index i = 0; i < v.size(); ++i) *out++ = v(i);
}
void Extract(Matrix& m, const double*& in) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = *in++;
  }
}
void Extract(Vector& v, const double*& in) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = *in++;
}

void AppendLayer(const GruLayer& l, double*& out) {
  Append(l.input_weights, out);
  Append(l.recurrent_weights, out);
  Append(l.bias, out);
}
void AppendLayer(const LstmLayer& l, double*& out) {
  Append(l.input_weights, out);
  Append(l.recurrent_weights, out);
  Append(l.peepholes, out);
  Append(l.bias, out);
}
void ExtractLayer(GruLayer& l, const double*& in) {
  Extract(l.input_weights, in);
  Extract(l.recurrent_weights, in);
  Extract(l.bias, in);
}
void ExtractLayer(LstmLayer& l, const double*& in) {
  Extract(l.input_weights, in);
  Extract(l.recurrent_weights, in);
  Extract(l.peepholes, in);
  Extract(l.bias, in);
}

std::string_view ActivationName(Activation a) {
  return a == Activation::kLinear ? "linear" : "leaky_relu";
}

}  // namespace

// ---------------------------------------------------------------------------
// Dense

DenseLayer::DenseLayer(int input_dim, int output_dim, Activation activation)
    : weights(Matrix::Zero(output_dim, input_dim)),
      bias(Vector::Zero(output_dim)),
      activation(activation) {
  if (input_dim < 1 || output_dim < 1) {
    throw std::invalid_argument("dense layer dims must be positive");
  }
}

Matrix DenseLayer::Forward(const Matrix& x, Matrix* pre) const {
  if (x.rows() != weights.cols()) {
    throw std::invalid_argument("dense layer: expected input width " +
                                std::to_string(weights.cols()) + ", got " +
                                std::to_string(x.rows()));
  }
  Matrix z = weights * x;
  z.colwise() += bias;
  Matrix y = z;
  if (activation == Activation::kLeakyRelu) {
    y = z.unaryExpr([](double v) { return v > 0 ? v : kLeakiness * v; });
  }
  if (pre != nullptr) *pre = std::move(z);
  return y;
}

Matrix DenseLayer::Backward(const Matrix& x, const Matrix& pre,
                            const Matrix& dy, DenseLayer* grad) const {
  Matrix dz = dy;
  if (activation == Activation::kLeakyRelu) {
    dz = dy.cwiseProduct(
        pre.unaryExpr([](double v) { return v > 0 ? 1.0 : kLeakiness; }));
  }
  grad->weights.noalias() += dz * x.transpose();
  grad->bias += dz.rowwise().sum();
  return weights.transpose() * dz;
}

Vector DenseForward(const DenseLayer& layer, const Vector& x) {
  return layer.Forward(x);
}

// ---------------------------------------------------------------------------
// GRU

GruLayer::GruLayer(int input_dim, int hidden_dim)
    : input_weights(Matrix::Zero(3 * hidden_dim, input_dim)),
      recurrent_weights(Matrix::Zero(3 * hidden_dim, hidden_dim)),
      bias(Vector::Zero(3 * hidden_dim)) {
  if (input_dim < 1 || hidden_dim < 1) {
    throw std::invalid_argument("GRU dims must be positive");
  }
}

RecurrentState GruLayer::ZeroState(int batch) const {
  return {Matrix::Zero(hidden_dim(), batch), Matrix()};
}

RecurrentState GruLayer::Step(const Matrix& x, const RecurrentState& prev,
                              StepCache* cache) const {
  const int h = hidden_dim();
  if (x.rows() != input_weights.cols() || prev.h.rows() != h ||
      prev.h.cols() != x.cols()) {
    throw std::invalid_argument("GRU step: shape mismatch");
  }
  Matrix gates = input_weights * x;
  gates.colwise() += bias;
  gates.topRows(2 * h).noalias() +=
      recurrent_weights.topRows(2 * h) * prev.h;
  Matrix wh_g = recurrent_weights.bottomRows(h) * prev.h;
  gates.topRows(2 * h) = Sigmoid(gates.topRows(2 * h));
  gates.bottomRows(h) = (gates.bottomRows(h).array() +
                         gates.topRows(h).array() * wh_g.array())
                            .tanh()
                            .matrix();
  const auto u = gates.middleRows(h, h).array();
  RecurrentState next;
  next.h = ((1.0 - u) * prev.h.array() + u * gates.bottomRows(h).array())
               .matrix();
  if (cache != nullptr) {
    cache->x = x;
    cache->h_prev = prev.h;
    cache->gates = std::move(gates);
    cache->aux = std::move(wh_g);
  }
  return next;
}

void GruLayer::StepBackward(const StepCache& cache, const Matrix& dh,
                            const Matrix& /*dc*/, GruLayer* grad, Matrix* dx,
                            Matrix* dh_prev, Matrix* dc_prev) const {
  const int h = hidden_dim();
  const auto r = cache.gates.topRows(h).array();
  const auto u = cache.gates.middleRows(h, h).array();
  const auto g = cache.gates.bottomRows(h).array();
  const auto hp = cache.h_prev.array();
  const auto d = dh.array();

  Matrix da(3 * h, dh.cols());
  da.bottomRows(h) = (d * u * (1.0 - g * g)).matrix();
  const Matrix dwh = (da.bottomRows(h).array() * r).matrix();
  da.topRows(h) =
      (da.bottomRows(h).array() * cache.aux.array() * r * (1.0 - r)).matrix();
  da.middleRows(h, h) = (d * (g - hp) * u * (1.0 - u)).matrix();

  grad->input_weights.noalias() += da * cache.x.transpose();
  grad->recurrent_weights.topRows(2 * h).noalias() +=
      da.topRows(2 * h) * cache.h_prev.transpose();
  grad->recurrent_weights.bottomRows(h).noalias() +=
      dwh * cache.h_prev.transpose();
  grad->bias += da.rowwise().sum();

  *dh_prev = (d * (1.0 - u)).matrix();
  dh_prev->noalias() += recurrent_weights.topRows(2 * h).transpose() *
                        da.topRows(2 * h);
  dh_prev->noalias() += recurrent_weights.bottomRows(h).transpose() * dwh;
  *dx = input_weights.transpose() * da;
  if (dc_prev != nullptr) dc_prev->resize(0, 0);
}

Vector GruStep(const GruLayer& layer, const Vector& x, const Vector& h_prev) {
  return layer.Step(x, {h_prev, Matrix()}, nullptr).h;
}

// ---------------------------------------------------------------------------
// Peephole LSTM

LstmLayer::LstmLayer(int input_dim, int hidden_dim)
    : input_weights(Matrix::Zero(4 * hidden_dim, input_dim)),
      recurrent_weights(Matrix::Zero(4 * hidden_dim, hidden_dim)),
      peepholes(Vector::Zero(3 * hidden_dim)),
      bias(Vector::Zero(4 * hidden_dim)) {
  if (input_dim < 1 || hidden_dim < 1) {
    throw std::invalid_argument("LSTM dims must be positive");
  }
}

RecurrentState LstmLayer::ZeroState(int batch) const {
  return {Matrix::Zero(hidden_dim(), batch), Matrix::Zero(hidden_dim(), batch)};
}

RecurrentState LstmLayer::Step(const Matrix& x, const RecurrentState& prev,
                               StepCache* cache) const {
  const int h = hidden_dim();
  if (x.rows() != input_weights.cols() || prev.h.rows() != h ||
      prev.c.rows() != h || prev.h.cols() != x.cols() ||
      prev.c.cols() != x.cols()) {
    throw std::invalid_argument("LSTM step: shape mismatch");
  }
  Matrix gates = input_weights * x;
  gates.noalias() += recurrent_weights * prev.h;
  gates.colwise() += bias;
  const auto cp = prev.c.array();
  gates.topRows(h).array() += cp.colwise() * peepholes.head(h).array();
  gates.middleRows(h, h).array() +=
      cp.colwise() * peepholes.segment(h, h).array();
  gates.bottomRows(h).array() += cp.colwise() * peepholes.tail(h).array();

  gates.topRows(2 * h) = Sigmoid(gates.topRows(2 * h));
  gates.middleRows(2 * h, h) = gates.middleRows(2 * h, h).array().tanh().matrix();
  gates.bottomRows(h) = Sigmoid(gates.bottomRows(h));

  RecurrentState next;
  next.c = (gates.middleRows(h, h).array() * cp +
            gates.topRows(h).array() * gates.middleRows(2 * h, h).array())
               .matrix();
  Matrix tanh_c = next.c.array().tanh().matrix();
  next.h = (gates.bottomRows(h).array() * tanh_c.array()).matrix();
  if (cache != nullptr) {
    cache->x = x;
    cache->h_prev = prev.h;
    cache->c_prev = prev.c;
    cache->gates = std::move(gates);
    cache->aux = std::move(tanh_c);
  }
  return next;
}

void LstmLayer::StepBackward(const StepCache& cache, const Matrix& dh,
                             const Matrix& dc, LstmLayer* grad, Matrix* dx,
                             Matrix* dh_prev, Matrix* dc_prev) const {
  const int h = hidden_dim();
  const auto i = cache.gates.topRows(h).array();
  const auto f = cache.gates.middleRows(h, h).array();
  const auto cand = cache.gates.middleRows(2 * h, h).array();
  const auto o = cache.gates.bottomRows(h).array();
  const auto tc = cache.aux.array();
  const auto cp = cache.c_prev.array();
  const auto d = dh.array();

  Matrix dct = (d * o * (1.0 - tc * tc)).matrix();
  if (dc.size() != 0) dct += dc;
  const auto dca = dct.array();

  Matrix da(4 * h, dh.cols());
  da.topRows(h) = (dca * cand * i * (1.0 - i)).matrix();
  da.middleRows(h, h) = (dca * cp * f * (1.0 - f)).matrix();
  da.middleRows(2 * h, h) = (dca * i * (1.0 - cand * cand)).matrix();
  da.bottomRows(h) = (d * tc * o * (1.0 - o)).matrix();

  grad->input_weights.noalias() += da * cache.x.transpose();
  grad->recurrent_weights.noalias() += da * cache.h_prev.transpose();
  grad->bias += da.rowwise().sum();
  grad->peepholes.head(h) +=
      (da.topRows(h).array() * cp).matrix().rowwise().sum();
  grad->peepholes.segment(h, h) +=
      (da.middleRows(h, h).array() * cp).matrix().rowwise().sum();
  grad->peepholes.tail(h) +=
      (da.bottomRows(h).array() * cp).matrix().rowwise().sum();

  Matrix dcp = (dca * f).matrix();
  dcp.array() += da.topRows(h).array().colwise() * peepholes.head(h).array();
  dcp.array() +=
      da.middleRows(h, h).array().colwise() * peepholes.segment(h, h).array();
  dcp.array() += da.bottomRows(h).array().colwise() * peepholes.tail(h).array();
  *dc_prev = std::move(dcp);
  *dh_prev = recurrent_weights.transpose() * da;
  *dx = input_weights.transpose() * da;
}

std::pair<Vector, Vector> LstmStep(const LstmLayer& layer, const Vector& x,
                                   const Vector& h_prev, const Vector& c_prev) {
  RecurrentState next = layer.Step(x, {h_prev, c_prev}, nullptr);
  return {next.h, next.c};
}

// ---------------------------------------------------------------------------
// Architecture

int Architecture::output_dim() const {
  if (!dense.empty()) return dense.back().dim;
  return recurrent_dims.empty() ? input_dim : recurrent_dims.back();
}

std::string Architecture::Describe() const {
  std::ostringstream out;
  out << "in:" << input_dim;
  const char* kind = recurrent_kind == RecurrentKind::kGru ? "gru" : "lstm";
  for (int d : recurrent_dims) out << ' ' << kind << ':' << d;
  for (const auto& d : dense) {
    out << " dense:" << d.dim << ':' << ActivationName(d.activation);
  }
  return out.str();
}

Architecture Architecture::Parse(const std::string& descriptor) {
  Architecture arch;
  arch.recurrent_dims.clear();
  arch.dense.clear();
  std::istringstream in(descriptor);
  std::string token;
  bool have_input = false;
  bool have_kind = false;
  auto bad = [&](const std::string& why) {
    return DataError("architecture '" + descriptor + "': " + why);
  };
  auto to_int = [&](const std::string& s) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      throw bad("bad number '" + s + "'");
    }
    if (used != s.size() || v < 1) throw bad("bad number '" + s + "'");
    return v;
  };
  while (in >> token) {
    const std::size_t colon = token.find(':');
    if (colon == std::string::npos) throw bad("bad token '" + token + "'");
    const std::string kind = token.substr(0, colon);
    std::string rest = token.substr(colon + 1);
    if (kind == "in") {
      arch.input_dim = to_int(rest);
      have_input = true;
    } else if (kind == "gru" || kind == "lstm") {
      const RecurrentKind k =
          kind == "gru" ? RecurrentKind::kGru : RecurrentKind::kLstm;
      if (have_kind && k != arch.recurrent_kind) {
        throw bad("mixed recurrent layer kinds");
      }
      if (!arch.dense.empty()) throw bad("recurrent layer after dense layer");
      arch.recurrent_kind = k;
      have_kind = true;
      arch.recurrent_dims.push_back(to_int(rest));
    } else if (kind == "dense") {
      const std::size_t c2 = rest.find(':');
      if (c2 == std::string::npos) throw bad("dense layer needs activation");
      const std::string act = rest.substr(c2 + 1);
      DenseSpec spec{to_int(rest.substr(0, c2)), Activation::kLinear};
      if (act == "leaky_relu") {
        spec.activation = Activation::kLeakyRelu;
      } else if (act != "linear") {
        throw bad("unknown activation '" + act + "'");
      }
      arch.dense.push_back(spec);
    } else {
      throw bad("unknown layer '" + kind + "'");
    }
  }
  if (!have_input) throw bad("missing input width");
  if (arch.recurrent_dims.empty()) throw bad("no recurrent layers");
  return arch;
}

// ---------------------------------------------------------------------------
// Network

Network::Network(const Architecture& architecture, std::uint64_t seed)
    : architecture_(architecture) {
  if (architecture.recurrent_dims.empty()) {
    throw std::invalid_argument("network needs a recurrent layer");
  }
  Rng rng(seed);
  int in = architecture.input_dim;
  for (int hid : architecture.recurrent_dims) {
    if (architecture.recurrent_kind == RecurrentKind::kGru) {
      GruLayer layer(in, hid);
      for (int g = 0; g < 3; ++g) {
        FillUniform(layer.input_weights.middleRows(g * hid, hid),
                    GlorotLimit(in, hid), rng);
        FillUniform(layer.recurrent_weights.middleRows(g * hid, hid),
                    GlorotLimit(hid, hid), rng);
      }
      recurrent_.emplace_back(std::move(layer));
    } else {
      LstmLayer layer(in, hid);
      for (int g = 0; g < 4; ++g) {
        FillUniform(layer.input_weights.middleRows(g * hid, hid),
                    GlorotLimit(in, hid), rng);
        FillUniform(layer.recurrent_weights.middleRows(g * hid, hid),
                    GlorotLimit(hid, hid), rng);
      }
      recurrent_.emplace_back(std::move(layer));
    }
    in = hid;
  }
  for (const auto& spec : architecture.dense) {
    DenseLayer layer(in, spec.dim, spec.activation);
    FillUniform(layer.weights, GlorotLimit(in, spec.dim), rng);
    dense_.push_back(std::move(layer));
    in = spec.dim;
  }
}

std::size_t Network::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : recurrent_) {
    n += std::visit([](const auto& layer) { return layer.num_parameters(); }, l);
  }
  for (const auto& l : dense_) n += l.num_parameters();
  return n;
}

void Network::CheckInput(const Matrix& x) const {
  if (x.rows() != architecture_.input_dim) {
    throw std::invalid_argument("network: expected input width " +
                                std::to_string(architecture_.input_dim) +
                                ", got " + std::to_string(x.rows()));
  }
}

std::vector<RecurrentState> Network::ZeroStates(int batch) const {
  std::vector<RecurrentState> states;
  for (const auto& l : recurrent_) {
    states.push_back(
        std::visit([batch](const auto& layer) { return layer.ZeroState(batch); },
                   l));
  }
  return states;
}

void Network::Advance(const Matrix& x,
                      std::vector<RecurrentState>* states) const {
  CheckInput(x);
  if (states->size() != recurrent_.size()) {
    throw std::invalid_argument("network: state/layer count mismatch");
  }
  const Matrix* in = &x;
  for (std::size_t l = 0; l < recurrent_.size(); ++l) {
    (*states)[l] = std::visit(
        [&](const auto& layer) { return layer.Step(*in, (*states)[l], nullptr); },
        recurrent_[l]);
    in = &(*states)[l].h;
  }
}

Matrix Network::Head(const std::vector<RecurrentState>& states) const {
  if (states.size() != recurrent_.size()) {
    throw std::invalid_argument("network: state/layer count mismatch");
  }
  Matrix a = states.back().h;
  for (const auto& layer : dense_) a = layer.Forward(a);
  return a;
}

Matrix Network::Forward(const std::vector<Matrix>& inputs, Tape* tape) const {
  if (inputs.empty()) throw std::invalid_argument("network: empty sequence");
  const int batch = static_cast<int>(inputs.front().cols());
  for (const auto& x : inputs) {
    CheckInput(x);
    if (x.cols() != batch) {
      throw std::invalid_argument("network: inconsistent batch size");
    }
  }
  std::vector<RecurrentState> states = ZeroStates(batch);
  if (tape != nullptr) {
    tape->recorded = false;
    tape->recurrent.assign(recurrent_.size(),
                           std::vector<StepCache>(inputs.size()));
    tape->dense_inputs.clear();
    tape->dense_pre.clear();
  }
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const Matrix* in = &inputs[t];
    for (std::size_t l = 0; l < recurrent_.size(); ++l) {
      StepCache* cache = tape != nullptr ? &tape->recurrent[l][t] : nullptr;
      states[l] = std::visit(
          [&](const auto& layer) { return layer.Step(*in, states[l], cache); },
          recurrent_[l]);
      in = &states[l].h;
    }
  }
  Matrix a = states.back().h;
  for (const auto& layer : dense_) {
    Matrix pre;
    Matrix next = layer.Forward(a, &pre);
    if (tape != nullptr) {
      tape->dense_inputs.push_back(std::move(a));
      tape->dense_pre.push_back(std::move(pre));
    }
    a = std::move(next);
  }
  if (tape != nullptr) tape->recorded = true;
  return a;
}

Vector Network::Backward(const Tape& tape, const Matrix& upstream) const {
  if (!tape.recorded || tape.recurrent.size() != recurrent_.size() ||
      tape.dense_inputs.size() != dense_.size()) {
    throw StateError("backward called without a recorded forward pass");
  }
  const std::size_t steps = tape.recurrent.front().size();
  const Eigen::Index batch = tape.recurrent.front().front().x.cols();
  if (upstream.rows() != architecture_.output_dim() ||
      upstream.cols() != batch) {
    throw std::invalid_argument("backward: upstream gradient shape mismatch");
  }

  // Gradient accumulators shaped like the parameters.
  std::vector<RecurrentLayer> rgrad;
  for (const auto& l : recurrent_) {
    rgrad.push_back(std::visit(
        [](const auto& layer) -> RecurrentLayer {
          using T = std::decay_t<decltype(layer)>;
          return T(layer.input_dim(), layer.hidden_dim());
        },
        l));
  }
  std::vector<DenseLayer> dgrad;
  for (const auto& l : dense_) {
    dgrad.emplace_back(l.input_dim(), l.output_dim(), l.activation);
  }

  Matrix d = upstream;
  for (std::size_t k = dense_.size(); k-- > 0;) {
    d = dense_[k].Backward(tape.dense_inputs[k], tape.dense_pre[k], d,
                           &dgrad[k]);
  }

  // Gradients arriving at each time step's output of the current layer.
  std::vector<Matrix> from_above;
  for (std::size_t l = recurrent_.size(); l-- > 0;) {
    const bool top = l + 1 == recurrent_.size();
    const auto& caches = tape.recurrent[l];
    const Eigen::Index hid = caches.front().h_prev.rows();
    Matrix dh_next = Matrix::Zero(hid, batch);
    Matrix dc_next;
    std::vector<Matrix> dx_seq(steps);
    for (std::size_t t = steps; t-- > 0;) {
      Matrix dh = dh_next;
      if (top) {
        if (t + 1 == steps) dh += d;
      } else {
        dh += from_above[t];
      }
      Matrix dh_prev, dc_prev;
      std::visit(
          [&](const auto& layer) {
            using T = std::decay_t<decltype(layer)>;
            layer.StepBackward(caches[t], dh, dc_next, &std::get<T>(rgrad[l]),
                               &dx_seq[t], &dh_prev, &dc_prev);
          },
          recurrent_[l]);
      dh_next = std::move(dh_prev);
      dc_next = std::move(dc_prev);
    }
    from_above = std::move(dx_seq);
  }

  Vector flat(num_parameters());
  double* out = flat.data();
  for (const auto& l : rgrad) {
    std::visit([&](const auto& layer) { AppendLayer(layer, out); }, l);
  }
  for (const auto& l : dgrad) {
    Append(l.weights, out);
    Append(l.bias, out);
  }
  return flat;
}

Vector Network::Parameters() const {
  Vector flat(num_parameters());
  double* out = flat.data();
  for (const auto& l : recurrent_) {
    std::visit([&](const auto& layer) { AppendLayer(layer, out); }, l);
  }
  for (const auto& l : dense_) {
    Append(l.weights, out);
    Append(l.bias, out);
  }
  return flat;
}

void Network::SetParameters(const Vector& flat) {
  if (static_cast<std::size_t>(flat.size()) != num_parameters()) {
    throw std::invalid_argument("SetParameters: expected " +
                                std::to_string(num_parameters()) +
                                " values, got " + std::to_string(flat.size()));
  }
  const double* in = flat.data();
  for (auto& l : recurrent_) {
    std::visit([&](auto& layer) { ExtractLayer(layer, in); }, l);
  }
  for (auto& l : dense_) {
    Extract(l.weights, in);
    Extract(l.bias, in);
  }
}

// ---------------------------------------------------------------------------
// Adam

void AdamUpdate(Vector& params, const Vector& grads, AdamState& state) {
  if (params.size() != grads.size() ||
      state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw std::invalid_argument("adam: shape mismatch");
  }
  if (!grads.allFinite()) {
    throw TrainingDiverged("adam: non-finite gradient at step " +
                           std::to_string(state.step + 1));
  }
  const AdamOptions& o = state.options;
  ++state.step;
  state.first_moment = o.beta1 * state.first_moment + (1.0 - o.beta1) * grads;
  state.second_moment = o.beta2 * state.second_moment +
                        (1.0 - o.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  params.array() -= o.learning_rate * (state.first_moment.array() / c1) /
                    ((state.second_moment.array() / c2).sqrt() + o.epsilon);
}

// ---------------------------------------------------------------------------
// Serialization

void WriteNetwork(std::ostream& out, const Network& network,
                  const std::string& metadata) {
  if (metadata.find('\n') != std::string::npos) {
    throw std::invalid_argument("metadata must be a single line");
  }
  out << "TSEQ1\n"
      << "arch " << network.architecture().Describe() << '\n'
      << "meta " << metadata << '\n';
  const Vector params = network.Parameters();
  std::string bytes(params.size() * 4, '\0');
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(params(i)));
    for (int b = 0; b < 4; ++b) {
      bytes[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    }
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Network ReadNetwork(std::istream& in, std::string* metadata) {
  std::string line;
  if (!std::getline(in, line) || line != "TSEQ1") {
    throw DataError("weight file: bad magic");
  }
  if (!std::getline(in, line) || line.rfind("arch ", 0) != 0) {
    throw DataError("weight file: missing architecture line");
  }
  const Architecture arch = Architecture::Parse(line.substr(5));
  if (!std::getline(in, line) || line.rfind("meta", 0) != 0) {
    throw DataError("weight file: missing metadata line");
  }
  if (metadata != nullptr) {
    *metadata = line.size() > 5 ? line.substr(5) : std::string();
  }
  Network network(arch, 0);
  const std::size_t n = network.num_parameters();
  std::string bytes(n * 4, '\0');
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
    throw DataError("weight file: truncated parameters");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError("weight file: trailing bytes");
  }
  Vector params(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(
                  static_cast<unsigned char>(bytes[i * 4 + b]))
              << (8 * b);
    }
    params(i) = std::bit_cast<float>(bits);
  }
  network.SetParameters(params);
  return network;
}

}  // namespace tasteseq::nn
