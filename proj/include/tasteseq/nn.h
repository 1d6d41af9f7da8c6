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

#ifndef TASTESEQ_NN_H_
#define TASTESEQ_NN_H_

// Dense, GRU and peephole-LSTM layers with exact backpropagation through
// time, plus Adam. All arithmetic is 64-bit. Activations are laid out as
// columns: a batch of B inputs of width D is a D x B matrix.

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "tasteseq/common.h"

namespace tasteseq::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { kLinear, kLeakyRelu };
inline constexpr double kLeakiness = 0.01;

enum class RecurrentKind { kGru, kLstm };

class DenseLayer {
 public:
  DenseLayer() = default;
  DenseLayer(int input_dim, int output_dim, Activation activation);

  int input_dim() const { return static_cast<int>(weights.cols()); }
  int output_dim() const { return static_cast<int>(weights.rows()); }
  std::size_t num_parameters() const { return weights.size() + bias.size(); }

  // Returns activation(W x + b); `pre` receives W x + b when non-null.
  Matrix Forward(const Matrix& x, Matrix* pre = nullptr) const;
  // Accumulates parameter gradients into `grad` and returns d/dx.
  Matrix Backward(const Matrix& x, const Matrix& pre, const Matrix& dy,
                  DenseLayer* grad) const;

  Matrix weights;  // output_dim x input_dim
  Vector bias;
  Activation activation = Activation::kLinear;
};

// Hidden (and, for the LSTM, cell) state of one recurrent layer.
struct RecurrentState {
  Matrix h;
  Matrix c;  // empty for GRU layers
};

// Activations recorded for one time step of one recurrent layer.
struct StepCache {
  Matrix x;
  Matrix h_prev;
  Matrix c_prev;
  Matrix gates;  // GRU: [r; u; g], LSTM: [i; f; c~; o]
  Matrix aux;    // GRU: W_g h_prev, LSTM: tanh(c)
};

class GruLayer {
 public:
  GruLayer() = default;
  GruLayer(int input_dim, int hidden_dim);

  int input_dim() const { return static_cast<int>(input_weights.cols()); }
  int hidden_dim() const { return static_cast<int>(bias.size() / 3); }
  std::size_t num_parameters() const {
    return input_weights.size() + recurrent_weights.size() + bias.size();
  }
  RecurrentState ZeroState(int batch) const;

  RecurrentState Step(const Matrix& x, const RecurrentState& prev,
                      StepCache* cache) const;
  // dh flows in from above and from the next time step; on return `dh_prev`
  // holds the gradient with respect to h_{t-1}.
  void StepBackward(const StepCache& cache, const Matrix& dh, const Matrix& dc,
                    GruLayer* grad, Matrix* dx, Matrix* dh_prev,
                    Matrix* dc_prev) const;

  Matrix input_weights;      // [U_r; U_u; U_g], 3H x D
  Matrix recurrent_weights;  // [W_r; W_u; W_g], 3H x H
  Vector bias;               // [b_r; b_u; b_g]
};

class LstmLayer {
 public:
  LstmLayer() = default;
  LstmLayer(int input_dim, int hidden_dim);

  int input_dim() const { return static_cast<int>(input_weights.cols()); }
  int hidden_dim() const { return static_cast<int>(bias.size() / 4); }
  std::size_t num_parameters() const {
    return input_weights.size() + recurrent_weights.size() + peepholes.size() +
           bias.size();
  }
  RecurrentState ZeroState(int batch) const;

  RecurrentState Step(const Matrix& x, const RecurrentState& prev,
                      StepCache* cache) const;
  void StepBackward(const StepCache& cache, const Matrix& dh, const Matrix& dc,
                    LstmLayer* grad, Matrix* dx, Matrix* dh_prev,
                    Matrix* dc_prev) const;

  Matrix input_weights;      // [U_i; U_f; U_c; U_o], 4H x D
  Matrix recurrent_weights;  // [W_i; W_f; W_c; W_o], 4H x H
  Vector peepholes;          // [w_i; w_f; w_o], each acting on c_{t-1}
  Vector bias;               // [b_i; b_f; b_c; b_o]
};

using RecurrentLayer = std::variant<GruLayer, LstmLayer>;

// Single-vector conveniences.
Vector DenseForward(const DenseLayer& layer, const Vector& x);
Vector GruStep(const GruLayer& layer, const Vector& x, const Vector& h_prev);
std::pair<Vector, Vector> LstmStep(const LstmLayer& layer, const Vector& x,
                                   const Vector& h_prev, const Vector& c_prev);

struct DenseSpec {
  int dim = 0;
  Activation activation = Activation::kLinear;
  bool operator==(const DenseSpec&) const = default;
};

struct Architecture {
  int input_dim = 40;
  RecurrentKind recurrent_kind = RecurrentKind::kGru;
  std::vector<int> recurrent_dims = {50, 50};
  std::vector<DenseSpec> dense = {{200, Activation::kLeakyRelu},
                                  {40, Activation::kLinear}};

  int output_dim() const;
  // e.g. "in:40 gru:50 gru:50 dense:200:leaky_relu dense:40:linear"
  std::string Describe() const;
  static Architecture Parse(const std::string& descriptor);

  bool operator==(const Architecture&) const = default;
};

// Recorded activations of a forward pass, consumed by Network::Backward.
struct Tape {
  bool recorded = false;
  std::vector<std::vector<StepCache>> recurrent;  // [layer][time]
  std::vector<Matrix> dense_inputs;
  std::vector<Matrix> dense_pre;
};

// Stacked recurrent layers followed by dense layers. The final hidden state
// of the top recurrent layer feeds the dense head.
class Network {
 public:
  Network() = default;
  // Glorot-uniform weights, zero biases and peepholes.
  Network(const Architecture& architecture, std::uint64_t seed);

  const Architecture& architecture() const { return architecture_; }
  std::size_t num_parameters() const;

  // `inputs[t]` is input_dim x B. Throws std::invalid_argument on an empty
  // sequence or shape mismatch.
  Matrix Forward(const std::vector<Matrix>& inputs, Tape* tape = nullptr) const;
  // Exact reverse-mode gradient of <upstream, output> with respect to every
  // parameter, flattened in Parameters() order. Throws StateError when the
  // tape holds no recorded forward pass.
  Vector Backward(const Tape& tape, const Matrix& upstream) const;

  std::vector<RecurrentState> ZeroStates(int batch) const;
  // Advances every recurrent layer by one step.
  void Advance(const Matrix& x, std::vector<RecurrentState>* states) const;
  // Dense head applied to the top recurrent hidden state.
  Matrix Head(const std::vector<RecurrentState>& states) const;

  // Flattened parameters in declared layer order, matrices row-major.
  Vector Parameters() const;
  void SetParameters(const Vector& flat);

  const std::vector<RecurrentLayer>& recurrent() const { return recurrent_; }
  const std::vector<DenseLayer>& dense() const { return dense_; }
  std::vector<DenseLayer>& mutable_dense() { return dense_; }

 private:
  void CheckInput(const Matrix& x) const;

  Architecture architecture_;
  std::vector<RecurrentLayer> recurrent_;
  std::vector<DenseLayer> dense_;
};

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamState() = default;
  AdamState(std::size_t size, const AdamOptions& options)
      : first_moment(Vector::Zero(size)),
        second_moment(Vector::Zero(size)),
        options(options) {}

  Vector first_moment;
  Vector second_moment;
  std::int64_t step = 0;
  AdamOptions options;
};

// One bias-corrected Adam step. Throws TrainingDiverged on a non-finite
// gradient, leaving params and state untouched.
void AdamUpdate(Vector& params, const Vector& grads, AdamState& state);

// Weight file: "TSEQ1\n", "arch <descriptor>\n", "meta <text>\n", then the
// parameters as little-endian IEEE-754 float32 in Parameters() order.
void WriteNetwork(std::ostream& out, const Network& network,
                  const std::string& metadata);
Network ReadNetwork(std::istream& in, std::string* metadata);

}  // namespace tasteseq::nn

#endif  // TASTESEQ_NN_H_
