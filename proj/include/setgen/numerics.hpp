#pragma once
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "setgen/rng.hpp"

namespace setgen {

// Named dense array with a same-shaped gradient accumulator. Vectors are
// stored as rows=1; matrices are row-major with out-dimension on rows.
struct ParamArray {
  std::string name;
  int rows = 0, cols = 0;
  std::vector<double> value, grad;
};

struct ParameterStore {
  int d = 0;  // embedding dimension of the owning model
  std::vector<ParamArray> arrays;

  int add(const std::string& name, int rows, int cols);
  int find(const std::string& name) const;  // -1 when absent
  ParamArray& at(int id) { return arrays[static_cast<std::size_t>(id)]; }
  const ParamArray& at(int id) const { return arrays[static_cast<std::size_t>(id)]; }
  void zero_grad();

  // Flat coordinate view across all arrays, in creation order; used by the
  // finite-difference checker and the optimizer tests.
  std::size_t size() const;
  double& coord(std::size_t flat);
  double grad_coord(std::size_t flat) const;
};

void init_uniform(ParamArray& a, double bound, Rng& rng);
void init_normal(ParamArray& a, double sd, Rng& rng);

// Parameter-array handles for the two parametric layer bundles.
struct GruIds {
  int wz = -1, uz = -1, bz = -1;
  int wr = -1, ur = -1, br = -1;
  int wh = -1, uh = -1, bh = -1;
};
struct MlpIds {
  int w1 = -1, b1 = -1, w2 = -1, b2 = -1;
};

double logsumexp(const double* v, int len);

// Softmax restricted to `candidates`, with max-subtraction; returns the
// probability vector aligned with the candidate list.
std::vector<double> masked_softmax(const std::vector<double>& logits,
                                   const std::vector<int>& candidates);

// Standard GRU cell: z = sig(Wz x + Uz h + bz), r = sig(Wr x + Ur h + br),
// htilde = tanh(Wh x + Uh (r.h) + bh), h' = (1-z).h + z.htilde.
std::vector<double> gru_step(const ParameterStore& ps, const GruIds& ids,
                             const std::vector<double>& x, const std::vector<double>& h);

// One-hidden-layer MLP: out = W2 tanh(W1 x + b1) + b2.
std::vector<double> mlp_forward(const ParameterStore& ps, const MlpIds& ids,
                                const std::vector<double>& x);

// Reverse-mode scalar-loss tape over a small fixed op vocabulary. Nodes live
// in one contiguous arena; reset() reclaims everything between batches.
// Parameter matrices are consumed inside fused ops and their gradients are
// accumulated directly into the ParameterStore.
class Tape {
 public:
  using Ref = std::int32_t;

  explicit Tape(ParameterStore* ps) : ps_(ps) {}

  void reset();
  Ref mark() const { return static_cast<Ref>(nodes_.size()); }

  // Loads a snapshot of one parameter row as a vector node.
  Ref param_row(int array, int row);
  Ref add(Ref a, Ref b);  // elementwise; widths must match
  Ref gru(const GruIds& ids, Ref x, Ref h);
  Ref mlp(const MlpIds& ids, Ref x);
  // logits[k] = choice . E[rows[k]]; rows index into the embedding array.
  Ref logits(int emb_array, Ref choice, const std::vector<int>& rows);
  // log softmax(logits)[index]
  Ref log_pick(Ref logit_node, int index);
  Ref logsumexp_of(const std::vector<Ref>& scalars);
  Ref sum_coords(Ref a);
  Ref half_sq_norm(Ref a);

  double value(Ref r) const;        // scalar nodes
  const double* data(Ref r) const;  // start of the visible output slice
  int width(Ref r) const;

  // Accumulates seed * d(loss)/d(theta) into the store's gradient buffers.
  // Repeated calls accumulate. `start` may fence the sweep to nodes >= start
  // when the loss is known to depend on nothing earlier.
  void backward(Ref loss, double seed, Ref start = 0);

 private:
  enum Kind : std::uint8_t {
    kParamRow,
    kAdd,
    kGru,
    kMlp,
    kLogits,
    kLogPick,
    kLogSumExp,
    kSumCoords,
    kHalfSqNorm,
  };

  struct Node {
    std::uint8_t kind = 0;
    Ref a = -1, b = -1;
    std::int32_t off = 0;   // value slice start in buf_
    std::int32_t len = 0;   // full slice length (includes cached internals)
    std::int32_t out = 0;   // visible output width (out <= len)
    std::int32_t aux = 0;   // aux int slice start
    std::int32_t naux = 0;
    std::int32_t pick = 0;  // row / choice index
    std::int32_t arr = -1;  // parameter array id
  };

  Ref push(Node n, int len, int out);
  double* slice(const Node& n) { return buf_.data() + n.off; }
  const double* slice(const Node& n) const { return buf_.data() + n.off; }

  ParameterStore* ps_;
  std::vector<Node> nodes_;
  std::vector<double> buf_, adj_;
  std::vector<std::int32_t> aux_;
  std::vector<double> tmp_;  // backward scratch
};

// RMSProp with the usual defaults: v <- alpha v + (1-alpha) g^2,
// theta <- theta - lr g / (sqrt(v) + eps); gradients are zeroed after a step.
struct RmsProp {
  double lr = 0.01, alpha = 0.99, eps = 1e-8;
  long long steps = 0;
  std::vector<std::vector<double>> v;

  void step(ParameterStore& ps);
};

// Central-difference check of tape gradients. `build_loss` must
// deterministically rebuild the same scalar loss on any fresh tape. Returns
// the max relative error with denominator max(|analytic|, |numeric|, 1e-8).
double finite_diff_check(ParameterStore& ps,
                         const std::function<Tape::Ref(Tape&)>& build_loss,
                         double step = 1e-5);

}  // namespace setgen
