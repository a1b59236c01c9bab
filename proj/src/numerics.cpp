#include "setgen/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace setgen {

int ParameterStore::add(const std::string& name, int rows, int cols) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("ParameterStore::add: bad shape");
  if (find(name) >= 0) throw std::invalid_argument("duplicate parameter array: " + name);
  ParamArray a;
  a.name = name;
  a.rows = rows;
  a.cols = cols;
  a.value.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  a.grad.assign(a.value.size(), 0.0);
  arrays.push_back(std::move(a));
  return static_cast<int>(arrays.size()) - 1;
}

int ParameterStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < arrays.size(); ++i)
    if (arrays[i].name == name) return static_cast<int>(i);
  return -1;
}

void ParameterStore::zero_grad() {
  for (auto& a : arrays) std::fill(a.grad.begin(), a.grad.end(), 0.0);
}

std::size_t ParameterStore::size() const {
  std::size_t s = 0;
  for (const auto& a : arrays) s += a.value.size();
  return s;
}

double& ParameterStore::coord(std::size_t flat) {
  for (auto& a : arrays) {
    if (flat < a.value.size()) return a.value[flat];
    flat -= a.value.size();
  }
  throw std::out_of_range("ParameterStore::coord");
}

double ParameterStore::grad_coord(std::size_t flat) const {
  for (const auto& a : arrays) {
    if (flat < a.grad.size()) return a.grad[flat];
    flat -= a.grad.size();
  }
  throw std::out_of_range("ParameterStore::grad_coord");
}

void init_uniform(ParamArray& a, double bound, Rng& rng) {
  for (auto& x : a.value) x = (2.0 * rng.uniform() - 1.0) * bound;
}

void init_normal(ParamArray& a, double sd, Rng& rng) {
  for (auto& x : a.value) x = rng.normal() * sd;
}

double logsumexp(const double* v, int len) {
  double m = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < len; ++i) m = std::max(m, v[i]);
  if (!std::isfinite(m)) return m;  // all -inf (or an inf logit, which we never produce)
  double s = 0.0;
  for (int i = 0; i < len; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

std::vector<double> masked_softmax(const std::vector<double>& logits,
                                   const std::vector<int>& candidates) {
  if (candidates.empty())
    throw std::invalid_argument("masked_softmax: empty candidate list");
  double m = -std::numeric_limits<double>::infinity();
  for (int c : candidates) m = std::max(m, logits.at(static_cast<std::size_t>(c)));
  std::vector<double> out(candidates.size());
  double s = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    out[i] = std::exp(logits[static_cast<std::size_t>(candidates[i])] - m);
    s += out[i];
  }
  for (auto& x : out) x /= s;
  return out;
}

namespace {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// out = W x, W row-major (rows x cols)
inline void matvec(const double* w, int rows, int cols, const double* x, double* out) {
  for (int i = 0; i < rows; ++i) {
    double s = 0.0;
    const double* wi = w + static_cast<std::size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) s += wi[j] * x[j];
    out[i] = s;
  }
}

// out += W^T g
inline void matvec_t_acc(const double* w, int rows, int cols, const double* g, double* out) {
  for (int i = 0; i < rows; ++i) {
    const double* wi = w + static_cast<std::size_t>(i) * cols;
    double gi = g[i];
    if (gi == 0.0) continue;
    for (int j = 0; j < cols; ++j) out[j] += wi[j] * gi;
  }
}

// gw += g x^T
inline void outer_acc(double* gw, const double* g, int rows, const double* x, int cols) {
  for (int i = 0; i < rows; ++i) {
    double gi = g[i];
    if (gi == 0.0) continue;
    double* gwi = gw + static_cast<std::size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) gwi[j] += gi * x[j];
  }
}

inline void acc(double* out, const double* g, int len) {
  for (int i = 0; i < len; ++i) out[i] += g[i];
}

void check_shape(const ParamArray& a, int rows, int cols, const char* what) {
  if (a.rows != rows || a.cols != cols)
    throw std::invalid_argument(std::string("shape mismatch for ") + what + " (" + a.name + ")");
}

// Shared forward kernel; writes all four internal vectors so the taped and
// plain paths are bitwise identical.
void gru_forward_raw(const ParameterStore& ps, const GruIds& ids, const double* x,
                     const double* h, int d, double* hp, double* z, double* r, double* c) {
  const ParamArray& wz = ps.at(ids.wz);
  const ParamArray& uz = ps.at(ids.uz);
  const ParamArray& bz = ps.at(ids.bz);
  const ParamArray& wr = ps.at(ids.wr);
  const ParamArray& ur = ps.at(ids.ur);
  const ParamArray& br = ps.at(ids.br);
  const ParamArray& wh = ps.at(ids.wh);
  const ParamArray& uh = ps.at(ids.uh);
  const ParamArray& bh = ps.at(ids.bh);
  check_shape(wz, d, d, "gru wz");
  check_shape(uz, d, d, "gru uz");
  check_shape(bz, 1, d, "gru bz");
  check_shape(wr, d, d, "gru wr");
  check_shape(ur, d, d, "gru ur");
  check_shape(br, 1, d, "gru br");
  check_shape(wh, d, d, "gru wh");
  check_shape(uh, d, d, "gru uh");
  check_shape(bh, 1, d, "gru bh");

  std::vector<double> a1(d), a2(d), rh(d);
  matvec(wz.value.data(), d, d, x, a1.data());
  matvec(uz.value.data(), d, d, h, a2.data());
  for (int i = 0; i < d; ++i) z[i] = sigmoid(a1[i] + a2[i] + bz.value[i]);
  matvec(wr.value.data(), d, d, x, a1.data());
  matvec(ur.value.data(), d, d, h, a2.data());
  for (int i = 0; i < d; ++i) r[i] = sigmoid(a1[i] + a2[i] + br.value[i]);
  for (int i = 0; i < d; ++i) rh[i] = r[i] * h[i];
  matvec(wh.value.data(), d, d, x, a1.data());
  matvec(uh.value.data(), d, d, rh.data(), a2.data());
  for (int i = 0; i < d; ++i) c[i] = std::tanh(a1[i] + a2[i] + bh.value[i]);
  for (int i = 0; i < d; ++i) hp[i] = (1.0 - z[i]) * h[i] + z[i] * c[i];
}

void mlp_forward_raw(const ParameterStore& ps, const MlpIds& ids, const double* x,
                     double* out, double* t) {
  const ParamArray& w1 = ps.at(ids.w1);
  const ParamArray& b1 = ps.at(ids.b1);
  const ParamArray& w2 = ps.at(ids.w2);
  const ParamArray& b2 = ps.at(ids.b2);
  int hidden = w1.rows, din = w1.cols, dout = w2.rows;
  check_shape(b1, 1, hidden, "mlp b1");
  check_shape(w2, dout, hidden, "mlp w2");
  check_shape(b2, 1, dout, "mlp b2");
  matvec(w1.value.data(), hidden, din, x, t);
  for (int i = 0; i < hidden; ++i) t[i] = std::tanh(t[i] + b1.value[i]);
  matvec(w2.value.data(), dout, hidden, t, out);
  for (int i = 0; i < dout; ++i) out[i] += b2.value[i];
}

}  // namespace

std::vector<double> gru_step(const ParameterStore& ps, const GruIds& ids,
                             const std::vector<double>& x, const std::vector<double>& h) {
  int d = static_cast<int>(h.size());
  if (static_cast<int>(x.size()) != d) throw std::invalid_argument("gru_step: dim mismatch");
  std::vector<double> hp(d), z(d), r(d), c(d);
  gru_forward_raw(ps, ids, x.data(), h.data(), d, hp.data(), z.data(), r.data(), c.data());
  return hp;
}

std::vector<double> mlp_forward(const ParameterStore& ps, const MlpIds& ids,
                                const std::vector<double>& x) {
  const ParamArray& w1 = ps.at(ids.w1);
  const ParamArray& w2 = ps.at(ids.w2);
  if (static_cast<int>(x.size()) != w1.cols)
    throw std::invalid_argument("mlp_forward: dim mismatch");
  std::vector<double> out(w2.rows), t(w1.rows);
  mlp_forward_raw(ps, ids, x.data(), out.data(), t.data());
  return out;
}

void Tape::reset() {
  nodes_.clear();
  buf_.clear();
  aux_.clear();
}

Tape::Ref Tape::push(Node n, int len, int out) {
  n.off = static_cast<std::int32_t>(buf_.size());
  n.len = len;
  n.out = out;
  buf_.resize(buf_.size() + static_cast<std::size_t>(len), 0.0);
  nodes_.push_back(n);
  return static_cast<Ref>(nodes_.size()) - 1;
}

Tape::Ref Tape::param_row(int array, int row) {
  const ParamArray& a = ps_->at(array);
  if (row < 0 || row >= a.rows) throw std::out_of_range("Tape::param_row: row");
  Node n;
  n.kind = kParamRow;
  n.arr = array;
  n.pick = row;
  Ref id = push(n, a.cols, a.cols);
  std::memcpy(slice(nodes_.back()), a.value.data() + static_cast<std::size_t>(row) * a.cols,
              sizeof(double) * a.cols);
  return id;
}

Tape::Ref Tape::add(Ref a, Ref b) {
  int w = nodes_.at(a).out;
  if (w != nodes_.at(b).out) throw std::invalid_argument("Tape::add: width mismatch");
  Node n;
  n.kind = kAdd;
  n.a = a;
  n.b = b;
  Ref id = push(n, w, w);
  double* o = slice(nodes_.back());
  const double* va = buf_.data() + nodes_[a].off;
  const double* vb = buf_.data() + nodes_[b].off;
  for (int i = 0; i < w; ++i) o[i] = va[i] + vb[i];
  return id;
}

Tape::Ref Tape::gru(const GruIds& ids, Ref x, Ref h) {
  int d = nodes_.at(h).out;
  if (nodes_.at(x).out != d) throw std::invalid_argument("Tape::gru: dim mismatch");
  Node n;
  n.kind = kGru;
  n.a = x;
  n.b = h;
  n.aux = static_cast<std::int32_t>(aux_.size());
  n.naux = 9;
  aux_.insert(aux_.end(), {ids.wz, ids.uz, ids.bz, ids.wr, ids.ur, ids.br, ids.wh, ids.uh,
                           ids.bh});
  Ref id = push(n, 4 * d, d);
  double* s = slice(nodes_.back());
  gru_forward_raw(*ps_, ids, buf_.data() + nodes_[x].off, buf_.data() + nodes_[h].off, d,
                  s, s + d, s + 2 * d, s + 3 * d);
  return id;
}

Tape::Ref Tape::mlp(const MlpIds& ids, Ref x) {
  const ParamArray& w1 = ps_->at(ids.w1);
  const ParamArray& w2 = ps_->at(ids.w2);
  if (nodes_.at(x).out != w1.cols) throw std::invalid_argument("Tape::mlp: dim mismatch");
  Node n;
  n.kind = kMlp;
  n.a = x;
  n.aux = static_cast<std::int32_t>(aux_.size());
  n.naux = 4;
  aux_.insert(aux_.end(), {ids.w1, ids.b1, ids.w2, ids.b2});
  Ref id = push(n, w2.rows + w1.rows, w2.rows);
  double* s = slice(nodes_.back());
  mlp_forward_raw(*ps_, ids, buf_.data() + nodes_[x].off, s, s + w2.rows);
  return id;
}

Tape::Ref Tape::logits(int emb_array, Ref choice, const std::vector<int>& rows) {
  const ParamArray& e = ps_->at(emb_array);
  const Node& nc = nodes_.at(choice);
  if (nc.out != e.cols) throw std::invalid_argument("Tape::logits: dim mismatch");
  if (rows.empty()) throw std::invalid_argument("Tape::logits: no candidates");
  Node n;
  n.kind = kLogits;
  n.a = choice;
  n.arr = emb_array;
  n.aux = static_cast<std::int32_t>(aux_.size());
  n.naux = static_cast<std::int32_t>(rows.size());
  for (int r : rows) {
    if (r < 0 || r >= e.rows) throw std::out_of_range("Tape::logits: row");
    aux_.push_back(r);
  }
  Ref id = push(n, static_cast<int>(rows.size()), static_cast<int>(rows.size()));
  double* o = slice(nodes_.back());
  const double* c = buf_.data() + nodes_[choice].off;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const double* er = e.value.data() + static_cast<std::size_t>(rows[k]) * e.cols;
    double s = 0.0;
    for (int j = 0; j < e.cols; ++j) s += c[j] * er[j];
    o[k] = s;
  }
  return id;
}

Tape::Ref Tape::log_pick(Ref logit_node, int index) {
  const Node& nl = nodes_.at(logit_node);
  if (index < 0 || index >= nl.out) throw std::out_of_range("Tape::log_pick: index");
  Node n;
  n.kind = kLogPick;
  n.a = logit_node;
  n.pick = index;
  Ref id = push(n, 1, 1);
  const double* l = buf_.data() + nodes_[logit_node].off;
  buf_[nodes_.back().off] = l[index] - logsumexp(l, nodes_[logit_node].out);
  return id;
}

Tape::Ref Tape::logsumexp_of(const std::vector<Ref>& scalars) {
  if (scalars.empty()) throw std::invalid_argument("Tape::logsumexp_of: empty");
  Node n;
  n.kind = kLogSumExp;
  n.aux = static_cast<std::int32_t>(aux_.size());
  n.naux = static_cast<std::int32_t>(scalars.size());
  std::vector<double> vals(scalars.size());
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    const Node& c = nodes_.at(scalars[i]);
    if (c.out != 1) throw std::invalid_argument("Tape::logsumexp_of: non-scalar input");
    vals[i] = buf_[c.off];
    aux_.push_back(scalars[i]);
  }
  Ref id = push(n, 1, 1);
  buf_[nodes_.back().off] = logsumexp(vals.data(), static_cast<int>(vals.size()));
  return id;
}

Tape::Ref Tape::sum_coords(Ref a) {
  int w = nodes_.at(a).out;
  Node n;
  n.kind = kSumCoords;
  n.a = a;
  Ref id = push(n, 1, 1);
  const double* v = buf_.data() + nodes_[a].off;
  double s = 0.0;
  for (int i = 0; i < w; ++i) s += v[i];
  buf_[nodes_.back().off] = s;
  return id;
}

Tape::Ref Tape::half_sq_norm(Ref a) {
  int w = nodes_.at(a).out;
  Node n;
  n.kind = kHalfSqNorm;
  n.a = a;
  Ref id = push(n, 1, 1);
  const double* v = buf_.data() + nodes_[a].off;
  double s = 0.0;
  for (int i = 0; i < w; ++i) s += v[i] * v[i];
  buf_[nodes_.back().off] = 0.5 * s;
  return id;
}

double Tape::value(Ref r) const {
  const Node& n = nodes_.at(r);
  if (n.out != 1) throw std::invalid_argument("Tape::value: non-scalar node");
  return buf_[n.off];
}

const double* Tape::data(Ref r) const { return buf_.data() + nodes_.at(r).off; }

int Tape::width(Ref r) const { return nodes_.at(r).out; }

void Tape::backward(Ref loss, double seed, Ref start) {
  const Node& ln = nodes_.at(loss);
  if (ln.out != 1) throw std::invalid_argument("Tape::backward: loss must be scalar");
  if (!std::isfinite(buf_[ln.off]))
    throw std::runtime_error("Tape::backward: non-finite loss");
  if (start < 0 || start > loss) throw std::out_of_range("Tape::backward: start");

  adj_.resize(buf_.size());
  std::size_t lo = nodes_[start].off;
  std::size_t hi = static_cast<std::size_t>(ln.off) + ln.len;
  std::fill(adj_.begin() + lo, adj_.begin() + hi, 0.0);
  adj_[ln.off] = seed;

  for (Ref i = loss; i >= start; --i) {
    const Node& n = nodes_[i];
    double* g = adj_.data() + n.off;
    switch (n.kind) {
      case kParamRow: {
        ParamArray& a = ps_->at(n.arr);
        acc(a.grad.data() + static_cast<std::size_t>(n.pick) * a.cols, g, n.out);
        break;
      }
      case kAdd: {
        acc(adj_.data() + nodes_[n.a].off, g, n.out);
        acc(adj_.data() + nodes_[n.b].off, g, n.out);
        break;
      }
      case kGru: {
        int d = n.out;
        const double* x = buf_.data() + nodes_[n.a].off;
        const double* h = buf_.data() + nodes_[n.b].off;
        const double* z = buf_.data() + n.off + d;
        const double* r = buf_.data() + n.off + 2 * d;
        const double* c = buf_.data() + n.off + 3 * d;
        double* xadj = adj_.data() + nodes_[n.a].off;
        double* hadj = adj_.data() + nodes_[n.b].off;
        ParamArray& wz = ps_->at(aux_[n.aux + 0]);
        ParamArray& uz = ps_->at(aux_[n.aux + 1]);
        ParamArray& bz = ps_->at(aux_[n.aux + 2]);
        ParamArray& wr = ps_->at(aux_[n.aux + 3]);
        ParamArray& ur = ps_->at(aux_[n.aux + 4]);
        ParamArray& br = ps_->at(aux_[n.aux + 5]);
        ParamArray& wh = ps_->at(aux_[n.aux + 6]);
        ParamArray& uh = ps_->at(aux_[n.aux + 7]);
        ParamArray& bh = ps_->at(aux_[n.aux + 8]);

        tmp_.assign(static_cast<std::size_t>(6) * d, 0.0);
        double* acbar = tmp_.data();
        double* azbar = tmp_.data() + d;
        double* arbar = tmp_.data() + 2 * d;
        double* rbar = tmp_.data() + 3 * d;
        double* rh = tmp_.data() + 4 * d;
        double* rhbar = tmp_.data() + 5 * d;

        for (int k = 0; k < d; ++k) {
          rh[k] = r[k] * h[k];
          double cbar = g[k] * z[k];
          double zbar = g[k] * (c[k] - h[k]);
          hadj[k] += g[k] * (1.0 - z[k]);
          acbar[k] = cbar * (1.0 - c[k] * c[k]);
          azbar[k] = zbar * z[k] * (1.0 - z[k]);
        }
        outer_acc(wh.grad.data(), acbar, d, x, d);
        outer_acc(uh.grad.data(), acbar, d, rh, d);
        acc(bh.grad.data(), acbar, d);
        matvec_t_acc(wh.value.data(), d, d, acbar, xadj);
        matvec_t_acc(uh.value.data(), d, d, acbar, rhbar);
        for (int k = 0; k < d; ++k) {
          rbar[k] = rhbar[k] * h[k];
          hadj[k] += rhbar[k] * r[k];
          arbar[k] = rbar[k] * r[k] * (1.0 - r[k]);
        }
        outer_acc(wz.grad.data(), azbar, d, x, d);
        outer_acc(uz.grad.data(), azbar, d, h, d);
        acc(bz.grad.data(), azbar, d);
        matvec_t_acc(wz.value.data(), d, d, azbar, xadj);
        matvec_t_acc(uz.value.data(), d, d, azbar, hadj);
        outer_acc(wr.grad.data(), arbar, d, x, d);
        outer_acc(ur.grad.data(), arbar, d, h, d);
        acc(br.grad.data(), arbar, d);
        matvec_t_acc(wr.value.data(), d, d, arbar, xadj);
        matvec_t_acc(ur.value.data(), d, d, arbar, hadj);
        break;
      }
      case kMlp: {
        ParamArray& w1 = ps_->at(aux_[n.aux + 0]);
        ParamArray& b1 = ps_->at(aux_[n.aux + 1]);
        ParamArray& w2 = ps_->at(aux_[n.aux + 2]);
        ParamArray& b2 = ps_->at(aux_[n.aux + 3]);
        int hidden = w1.rows, dout = w2.rows;
        const double* x = buf_.data() + nodes_[n.a].off;
        const double* t = buf_.data() + n.off + dout;
        double* xadj = adj_.data() + nodes_[n.a].off;

        tmp_.assign(static_cast<std::size_t>(2) * hidden, 0.0);
        double* tbar = tmp_.data();
        double* a1bar = tmp_.data() + hidden;
        outer_acc(w2.grad.data(), g, dout, t, hidden);
        acc(b2.grad.data(), g, dout);
        matvec_t_acc(w2.value.data(), dout, hidden, g, tbar);
        for (int k = 0; k < hidden; ++k) a1bar[k] = tbar[k] * (1.0 - t[k] * t[k]);
        outer_acc(w1.grad.data(), a1bar, hidden, x, w1.cols);
        acc(b1.grad.data(), a1bar, hidden);
        matvec_t_acc(w1.value.data(), hidden, w1.cols, a1bar, xadj);
        break;
      }
      case kLogits: {
        ParamArray& e = ps_->at(n.arr);
        const double* c = buf_.data() + nodes_[n.a].off;
        double* cadj = adj_.data() + nodes_[n.a].off;
        for (int k = 0; k < n.out; ++k) {
          double gk = g[k];
          if (gk == 0.0) continue;
          int row = aux_[n.aux + k];
          const double* er = e.value.data() + static_cast<std::size_t>(row) * e.cols;
          double* ger = e.grad.data() + static_cast<std::size_t>(row) * e.cols;
          for (int j = 0; j < e.cols; ++j) {
            cadj[j] += gk * er[j];
            ger[j] += gk * c[j];
          }
        }
        break;
      }
      case kLogPick: {
        double gs = g[0];
        if (gs == 0.0) break;
        const Node& nl = nodes_[n.a];
        const double* l = buf_.data() + nl.off;
        double* ladj = adj_.data() + nl.off;
        double m = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < nl.out; ++k) m = std::max(m, l[k]);
        double s = 0.0;
        for (int k = 0; k < nl.out; ++k) s += std::exp(l[k] - m);
        for (int k = 0; k < nl.out; ++k) {
          double p = std::exp(l[k] - m) / s;
          ladj[k] += gs * ((k == n.pick ? 1.0 : 0.0) - p);
        }
        break;
      }
      case kLogSumExp: {
        double gs = g[0];
        if (gs == 0.0) break;
        double val = buf_[n.off];
        for (int k = 0; k < n.naux; ++k) {
          const Node& c = nodes_[aux_[n.aux + k]];
          adj_[c.off] += gs * std::exp(buf_[c.off] - val);
        }
        break;
      }
      case kSumCoords: {
        double gs = g[0];
        double* aadj = adj_.data() + nodes_[n.a].off;
        for (int k = 0; k < nodes_[n.a].out; ++k) aadj[k] += gs;
        break;
      }
      case kHalfSqNorm: {
        double gs = g[0];
        const double* v = buf_.data() + nodes_[n.a].off;
        double* aadj = adj_.data() + nodes_[n.a].off;
        for (int k = 0; k < nodes_[n.a].out; ++k) aadj[k] += gs * v[k];
        break;
      }
      default:
        throw std::logic_error("Tape::backward: unknown node kind");
    }
  }
}

void RmsProp::step(ParameterStore& ps) {
  if (v.size() != ps.arrays.size()) {
    v.clear();
    for (const auto& a : ps.arrays) v.emplace_back(a.value.size(), 0.0);
  }
  for (std::size_t ai = 0; ai < ps.arrays.size(); ++ai) {
    ParamArray& a = ps.arrays[ai];
    std::vector<double>& va = v[ai];
    for (std::size_t i = 0; i < a.value.size(); ++i) {
      double g = a.grad[i];
      va[i] = alpha * va[i] + (1.0 - alpha) * g * g;
      a.value[i] -= lr * g / (std::sqrt(va[i]) + eps);
    }
    std::fill(a.grad.begin(), a.grad.end(), 0.0);
  }
  ++steps;
}

double finite_diff_check(ParameterStore& ps,
                         const std::function<Tape::Ref(Tape&)>& build_loss, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_check: step must be positive");
  ps.zero_grad();
  Tape t(&ps);
  Tape::Ref loss = build_loss(t);
  t.backward(loss, 1.0);
  std::size_t total = ps.size();
  std::vector<double> analytic(total);
  for (std::size_t i = 0; i < total; ++i) analytic[i] = ps.grad_coord(i);

  Tape scratch(&ps);
  double worst = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    double& theta = ps.coord(i);
    const double orig = theta;
    theta = orig + step;
    scratch.reset();
    double fp = scratch.value(build_loss(scratch));
    theta = orig - step;
    scratch.reset();
    double fm = scratch.value(build_loss(scratch));
    theta = orig;
    double numeric = (fp - fm) / (2.0 * step);
    double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-8});
    worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
  }
  ps.zero_grad();
  return worst;
}

}  // namespace setgen
