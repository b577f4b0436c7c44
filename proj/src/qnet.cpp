#include "branchlab/qnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "branchlab/common.hpp"
#include "branchlab/rng.hpp"

namespace branchlab {

std::string to_string(Arch arch) {
  switch (arch) {
    case Arch::dense: return "dense";
    case Arch::dueling_add: return "dueling";
    case Arch::dueling_mul: return "mda";
  }
  return "unknown";
}

Arch arch_from_string(const std::string& s) {
  if (s == "dense") return Arch::dense;
  if (s == "dueling" || s == "dueling_add") return Arch::dueling_add;
  if (s == "mda" || s == "dueling_mul") return Arch::dueling_mul;
  throw std::invalid_argument("unknown architecture: " + s);
}

namespace {

struct Offsets {
  int in = 0, h = 0, actions = 0;   // joint block dims
  int sin = 0, sh = 0;              // static block dims
  size_t w1, b1, w2, b2, w3, b3;    // joint block
  size_t sw1, sb1, sw2, sb2, sw3, sb3;  // static block (dueling only)
  size_t total;
  bool dueling;
};

Offsets layout(const QNetwork& net) {
  Offsets o;
  o.dueling = net.arch != Arch::dense;
  o.in = net.input_dim();
  o.h = net.joint_hidden;
  o.actions = net.num_actions;
  o.sin = net.static_dim;
  o.sh = net.static_hidden;
  size_t p = 0;
  o.w1 = p; p += static_cast<size_t>(o.h) * o.in;
  o.b1 = p; p += o.h;
  o.w2 = p; p += static_cast<size_t>(o.h) * o.h;
  o.b2 = p; p += o.h;
  o.w3 = p; p += static_cast<size_t>(o.actions) * o.h;
  o.b3 = p; p += o.actions;
  if (o.dueling) {
    o.sw1 = p; p += static_cast<size_t>(o.sh) * o.sin;
    o.sb1 = p; p += o.sh;
    o.sw2 = p; p += static_cast<size_t>(o.sh) * o.sh;
    o.sb2 = p; p += o.sh;
    o.sw3 = p; p += o.sh;
    o.sb3 = p; p += 1;
  }
  o.total = p;
  return o;
}

void affine(const double* w, const double* b, const double* x, int in, int out, double* z) {
  for (int i = 0; i < out; ++i) {
    double sum = b[i];
    const double* row = w + static_cast<size_t>(i) * in;
    for (int j = 0; j < in; ++j) sum += row[j] * x[j];
    z[i] = sum;
  }
}

struct Activations {
  std::vector<double> input;      // joint input (concat static, dynamic)
  std::vector<double> a1, a2;     // post-ReLU joint activations
  std::vector<double> v;          // joint output
  std::vector<double> sa1, sa2;   // post-ReLU static activations
  double u = 0.0;                 // static head output
  std::vector<double> q;
};

void run_forward(const QNetwork& net, const Offsets& o, std::span<const double> stat,
                 std::span<const double> dyn, Activations& act) {
  if (static_cast<int>(stat.size()) != net.static_dim ||
      static_cast<int>(dyn.size()) != net.dyn_dim)
    throw std::invalid_argument("forward: encoding widths do not match the network");
  const double* th = net.theta.data();
  act.input.resize(o.in);
  std::copy(stat.begin(), stat.end(), act.input.begin());
  std::copy(dyn.begin(), dyn.end(), act.input.begin() + net.static_dim);

  act.a1.resize(o.h);
  affine(th + o.w1, th + o.b1, act.input.data(), o.in, o.h, act.a1.data());
  for (double& z : act.a1) z = z > 0.0 ? z : 0.0;
  act.a2.resize(o.h);
  affine(th + o.w2, th + o.b2, act.a1.data(), o.h, o.h, act.a2.data());
  for (double& z : act.a2) z = z > 0.0 ? z : 0.0;
  act.v.resize(o.actions);
  affine(th + o.w3, th + o.b3, act.a2.data(), o.h, o.actions, act.v.data());

  if (o.dueling) {
    act.sa1.resize(o.sh);
    affine(th + o.sw1, th + o.sb1, stat.data(), o.sin, o.sh, act.sa1.data());
    for (double& z : act.sa1) z = z > 0.0 ? z : 0.0;
    act.sa2.resize(o.sh);
    affine(th + o.sw2, th + o.sb2, act.sa1.data(), o.sh, o.sh, act.sa2.data());
    for (double& z : act.sa2) z = z > 0.0 ? z : 0.0;
    double u = th[o.sb3];
    for (int j = 0; j < o.sh; ++j) u += th[o.sw3 + j] * act.sa2[j];
    act.u = u;
  }

  act.q.resize(o.actions);
  for (int a = 0; a < o.actions; ++a) {
    switch (net.arch) {
      case Arch::dense: act.q[a] = act.v[a]; break;
      case Arch::dueling_add: act.q[a] = act.u + act.v[a]; break;
      case Arch::dueling_mul: act.q[a] = act.u * act.v[a]; break;
    }
  }
}

// Backprop of dL/dQ[action] = g through the taken action's output.
void run_backward(const QNetwork& net, const Offsets& o, const Activations& act, int action,
                  double g, std::vector<double>& grad) {
  const double* th = net.theta.data();
  double dv_a = 0.0, du = 0.0;
  switch (net.arch) {
    case Arch::dense: dv_a = g; break;
    case Arch::dueling_add: dv_a = g; du = g; break;
    case Arch::dueling_mul: dv_a = g * act.u; du = g * act.v[action]; break;
  }

  // Joint block: only output row `action` receives gradient.
  std::vector<double> da2(o.h, 0.0);
  {
    const double* w3row = th + o.w3 + static_cast<size_t>(action) * o.h;
    double* g3row = grad.data() + o.w3 + static_cast<size_t>(action) * o.h;
    for (int j = 0; j < o.h; ++j) {
      g3row[j] += dv_a * act.a2[j];
      da2[j] = dv_a * w3row[j];
    }
    grad[o.b3 + action] += dv_a;
  }
  std::vector<double> da1(o.h, 0.0);
  for (int i = 0; i < o.h; ++i) {
    if (act.a2[i] <= 0.0) continue;  // ReLU gate
    double dz = da2[i];
    const double* w2row = th + o.w2 + static_cast<size_t>(i) * o.h;
    double* g2row = grad.data() + o.w2 + static_cast<size_t>(i) * o.h;
    for (int j = 0; j < o.h; ++j) {
      g2row[j] += dz * act.a1[j];
      da1[j] += dz * w2row[j];
    }
    grad[o.b2 + i] += dz;
  }
  for (int i = 0; i < o.h; ++i) {
    if (act.a1[i] <= 0.0) continue;
    double dz = da1[i];
    double* g1row = grad.data() + o.w1 + static_cast<size_t>(i) * o.in;
    for (int j = 0; j < o.in; ++j) g1row[j] += dz * act.input[j];
    grad[o.b1 + i] += dz;
  }

  if (!o.dueling || du == 0.0) return;
  std::vector<double> dsa2(o.sh, 0.0);
  for (int j = 0; j < o.sh; ++j) {
    grad[o.sw3 + j] += du * act.sa2[j];
    dsa2[j] = du * th[o.sw3 + j];
  }
  grad[o.sb3] += du;
  std::vector<double> dsa1(o.sh, 0.0);
  for (int i = 0; i < o.sh; ++i) {
    if (act.sa2[i] <= 0.0) continue;
    double dz = dsa2[i];
    const double* wrow = th + o.sw2 + static_cast<size_t>(i) * o.sh;
    double* grow = grad.data() + o.sw2 + static_cast<size_t>(i) * o.sh;
    for (int j = 0; j < o.sh; ++j) {
      grow[j] += dz * act.sa1[j];
      dsa1[j] += dz * wrow[j];
    }
    grad[o.sb2 + i] += dz;
  }
  for (int i = 0; i < o.sh; ++i) {
    if (act.sa1[i] <= 0.0) continue;
    double dz = dsa1[i];
    double* grow = grad.data() + o.sw1 + static_cast<size_t>(i) * o.sin;
    for (int j = 0; j < o.sin; ++j) grow[j] += dz * act.input[j];
    grad[o.sb1 + i] += dz;
  }
}

void init_layer(std::vector<double>& theta, size_t w_off, size_t b_off, int in, int out,
                Rng& rng) {
  double bound = std::sqrt(6.0 / in);
  for (size_t i = 0; i < static_cast<size_t>(out) * in; ++i)
    theta[w_off + i] = (2.0 * rng.next_double() - 1.0) * bound;
  for (int i = 0; i < out; ++i) theta[b_off + i] = 0.0;
}

}  // namespace

QNetwork make_network(Arch arch, int static_dim, int dyn_dim, int num_actions, uint64_t seed) {
  if (static_dim < 1 || dyn_dim < 1 || num_actions < 1)
    throw std::invalid_argument("make_network: dimensions must be positive");
  QNetwork net;
  net.arch = arch;
  net.static_dim = static_dim;
  net.dyn_dim = dyn_dim;
  net.num_actions = num_actions;
  Offsets o = layout(net);
  net.theta.assign(o.total, 0.0);
  Rng rng(derive_seed(seed, "init"));
  init_layer(net.theta, o.w1, o.b1, o.in, o.h, rng);
  init_layer(net.theta, o.w2, o.b2, o.h, o.h, rng);
  init_layer(net.theta, o.w3, o.b3, o.h, o.actions, rng);
  if (o.dueling) {
    init_layer(net.theta, o.sw1, o.sb1, o.sin, o.sh, rng);
    init_layer(net.theta, o.sw2, o.sb2, o.sh, o.sh, rng);
    init_layer(net.theta, o.sw3, o.sb3, o.sh, 1, rng);
    // A zero-initialized multiplicative gate would kill all gradients.
    if (arch == Arch::dueling_mul) net.theta[o.sb3] = 1.0;
  }
  return net;
}

std::vector<double> forward(const QNetwork& net, std::span<const double> stat,
                            std::span<const double> dyn) {
  Offsets o = layout(net);
  // Policy inference is the hot path; reuse per-thread scratch buffers.
  thread_local Activations act;
  run_forward(net, o, stat, dyn, act);
  return act.q;
}

int select_action(const QNetwork& net, std::span<const double> stat, std::span<const double> dyn,
                  const std::vector<uint8_t>& mask) {
  std::vector<double> q = forward(net, stat, dyn);
  if (mask.size() != q.size())
    throw std::invalid_argument("select_action: mask width does not match the action count");
  int best = -1;
  for (int a = 0; a < static_cast<int>(q.size()); ++a) {
    if (!mask[a]) continue;
    if (best < 0 || q[a] < q[best]) best = a;
  }
  if (best < 0) throw std::invalid_argument("select_action: mask excludes every action");
  return best;
}

double loss_and_grad(const QNetwork& net, const std::vector<BatchItem>& batch,
                     std::vector<double>& grad) {
  if (batch.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
  Offsets o = layout(net);
  grad.assign(o.total, 0.0);
  double loss = 0.0;
  const double inv_batch = 1.0 / batch.size();
  Activations act;
  for (const BatchItem& item : batch) {
    run_forward(net, o, item.stat, item.dyn, act);
    double w = 1.0 / item.v_root;
    double err = item.target - act.q[item.action];
    loss += w * err * err * inv_batch;
    double g = -2.0 * w * err * inv_batch;
    run_backward(net, o, act, item.action, g, grad);
  }
  return loss;
}

void adam_step(QNetwork& net, const std::vector<double>& grad, AdamState& state, double lr) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  if (grad.size() != net.theta.size())
    throw std::invalid_argument("adam_step: gradient size mismatch");
  for (double g : grad)
    if (!std::isfinite(g))
      throw TrainingDivergedError("adam_step: non-finite gradient entry");
  if (state.m.empty()) {
    state.m.assign(grad.size(), 0.0);
    state.v.assign(grad.size(), 0.0);
  }
  state.t += 1;
  double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (size_t i = 0; i < grad.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
    double mhat = state.m[i] / c1;
    double vhat = state.v[i] / c2;
    net.theta[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

namespace {

constexpr uint32_t kMagic = 0x424c5143;  // "BLQC"
constexpr uint32_t kVersion = 1;
constexpr uint32_t kEndMagic = 0x444f4e45;  // "DONE"

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, uint64_t v) {
  put_u32(out, static_cast<uint32_t>(v));
  put_u32(out, static_cast<uint32_t>(v >> 32));
}

void put_f64(std::ostream& out, double d) {
  uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(out, bits);
}

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error("checkpoint: truncated file");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint64_t get_u64(std::istream& in) {
  uint64_t lo = get_u32(in);
  uint64_t hi = get_u32(in);
  return lo | (hi << 32);
}

double get_f64(std::istream& in) {
  uint64_t bits = get_u64(in);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

void put_string(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  uint64_t len = get_u64(in);
  if (len > (1ull << 30)) throw std::runtime_error("checkpoint: corrupt string length");
  std::string s(len, '\0');
  if (len > 0 && !in.read(s.data(), static_cast<std::streamsize>(len)))
    throw std::runtime_error("checkpoint: truncated file");
  return s;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  put_u32(out, kMagic);
  put_u32(out, kVersion);
  put_u32(out, static_cast<uint32_t>(ckpt.net.arch));
  put_u32(out, static_cast<uint32_t>(ckpt.net.static_dim));
  put_u32(out, static_cast<uint32_t>(ckpt.net.dyn_dim));
  put_u32(out, static_cast<uint32_t>(ckpt.net.num_actions));
  put_u32(out, static_cast<uint32_t>(ckpt.net.joint_hidden));
  put_u32(out, static_cast<uint32_t>(ckpt.net.static_hidden));
  put_u64(out, ckpt.net.theta.size());
  for (double d : ckpt.net.theta) put_f64(out, d);
  put_u32(out, static_cast<uint32_t>(ckpt.pca.d));
  put_u32(out, static_cast<uint32_t>(ckpt.pca.k));
  put_string(out, ckpt.pca.warning);
  for (double d : ckpt.pca.mean) put_f64(out, d);
  for (double d : ckpt.pca.components) put_f64(out, d);
  put_string(out, ckpt.config_json);
  put_u32(out, kEndMagic);
  if (!out) throw std::runtime_error("checkpoint write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  if (get_u32(in) != kMagic) throw std::runtime_error("checkpoint: bad magic");
  uint32_t version = get_u32(in);
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ckpt;
  uint32_t arch_tag = get_u32(in);
  if (arch_tag > 2) throw std::runtime_error("checkpoint: corrupt architecture tag");
  ckpt.net.arch = static_cast<Arch>(arch_tag);
  ckpt.net.static_dim = static_cast<int>(get_u32(in));
  ckpt.net.dyn_dim = static_cast<int>(get_u32(in));
  ckpt.net.num_actions = static_cast<int>(get_u32(in));
  ckpt.net.joint_hidden = static_cast<int>(get_u32(in));
  ckpt.net.static_hidden = static_cast<int>(get_u32(in));
  uint64_t theta_len = get_u64(in);
  Offsets o = layout(ckpt.net);
  if (theta_len != o.total) throw std::runtime_error("checkpoint: parameter count mismatch");
  ckpt.net.theta.resize(theta_len);
  for (double& d : ckpt.net.theta) d = get_f64(in);
  ckpt.pca.d = static_cast<int>(get_u32(in));
  ckpt.pca.k = static_cast<int>(get_u32(in));
  ckpt.pca.warning = get_string(in);
  ckpt.pca.mean.resize(ckpt.pca.d);
  for (double& d : ckpt.pca.mean) d = get_f64(in);
  ckpt.pca.components.resize(static_cast<size_t>(ckpt.pca.k) * ckpt.pca.d);
  for (double& d : ckpt.pca.components) d = get_f64(in);
  ckpt.config_json = get_string(in);
  if (get_u32(in) != kEndMagic) throw std::runtime_error("checkpoint: corrupt trailer");
  return ckpt;
}

}  // namespace branchlab
