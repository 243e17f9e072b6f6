#include "facelift/networks.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "binary_io.hpp"
#include "facelift/rng.hpp"

namespace facelift::nn {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || epochs < 0 || batch_size <= 0 || weight_decay < 0.0 ||
      !(split > 0.0 && split < 1.0)) {
    throw std::invalid_argument("invalid training configuration");
  }
}

std::uint64_t TrainConfig::hash() const {
  std::ostringstream s;
  s.precision(17);
  s << learning_rate << '|' << epochs << '|' << batch_size << '|' << weight_decay << '|' << seed
    << '|' << split;
  return fnv1a(s.str());
}

Tensor one_hot(const Scene& s) {
  Tensor t(1, s.cell_count() * kNumElements);
  const auto labels = s.labels();
  for (std::size_t i = 0; i < labels.size(); ++i) t[i * kNumElements + labels[i]] = 1.0;
  return t;
}

Tensor one_hot_batch(std::span<const Scene> scenes, std::span<const std::size_t> rows) {
  if (rows.empty()) throw std::invalid_argument("one_hot_batch: empty selection");
  const std::size_t width = scenes[rows[0]].cell_count() * kNumElements;
  Tensor t(rows.size(), width);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto labels = scenes[rows[r]].labels();
    if (labels.size() * kNumElements != width) {
      throw std::invalid_argument("one_hot_batch: scenes differ in size");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) t(r, i * kNumElements + labels[i]) = 1.0;
  }
  return t;
}

namespace {

// Pooled one-hot embedding computed directly from label counts; equals
// patch_pool(one_hot(s)) without materialising the one-hot row.
std::vector<double> pooled_labels(const Scene& s, const PatchGeometry& g) {
  if (s.height() != g.height || s.width() != g.width) {
    throw std::invalid_argument("scene '" + s.id() + "' has size " + std::to_string(s.width()) +
                                "x" + std::to_string(s.height()) + ", model expects " +
                                std::to_string(g.width) + "x" + std::to_string(g.height));
  }
  std::vector<double> out(g.pooled_values(), 0.0);
  std::vector<double> counts(static_cast<std::size_t>(g.patch_count()), 0.0);
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      const auto p = static_cast<std::size_t>(g.patch_of(r, c));
      counts[p] += 1.0;
      out[p * kNumElements + s.at(r, c)] += 1.0;
    }
  }
  for (std::size_t p = 0; p < counts.size(); ++p)
    for (std::size_t k = 0; k < kNumElements; ++k) out[p * kNumElements + k] /= counts[p];
  return out;
}

Tensor pooled_batch(const std::vector<std::vector<double>>& pooled,
                    std::span<const std::size_t> rows) {
  const std::size_t width = pooled[rows[0]].size();
  Tensor t(rows.size(), width);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy(pooled[rows[r]].begin(), pooled[rows[r]].end(), &t(r, 0));
  }
  return t;
}

Dense make_dense(int in, int out, Rng& rng, double gain) {
  Dense d{Tensor(static_cast<std::size_t>(in), static_cast<std::size_t>(out)),
          Tensor(1, static_cast<std::size_t>(out))};
  const double sd = gain / std::sqrt(static_cast<double>(in));
  for (auto& w : d.weight.values()) w = rng.normal(0.0, sd);
  return d;
}

void sgd_step(Dense& d, const BoundDense& b, const Graph& g, double lr, double decay) {
  const Tensor& gw = g.grad(b.weight);
  const Tensor& gb = g.grad(b.bias);
  for (std::size_t i = 0; i < d.weight.size(); ++i) {
    d.weight[i] -= lr * (gw[i] + decay * d.weight[i]);
  }
  for (std::size_t i = 0; i < d.bias.size(); ++i) d.bias[i] -= lr * gb[i];
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

}  // namespace

BoundDense bind(Graph& g, const Dense& d, bool trainable) {
  if (!trainable) return {g.constant(d.weight), g.constant(d.bias)};
  return {g.variable(d.weight), g.variable(d.bias)};
}

Var apply(Graph& g, const BoundDense& d, Var x) { return g.add(g.matmul(x, d.weight), d.bias); }

// ---------------------------------------------------------------------------

Classifier Classifier::initialize(const ClassifierArch& arch, std::uint64_t seed) {
  arch.geometry().validate();
  Classifier c;
  c.arch_ = arch;
  c.seed_ = seed;
  Rng rng(mix_seed(seed, 0xc1a55));
  int in = arch.input_dim();
  for (const int h : arch.hidden) {
    if (h <= 0) throw std::invalid_argument("classifier hidden sizes must be positive");
    c.layers_.push_back(make_dense(in, h, rng, std::sqrt(2.0)));
    in = h;
  }
  c.layers_.push_back(make_dense(in, 2, rng, 1.0));
  return c;
}

std::size_t Classifier::parameter_count() const {
  std::size_t n = 0;
  for (const auto& d : layers_) n += d.weight.size() + d.bias.size();
  return n;
}

std::vector<BoundDense> Classifier::bind_all(Graph& g, bool trainable) const {
  std::vector<BoundDense> out;
  out.reserve(layers_.size());
  for (const auto& d : layers_) out.push_back(bind(g, d, trainable));
  return out;
}

namespace {

Classifier::Outputs classifier_head(Graph& g, Var pooled, const std::vector<BoundDense>& bound) {
  Var h = pooled;
  for (std::size_t i = 0; i + 1 < bound.size(); ++i) h = g.relu(apply(g, bound[i], h));
  const Var logits = apply(g, bound.back(), h);
  return {h, logits, g.softmax(logits)};
}

}  // namespace

Classifier::Outputs Classifier::forward(Graph& g, Var cells,
                                        const std::vector<BoundDense>& bound) const {
  return classifier_head(g, g.patch_pool(cells, arch_.geometry()), bound);
}

std::array<double, 2> Classifier::probabilities(const Scene& s) const {
  Graph g;
  const auto pooled = pooled_labels(s, arch_.geometry());
  const auto out = classifier_head(g, g.constant(Tensor::row(pooled)), bind_all(g, false));
  const Tensor& p = g.value(out.probabilities);
  return {p[0], p[1]};
}

ClassLabel Classifier::predict(const Scene& s) const {
  const auto p = probabilities(s);
  return p[1] > p[0] ? ClassLabel::Beautiful : ClassLabel::Ugly;
}

std::vector<double> Classifier::features(const Scene& s) const {
  if (!trained_) throw std::logic_error("features: classifier has not been trained");
  Graph g;
  const auto pooled = pooled_labels(s, arch_.geometry());
  const auto out = classifier_head(g, g.constant(Tensor::row(pooled)), bind_all(g, false));
  return g.value(out.features).vector();
}

Classifier fit_classifier(std::span<const Scene> scenes, std::span<const ClassLabel> labels,
                          const TrainConfig& cfg, const ClassifierArch& arch) {
  cfg.validate();
  if (scenes.size() != labels.size()) throw std::invalid_argument("fit_classifier: size mismatch");
  if (scenes.empty()) throw std::invalid_argument("fit_classifier: no training scenes");
  const bool has_b = std::find(labels.begin(), labels.end(), ClassLabel::Beautiful) != labels.end();
  const bool has_u = std::find(labels.begin(), labels.end(), ClassLabel::Ugly) != labels.end();
  if (!has_b || !has_u) throw std::invalid_argument("fit_classifier: both classes must be present");

  Classifier model = Classifier::initialize(arch, cfg.seed);
  model.set_config_hash(cfg.hash());
  std::vector<std::vector<double>> pooled;
  pooled.reserve(scenes.size());
  for (const auto& s : scenes) pooled.push_back(pooled_labels(s, arch.geometry()));

  Rng rng(mix_seed(cfg.seed, 0xba7c4));
  auto order = iota_indices(scenes.size());
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::span<const std::size_t> rows(order.data() + start,
                                              std::min(batch, order.size() - start));
      std::vector<std::size_t> targets;
      targets.reserve(rows.size());
      for (const auto r : rows) targets.push_back(static_cast<std::size_t>(labels[r]));
      Graph g;
      const auto bound = model.bind_all(g);
      const auto out = classifier_head(g, g.constant(pooled_batch(pooled, rows)), bound);
      const Var loss = g.scale(g.mean(g.pick(g.log_softmax(out.logits), targets)), -1.0);
      g.backward(loss);
      for (std::size_t i = 0; i < bound.size(); ++i) {
        sgd_step(model.layers()[i], bound[i], g, cfg.learning_rate, cfg.weight_decay);
      }
    }
  }
  model.mark_trained();
  return model;
}

double classifier_loss(const Classifier& c, std::span<const Scene> scenes,
                       std::span<const ClassLabel> labels) {
  if (scenes.empty()) return 0.0;
  std::vector<std::vector<double>> pooled;
  for (const auto& s : scenes) pooled.push_back(pooled_labels(s, c.arch().geometry()));
  const auto rows = iota_indices(scenes.size());
  std::vector<std::size_t> targets;
  for (const auto l : labels) targets.push_back(static_cast<std::size_t>(l));
  Graph g;
  const auto out = classifier_head(g, g.constant(pooled_batch(pooled, rows)), c.bind_all(g, false));
  return -g.value(g.mean(g.pick(g.log_softmax(out.logits), targets))).item();
}

double accuracy(const Classifier& c, std::span<const Scene> scenes,
                std::span<const ClassLabel> labels) {
  if (scenes.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scenes.size(); ++i) hits += c.predict(scenes[i]) == labels[i];
  return static_cast<double>(hits) / static_cast<double>(scenes.size());
}

TrainedClassifier train_classifier(std::span<const Scene> scenes,
                                   std::span<const ClassLabel> labels, const TrainConfig& cfg,
                                   const ClassifierArch& arch) {
  cfg.validate();
  if (scenes.size() != labels.size()) throw std::invalid_argument("train_classifier: size mismatch");
  const bool has_b = std::find(labels.begin(), labels.end(), ClassLabel::Beautiful) != labels.end();
  const bool has_u = std::find(labels.begin(), labels.end(), ClassLabel::Ugly) != labels.end();
  if (!has_b || !has_u) {
    throw std::invalid_argument("train_classifier: corpus contains a single class");
  }
  auto order = iota_indices(scenes.size());
  Rng rng(mix_seed(cfg.seed, 0x5971));
  rng.shuffle(std::span<std::size_t>(order));
  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(cfg.split * static_cast<double>(scenes.size()))), 1,
      scenes.size() - 1);
  std::vector<Scene> tr, te;
  std::vector<ClassLabel> trl, tel;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& s = i < n_train ? tr : te;
    auto& l = i < n_train ? trl : tel;
    s.push_back(scenes[order[i]]);
    l.push_back(labels[order[i]]);
  }
  TrainedClassifier out{fit_classifier(tr, trl, cfg, arch), {}};
  out.report.train_size = tr.size();
  out.report.test_size = te.size();
  out.report.train_accuracy = accuracy(out.model, tr, trl);
  out.report.test_accuracy = accuracy(out.model, te, tel);
  out.report.final_loss = classifier_loss(out.model, tr, trl);
  return out;
}

// ---------------------------------------------------------------------------

Generator Generator::initialize(const GeneratorArch& arch, std::uint64_t seed) {
  arch.encoder_geometry().validate();
  arch.decoder_geometry().validate();
  if (arch.latent <= 0 || arch.encoder_hidden <= 0 || arch.decoder_hidden <= 0) {
    throw std::invalid_argument("generator layer sizes must be positive");
  }
  Generator g;
  g.arch_ = arch;
  g.seed_ = seed;
  Rng rng(mix_seed(seed, 0x6e4e));
  const auto enc_in = static_cast<int>(arch.encoder_geometry().pooled_values());
  const auto dec_out = static_cast<int>(arch.decoder_geometry().factor_values());
  g.encoder_.push_back(make_dense(enc_in, arch.encoder_hidden, rng, std::sqrt(2.0)));
  g.encoder_.push_back(make_dense(arch.encoder_hidden, arch.latent, rng, 1.0));
  g.decoder_.push_back(make_dense(arch.latent, arch.decoder_hidden, rng, std::sqrt(2.0)));
  g.decoder_.push_back(make_dense(arch.decoder_hidden, dec_out, rng, 1.0));
  g.cell_bias_ = Tensor(1, arch.decoder_geometry().cell_values());
  return g;
}

Generator::Bound Generator::bind_all(Graph& g, bool trainable) const {
  Bound b;
  for (const auto& d : encoder_) b.encoder.push_back(bind(g, d, trainable));
  for (const auto& d : decoder_) b.decoder.push_back(bind(g, d, trainable));
  b.cell_bias = trainable ? g.variable(cell_bias_) : g.constant(cell_bias_);
  return b;
}

Var Generator::encode(Graph& g, Var pooled, const Bound& b) const {
  return apply(g, b.encoder[1], g.relu(apply(g, b.encoder[0], pooled)));
}

Var Generator::decode_logits(Graph& g, Var latent, const Bound& b) const {
  const Var h = g.relu(apply(g, b.decoder[0], latent));
  const Var factors = apply(g, b.decoder[1], h);
  return g.add(g.expand_factors(factors, arch_.decoder_geometry()), b.cell_bias);
}

Var Generator::decode_distribution(Graph& g, Var latent, const Bound& b) const {
  const Var logits = decode_logits(g, latent, b);
  const std::size_t rows = g.value(logits).rows();
  const std::size_t cells = static_cast<std::size_t>(arch_.height) * arch_.width;
  const Var per_cell = g.softmax(g.reshape(logits, rows * cells, kNumElements));
  return g.reshape(per_cell, rows, cells * kNumElements);
}

std::vector<double> Generator::encode(const Scene& s) const {
  Graph g;
  const auto pooled = pooled_labels(s, arch_.encoder_geometry());
  const Var z = encode(g, g.constant(Tensor::row(pooled)), bind_all(g, false));
  return g.value(z).vector();
}

Tensor Generator::decode(std::span<const double> latent) const {
  if (latent.size() != static_cast<std::size_t>(arch_.latent)) {
    throw std::invalid_argument("decode: latent dimension mismatch");
  }
  Graph g;
  const Var d = decode_distribution(
      g, g.constant(Tensor::row({latent.begin(), latent.end()})), bind_all(g, false));
  return g.value(d);
}

Scene Generator::decode_scene(std::span<const double> latent, const std::string& id) const {
  const Tensor dist = decode(latent);
  const std::size_t cells = static_cast<std::size_t>(arch_.height) * arch_.width;
  std::vector<std::uint8_t> labels(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    const double* p = &dist[i * kNumElements];
    labels[i] = static_cast<std::uint8_t>(std::max_element(p, p + kNumElements) - p);
  }
  return Scene(id, arch_.width, arch_.height, std::move(labels), {},
               {Provenance::Kind::Synthetic, 0.0});
}

double reconstruction_accuracy(const Generator& g, const Scene& s) {
  const Scene back = g.decode_scene(g.encode(s), s.id());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < s.cell_count(); ++i) hits += back.labels()[i] == s.labels()[i];
  return static_cast<double>(hits) / static_cast<double>(s.cell_count());
}

TrainedGenerator train_generator(std::span<const Scene> scenes, const TrainConfig& cfg,
                                 const GeneratorArch& arch) {
  cfg.validate();
  if (scenes.empty()) throw std::invalid_argument("train_generator: empty corpus");
  Generator model = Generator::initialize(arch, cfg.seed);
  model.set_config_hash(cfg.hash());

  auto order = iota_indices(scenes.size());
  Rng rng(mix_seed(cfg.seed, 0x9e7));
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::size_t> train_rows = order, held_rows = order;
  if (scenes.size() > 1) {
    const auto n_train = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(cfg.split * static_cast<double>(scenes.size()))), 1,
        scenes.size() - 1);
    train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    held_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  }

  std::vector<std::vector<double>> pooled;
  pooled.reserve(scenes.size());
  for (const auto& s : scenes) pooled.push_back(pooled_labels(s, arch.encoder_geometry()));

  const std::size_t cells = static_cast<std::size_t>(arch.height) * arch.width;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  double last_loss = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(train_rows));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < train_rows.size(); start += batch) {
      const std::span<const std::size_t> rows(train_rows.data() + start,
                                              std::min(batch, train_rows.size() - start));
      std::vector<std::size_t> targets;
      targets.reserve(rows.size() * cells);
      for (const auto r : rows)
        for (const auto c : scenes[r].labels()) targets.push_back(c);
      Graph g;
      const auto bound = model.bind_all(g);
      const Var z = model.encode(g, g.constant(pooled_batch(pooled, rows)), bound);
      const Var logits = model.decode_logits(g, z, bound);
      const Var per_cell = g.reshape(logits, rows.size() * cells, kNumElements);
      const Var loss = g.scale(g.mean(g.pick(g.log_softmax(per_cell), std::move(targets))), -1.0);
      g.backward(loss);
      epoch_loss += g.value(loss).item() * static_cast<double>(rows.size());
      const double lr = cfg.learning_rate;
      for (std::size_t i = 0; i < bound.encoder.size(); ++i)
        sgd_step(model.encoder()[i], bound.encoder[i], g, lr, cfg.weight_decay);
      for (std::size_t i = 0; i < bound.decoder.size(); ++i)
        sgd_step(model.decoder()[i], bound.decoder[i], g, lr, cfg.weight_decay);
      const Tensor& gb = g.grad(bound.cell_bias);
      for (std::size_t i = 0; i < gb.size(); ++i) model.cell_bias()[i] -= lr * gb[i];
    }
    last_loss = epoch_loss / static_cast<double>(train_rows.size());
  }
  model.mark_trained();

  TrainedGenerator out{std::move(model), {}};
  const auto mean_acc = [&](const std::vector<std::size_t>& rows) {
    double acc = 0.0;
    for (const auto r : rows) acc += reconstruction_accuracy(out.model, scenes[r]);
    return rows.empty() ? 0.0 : acc / static_cast<double>(rows.size());
  };
  out.report.train_size = train_rows.size();
  out.report.heldout_size = held_rows.size();
  out.report.train_accuracy = mean_acc(train_rows);
  out.report.heldout_accuracy = mean_acc(held_rows);
  out.report.final_loss = last_loss;
  return out;
}

// ---------------------------------------------------------------------------
// Binary container: magic, version, kind, dims, seed, config hash, flags,
// then (rows, cols, little-endian float64 data) per parameter block.

namespace {

using detail::Reader;
using detail::Writer;

constexpr char kMagic[8] = {'F', 'L', 'F', 'T', 'M', 'O', 'D', 'L'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kKindClassifier = 1;
constexpr std::uint32_t kKindGenerator = 2;

void write_tensor(Writer& w, const Tensor& t) {
  w.u32(static_cast<std::uint32_t>(t.rows()));
  w.u32(static_cast<std::uint32_t>(t.cols()));
  for (const double v : t.values()) w.f64(v);
}

Tensor read_tensor(Reader& r) {
  const std::size_t rows = r.u32(), cols = r.u32();
  if (rows * cols > (std::size_t{1} << 28)) throw std::runtime_error("implausible block size in " + r.path().string());
  Tensor t(rows, cols);
  for (auto& v : t.values()) v = r.f64();
  return t;
}

struct Header {
  std::uint32_t kind = 0;
  std::vector<std::uint32_t> dims;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::uint32_t flags = 0;
};

void write_header(Writer& w, const Header& h) {
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.u32(h.kind);
  w.u32(static_cast<std::uint32_t>(h.dims.size()));
  for (const auto d : h.dims) w.u32(d);
  w.u64(h.seed);
  w.u64(h.config_hash);
  w.u32(h.flags);
}

Header read_header(Reader& r, const std::filesystem::path& p) {
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw std::runtime_error(p.string() + " is not a model file");
  }
  if (const auto v = r.u32(); v != kVersion) {
    throw std::runtime_error(p.string() + ": unsupported model version " + std::to_string(v));
  }
  Header h;
  h.kind = r.u32();
  const auto n = r.u32();
  if (n > 64) throw std::runtime_error(p.string() + ": corrupt header");
  for (std::uint32_t i = 0; i < n; ++i) h.dims.push_back(r.u32());
  h.seed = r.u64();
  h.config_hash = r.u64();
  h.flags = r.u32();
  return h;
}

void expect_shape(const Tensor& t, std::size_t rows, std::size_t cols, const std::filesystem::path& p) {
  if (t.rows() != rows || t.cols() != cols) {
    throw std::runtime_error(p.string() + ": parameter block shape does not match architecture");
  }
}

}  // namespace

void save_classifier(const std::filesystem::path& path, const Classifier& c) {
  Header h;
  h.kind = kKindClassifier;
  const auto& a = c.arch();
  h.dims = {static_cast<std::uint32_t>(a.height), static_cast<std::uint32_t>(a.width),
            static_cast<std::uint32_t>(a.grid), static_cast<std::uint32_t>(a.hidden.size())};
  for (const int x : a.hidden) h.dims.push_back(static_cast<std::uint32_t>(x));
  h.seed = c.seed();
  h.config_hash = c.config_hash();
  h.flags = c.trained() ? 1u : 0u;
  Writer w(path);
  write_header(w, h);
  w.u32(static_cast<std::uint32_t>(2 * c.layers().size()));
  for (const auto& d : c.layers()) {
    write_tensor(w, d.weight);
    write_tensor(w, d.bias);
  }
}

Classifier load_classifier(const std::filesystem::path& path) {
  Reader r(path);
  const Header h = read_header(r, path);
  if (h.kind != kKindClassifier || h.dims.size() < 4 || h.dims.size() != 4 + h.dims[3]) {
    throw std::runtime_error(path.string() + ": not a classifier model");
  }
  ClassifierArch a;
  a.height = static_cast<int>(h.dims[0]);
  a.width = static_cast<int>(h.dims[1]);
  a.grid = static_cast<int>(h.dims[2]);
  a.hidden.clear();
  for (std::size_t i = 4; i < h.dims.size(); ++i) a.hidden.push_back(static_cast<int>(h.dims[i]));
  Classifier c = Classifier::initialize(a, h.seed);
  if (r.u32() != 2 * c.layers_.size()) throw std::runtime_error(path.string() + ": wrong block count");
  for (auto& d : c.layers_) {
    Tensor wt = read_tensor(r);
    Tensor bt = read_tensor(r);
    expect_shape(wt, d.weight.rows(), d.weight.cols(), path);
    expect_shape(bt, d.bias.rows(), d.bias.cols(), path);
    d.weight = std::move(wt);
    d.bias = std::move(bt);
  }
  c.config_hash_ = h.config_hash;
  c.trained_ = (h.flags & 1u) != 0;
  return c;
}

void save_generator(const std::filesystem::path& path, const Generator& g) {
  Header h;
  h.kind = kKindGenerator;
  const auto& a = g.arch();
  for (const int x : {a.height, a.width, a.encoder_grid, a.encoder_hidden, a.latent,
                      a.decoder_hidden, a.decoder_grid}) {
    h.dims.push_back(static_cast<std::uint32_t>(x));
  }
  h.seed = g.seed();
  h.config_hash = g.config_hash();
  h.flags = g.trained() ? 1u : 0u;
  Writer w(path);
  write_header(w, h);
  w.u32(static_cast<std::uint32_t>(2 * (g.encoder().size() + g.decoder().size()) + 1));
  for (const auto& d : g.encoder()) {
    write_tensor(w, d.weight);
    write_tensor(w, d.bias);
  }
  for (const auto& d : g.decoder()) {
    write_tensor(w, d.weight);
    write_tensor(w, d.bias);
  }
  write_tensor(w, g.cell_bias());
}

Generator load_generator(const std::filesystem::path& path) {
  Reader r(path);
  const Header h = read_header(r, path);
  if (h.kind != kKindGenerator || h.dims.size() != 7) {
    throw std::runtime_error(path.string() + ": not a generator model");
  }
  GeneratorArch a;
  a.height = static_cast<int>(h.dims[0]);
  a.width = static_cast<int>(h.dims[1]);
  a.encoder_grid = static_cast<int>(h.dims[2]);
  a.encoder_hidden = static_cast<int>(h.dims[3]);
  a.latent = static_cast<int>(h.dims[4]);
  a.decoder_hidden = static_cast<int>(h.dims[5]);
  a.decoder_grid = static_cast<int>(h.dims[6]);
  Generator g = Generator::initialize(a, h.seed);
  if (r.u32() != 2 * (g.encoder_.size() + g.decoder_.size()) + 1) {
    throw std::runtime_error(path.string() + ": wrong block count");
  }
  const auto load = [&](Dense& d) {
    Tensor wt = read_tensor(r);
    Tensor bt = read_tensor(r);
    expect_shape(wt, d.weight.rows(), d.weight.cols(), path);
    expect_shape(bt, d.bias.rows(), d.bias.cols(), path);
    d.weight = std::move(wt);
    d.bias = std::move(bt);
  };
  for (auto& d : g.encoder_) load(d);
  for (auto& d : g.decoder_) load(d);
  Tensor cb = read_tensor(r);
  expect_shape(cb, g.cell_bias_.rows(), g.cell_bias_.cols(), path);
  g.cell_bias_ = std::move(cb);
  g.config_hash_ = h.config_hash;
  g.trained_ = (h.flags & 1u) != 0;
  return g;
}

std::uint64_t model_config_hash(const std::filesystem::path& path) {
  Reader r(path);
  return read_header(r, path).config_hash;
}

}  // namespace facelift::nn
