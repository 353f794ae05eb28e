#include "nvt/vit.hpp"

#include <cmath>

#include "nvt/error.hpp"
#include "nvt/ops.hpp"
#include "nvt/rng.hpp"

namespace nvt::vit {

namespace {

constexpr double kInitStd = 0.02;
constexpr double kNormEps = 1e-6;

Tensor linear(const Tensor& x, const Linear& l) { return add(matmul(x, l.weight), l.bias); }

Tensor norm(const Tensor& x, const Norm& n) { return layer_norm(x, n.weight, n.bias, kNormEps); }

Tensor attention(const Tensor& x, const EncoderBlock& blk, const ViTConfig& cfg, Rng& rng, bool train) {
  const std::size_t B = x.dim(0), T = x.dim(1), D = cfg.embed_dim, H = cfg.num_heads, dh = cfg.head_dim();
  Tensor qkv = reshape(linear(x, blk.qkv), Shape{B, T, 3, H, dh});
  Tensor split = permute(qkv, {2, 0, 3, 1, 4});  // [3, B, H, T, dh]
  const Shape head_shape{B, H, T, dh};
  Tensor q = reshape(slice(split, 0, 0, 1), head_shape);
  Tensor k = reshape(slice(split, 0, 1, 1), head_shape);
  Tensor v = reshape(slice(split, 0, 2, 1), head_shape);
  Tensor scores = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(dh)));
  Tensor weights = softmax(scores, 3);
  Tensor ctx = matmul(weights, v);                                // [B, H, T, dh]
  Tensor merged = reshape(permute(ctx, {0, 2, 1, 3}), Shape{B, T, D});
  Tensor out = linear(merged, blk.proj);
  return train ? dropout(out, cfg.drop_rate, rng) : out;
}

Tensor mlp(const Tensor& x, const EncoderBlock& blk, const ViTConfig& cfg, Rng& rng, bool train) {
  Tensor h = gelu(linear(x, blk.fc1));
  Tensor out = linear(h, blk.fc2);
  return train ? dropout(out, cfg.drop_rate, rng) : out;
}

}  // namespace

ViTConfig ViTConfig::base16(std::size_t image_size, std::size_t num_classes) {
  ViTConfig c;
  c.image_size = image_size;
  c.num_classes = num_classes;
  return c;
}

std::size_t ViTConfig::mlp_hidden() const {
  return static_cast<std::size_t>(std::llround(static_cast<double>(embed_dim) * mlp_ratio));
}

void ViTConfig::validate() const {
  if (patch_size == 0 || image_size == 0) throw ConfigError("image_size and patch_size must be >= 1");
  if (image_size % patch_size != 0)
    throw ConfigError("image_size " + std::to_string(image_size) + " is not divisible by patch_size " +
                      std::to_string(patch_size));
  if (in_channels == 0) throw ConfigError("in_channels must be >= 1");
  if (embed_dim == 0 || num_heads == 0 || embed_dim % num_heads != 0)
    throw ConfigError("embed_dim " + std::to_string(embed_dim) + " must be a positive multiple of num_heads " +
                      std::to_string(num_heads));
  if (depth < 1) throw ConfigError("depth must be >= 1");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (!(mlp_ratio > 0.0) || mlp_hidden() == 0) throw ConfigError("mlp_ratio must give a positive hidden width");
  if (!(drop_rate >= 0.0 && drop_rate < 1.0)) throw ConfigError("drop_rate must be in [0, 1)");
}

std::vector<std::pair<std::string, Shape>> param_shapes(const ViTConfig& c) {
  const std::size_t D = c.embed_dim, Hd = c.mlp_hidden();
  std::vector<std::pair<std::string, Shape>> s;
  s.emplace_back("patch_embed.weight", Shape{c.patch_dim(), D});
  s.emplace_back("patch_embed.bias", Shape{D});
  s.emplace_back("cls_token", Shape{D});
  s.emplace_back("pos_embed", Shape{c.seq_len(), D});
  for (std::size_t l = 0; l < c.depth; ++l) {
    const std::string p = "blocks." + std::to_string(l) + ".";
    s.emplace_back(p + "norm1.weight", Shape{D});
    s.emplace_back(p + "norm1.bias", Shape{D});
    s.emplace_back(p + "attn.qkv.weight", Shape{D, 3 * D});
    s.emplace_back(p + "attn.qkv.bias", Shape{3 * D});
    s.emplace_back(p + "attn.proj.weight", Shape{D, D});
    s.emplace_back(p + "attn.proj.bias", Shape{D});
    s.emplace_back(p + "norm2.weight", Shape{D});
    s.emplace_back(p + "norm2.bias", Shape{D});
    s.emplace_back(p + "mlp.fc1.weight", Shape{D, Hd});
    s.emplace_back(p + "mlp.fc1.bias", Shape{Hd});
    s.emplace_back(p + "mlp.fc2.weight", Shape{Hd, D});
    s.emplace_back(p + "mlp.fc2.bias", Shape{D});
  }
  s.emplace_back("norm.weight", Shape{D});
  s.emplace_back("norm.bias", Shape{D});
  s.emplace_back("head.weight", Shape{D, c.num_classes});
  s.emplace_back("head.bias", Shape{c.num_classes});
  return s;
}

std::vector<NamedTensor> ModelParams::named() const {
  std::vector<NamedTensor> out;
  out.push_back({"patch_embed.weight", patch_embed.weight});
  out.push_back({"patch_embed.bias", patch_embed.bias});
  out.push_back({"cls_token", cls_token});
  out.push_back({"pos_embed", pos_embed});
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const std::string p = "blocks." + std::to_string(l) + ".";
    const EncoderBlock& b = blocks[l];
    out.push_back({p + "norm1.weight", b.norm1.weight});
    out.push_back({p + "norm1.bias", b.norm1.bias});
    out.push_back({p + "attn.qkv.weight", b.qkv.weight});
    out.push_back({p + "attn.qkv.bias", b.qkv.bias});
    out.push_back({p + "attn.proj.weight", b.proj.weight});
    out.push_back({p + "attn.proj.bias", b.proj.bias});
    out.push_back({p + "norm2.weight", b.norm2.weight});
    out.push_back({p + "norm2.bias", b.norm2.bias});
    out.push_back({p + "mlp.fc1.weight", b.fc1.weight});
    out.push_back({p + "mlp.fc1.bias", b.fc1.bias});
    out.push_back({p + "mlp.fc2.weight", b.fc2.weight});
    out.push_back({p + "mlp.fc2.bias", b.fc2.bias});
  }
  out.push_back({"norm.weight", norm.weight});
  out.push_back({"norm.bias", norm.bias});
  out.push_back({"head.weight", head.weight});
  out.push_back({"head.bias", head.bias});
  return out;
}

ModelParams ModelParams::clone() const {
  auto c = [](const Tensor& t) { return t.detach(); };
  auto cl = [&](const Linear& l) { return Linear{c(l.weight), c(l.bias)}; };
  auto cn = [&](const Norm& n) { return Norm{c(n.weight), c(n.bias)}; };
  ModelParams m;
  m.patch_embed = cl(patch_embed);
  m.cls_token = c(cls_token);
  m.pos_embed = c(pos_embed);
  for (const auto& b : blocks)
    m.blocks.push_back(EncoderBlock{cn(b.norm1), cl(b.qkv), cl(b.proj), cn(b.norm2), cl(b.fc1), cl(b.fc2)});
  m.norm = cn(norm);
  m.head = cl(head);
  return m;
}

void ModelParams::set_requires_grad(bool on) {
  for (auto& nt : named()) nt.tensor.set_requires_grad(on);
}

void ModelParams::zero_grad() {
  for (auto& nt : named()) nt.tensor.zero_grad();
}

ModelParams init_params(const ViTConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(derive_seed(seed, {0x696e6974ULL}));
  auto trunc = [&](Shape s) {
    Tensor t(std::move(s));
    for (double& v : t.mutable_data()) v = truncated_normal(rng, kInitStd);
    return t;
  };
  auto zeros = [](Shape s) { return Tensor(std::move(s), 0.0); };
  auto ones = [](Shape s) { return Tensor(std::move(s), 1.0); };
  const std::size_t D = config.embed_dim, Hd = config.mlp_hidden();

  ModelParams p;
  p.patch_embed = {trunc({config.patch_dim(), D}), zeros({D})};
  p.cls_token = zeros({D});
  p.pos_embed = trunc({config.seq_len(), D});
  for (std::size_t l = 0; l < config.depth; ++l) {
    EncoderBlock b;
    b.norm1 = {ones({D}), zeros({D})};
    b.qkv = {trunc({D, 3 * D}), zeros({3 * D})};
    b.proj = {trunc({D, D}), zeros({D})};
    b.norm2 = {ones({D}), zeros({D})};
    b.fc1 = {trunc({D, Hd}), zeros({Hd})};
    b.fc2 = {trunc({Hd, D}), zeros({D})};
    p.blocks.push_back(std::move(b));
  }
  p.norm = {ones({D}), zeros({D})};
  p.head = {trunc({D, config.num_classes}), zeros({config.num_classes})};
  return p;
}

std::uint64_t param_count(const ViTConfig& c) {
  const std::uint64_t D = c.embed_dim, Hd = c.mlp_hidden(), P = c.patch_dim();
  const std::uint64_t per_block = 2 * D             // norm1
                                  + D * 3 * D + 3 * D  // qkv
                                  + D * D + D          // proj
                                  + 2 * D              // norm2
                                  + D * Hd + Hd        // fc1
                                  + Hd * D + D;        // fc2
  return P * D + D                            // patch embedding
         + D                                  // cls token
         + static_cast<std::uint64_t>(c.seq_len()) * D  // positional table
         + c.depth * per_block                //
         + 2 * D                              // final norm
         + D * c.num_classes + c.num_classes;  // head
}

void check_params(const ModelParams& params, const ViTConfig& config) {
  const auto expected = param_shapes(config);
  const auto actual = params.named();
  if (expected.size() != actual.size())
    throw ShapeError("model has " + std::to_string(actual.size()) + " tensors, config expects " +
                     std::to_string(expected.size()));
  for (std::size_t i = 0; i < expected.size(); ++i)
    if (actual[i].tensor.shape() != expected[i].second)
      throw ShapeError(expected[i].first + " has shape " + shape_str(actual[i].tensor.shape()) + ", config expects " +
                       shape_str(expected[i].second));
}

Tensor forward(const ModelParams& params, const ViTConfig& config, const Tensor& batch,
               const std::optional<noise::NoiseConfig>& noise, const ForwardOptions& options) {
  const Shape expect{0, config.in_channels, config.image_size, config.image_size};
  if (batch.rank() != 4 || batch.dim(1) != expect[1] || batch.dim(2) != expect[2] || batch.dim(3) != expect[3])
    throw ShapeError("batch shape " + shape_str(batch.shape()) + " does not match model geometry [B," +
                     std::to_string(config.in_channels) + "," + std::to_string(config.image_size) + "," +
                     std::to_string(config.image_size) + "]");
  if (params.blocks.size() != config.depth) throw ShapeError("parameter depth does not match config");
  if (noise) noise->validate(config.depth);

  const bool train = options.mode == Mode::Train;
  Rng rng(derive_seed(options.seed, {0x64726f70ULL}));
  const std::size_t B = batch.dim(0), D = config.embed_dim;

  Tensor patches = patchify(batch, config.patch_size);  // [B, N, P]
  Tensor tokens = linear(patches, params.patch_embed);  // [B, N, D]
  // CLS row broadcast across the batch.
  Tensor cls = add(Tensor(Shape{B, 1, D}, 0.0), reshape(params.cls_token, Shape{1, 1, D}));
  Tensor x = add(concat({cls, tokens}, 1), params.pos_embed);
  if (train) x = dropout(x, config.drop_rate, rng);

  std::optional<noise::QualityMatrix> q;
  if (noise) q = noise::build_quality_matrix(noise->quality, B);

  for (std::size_t l = 0; l < config.depth; ++l) {
    if (options.trace) options.trace->layer_inputs.push_back(x.shape());
    const EncoderBlock& blk = params.blocks[l];
    x = add(x, attention(norm(x, blk.norm1), blk, config, rng, train));
    x = add(x, mlp(norm(x, blk.norm2), blk, config, rng, train));
    if (q && l == noise->layer_index) x = noise::inject(x, *q);
  }
  Tensor cls_out = reshape(slice(norm(x, params.norm), 1, 0, 1), Shape{B, D});
  return linear(cls_out, params.head);
}

Tensor resize_pos_embed(const Tensor& table, std::size_t old_grid, std::size_t new_grid) {
  if (table.rank() != 2 || table.dim(0) != 1 + old_grid * old_grid)
    throw ShapeError("positional table " + shape_str(table.shape()) + " does not hold 1 + " +
                     std::to_string(old_grid) + "^2 rows");
  if (new_grid == 0) throw ConfigError("new grid must be >= 1");
  const std::size_t D = table.dim(1);
  if (old_grid == new_grid) return table.detach();
  const auto src = table.data();
  std::vector<double> out((1 + new_grid * new_grid) * D);
  std::copy_n(src.begin(), D, out.begin());
  auto coord = [&](std::size_t i) {
    if (new_grid == 1) return 0.5 * static_cast<double>(old_grid - 1);
    return static_cast<double>(i) * static_cast<double>(old_grid - 1) / static_cast<double>(new_grid - 1);
  };
  for (std::size_t r = 0; r < new_grid; ++r) {
    const double fr = coord(r);
    const std::size_t r0 = std::min(static_cast<std::size_t>(fr), old_grid - 1);
    const std::size_t r1 = std::min(r0 + 1, old_grid - 1);
    const double wr = fr - static_cast<double>(r0);
    for (std::size_t c = 0; c < new_grid; ++c) {
      const double fc = coord(c);
      const std::size_t c0 = std::min(static_cast<std::size_t>(fc), old_grid - 1);
      const std::size_t c1 = std::min(c0 + 1, old_grid - 1);
      const double wc = fc - static_cast<double>(c0);
      const double* p00 = src.data() + (1 + r0 * old_grid + c0) * D;
      const double* p01 = src.data() + (1 + r0 * old_grid + c1) * D;
      const double* p10 = src.data() + (1 + r1 * old_grid + c0) * D;
      const double* p11 = src.data() + (1 + r1 * old_grid + c1) * D;
      double* dst = out.data() + (1 + r * new_grid + c) * D;
      for (std::size_t d = 0; d < D; ++d) {
        const double top = p00[d] + wc * (p01[d] - p00[d]);
        const double bottom = p10[d] + wc * (p11[d] - p10[d]);
        dst[d] = top + wr * (bottom - top);
      }
    }
  }
  return Tensor(Shape{1 + new_grid * new_grid, D}, std::move(out));
}

ModelParams adapt_resolution(const ModelParams& params, const ViTConfig& from, std::size_t image_size) {
  ViTConfig to = from;
  to.image_size = image_size;
  to.validate();
  ModelParams out = params;
  out.pos_embed = resize_pos_embed(params.pos_embed, from.grid(), to.grid());
  return out;
}

}  // namespace nvt::vit
