// Copyright 2026 The HREB-CRF Authors
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

#include "hreb/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "hreb/error.hpp"

namespace hreb {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'H', 'R', 'E', 'B'};


template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_str(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_tensor(std::ostream& out, const Tensor& t) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
  out.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) fail(ErrorKind::kCheckpoint, "checkpoint: truncated file");
  return v;
}

std::string get_str(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  if (n > (1ull << 32)) fail(ErrorKind::kCheckpoint, "checkpoint: corrupt string length");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) fail(ErrorKind::kCheckpoint, "checkpoint: truncated file");
  return s;
}

Tensor get_tensor(std::istream& in) {
  const auto rank = get<std::uint32_t>(in);
  if (rank > 4) fail(ErrorKind::kCheckpoint, "checkpoint: corrupt tensor rank");
  Shape shape;
  std::size_t n = 1;
  for (std::uint32_t k = 0; k < rank; ++k) {
    shape.push_back(get<std::uint64_t>(in));
    n *= shape.back();
  }
  if (n > (1ull << 32)) fail(ErrorKind::kCheckpoint, "checkpoint: corrupt tensor size");
  std::vector<double> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) fail(ErrorKind::kCheckpoint, "checkpoint: truncated file");
  return Tensor(std::move(shape), std::move(v));
}

}  // namespace

void save_checkpoint(std::ostream& out, const Tagger& model) {
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put_str(out, model.config().to_text());
  const auto& vocab = model.vocab();
  put<std::uint64_t>(out, vocab.token_count());
  for (const auto& t : vocab.tokens()) put_str(out, t);
  put<std::uint64_t>(out, vocab.tag_count());
  for (const auto& t : vocab.tags()) put_str(out, t);
  put<std::uint64_t>(out, model.params().size());
  for (const auto& [name, t] : model.params()) {
    put_str(out, name);
    put_tensor(out, t);
  }
  put<std::uint64_t>(out, model.gates().size());
  for (const auto& g : model.gates()) {
    put<std::uint8_t>(out, static_cast<std::uint8_t>(g.mode));
    put<double>(out, g.static_alpha);
    put<double>(out, g.static_beta);
    put_tensor(out, g.cache_f);
    put_tensor(out, g.cache_x);
  }
  if (!out) fail(ErrorKind::kCheckpoint, "checkpoint: write failed");
}

void save_checkpoint(const std::string& path, const Tagger& model) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kCheckpoint, "checkpoint: cannot write '" + path + "'");
    save_checkpoint(out, model);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    fail(ErrorKind::kCheckpoint, "checkpoint: cannot move into '" + path + "'");
}

Tagger load_checkpoint(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) fail(ErrorKind::kCheckpoint, "checkpoint: bad magic bytes");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    fail(ErrorKind::kCheckpoint, "checkpoint: format version " + std::to_string(version) + " is not supported (expected " +
                                     std::to_string(kCheckpointVersion) + ")");
  RunConfig cfg;
  try {
    cfg = parse_config(get_str(in), "<checkpoint config>");
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kCheckpoint) throw;
    fail(ErrorKind::kCheckpoint, std::string("checkpoint: embedded config rejected: ") + e.what());
  }
  data::Vocab vocab;
  const auto n_tokens = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < n_tokens; ++i) {
    const std::string t = get_str(in);
    if (i >= 2) vocab.add_token(t);
  }
  const auto n_tags = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < n_tags; ++i) vocab.add_tag(get_str(in));
  if (vocab.token_count() != n_tokens) fail(ErrorKind::kCheckpoint, "checkpoint: duplicate vocabulary entries");

  Tagger model(cfg, std::move(vocab));
  const auto n_params = get<std::uint64_t>(in);
  if (n_params != model.params().size())
    fail(ErrorKind::kCheckpoint, "checkpoint: holds " + std::to_string(n_params) + " tensors, model expects " +
                                     std::to_string(model.params().size()));
  for (std::uint64_t i = 0; i < n_params; ++i) {
    const std::string name = get_str(in);
    Tensor t = get_tensor(in);
    if (!model.params().contains(name)) fail(ErrorKind::kCheckpoint, "checkpoint: unexpected tensor '" + name + "'");
    Tensor& dst = model.params().at(name);
    if (!dst.same_shape(t))
      fail(ErrorKind::kCheckpoint, "checkpoint: tensor '" + name + "' has shape " + shape_str(t.shape()) +
                                       ", model expects " + shape_str(dst.shape()));
    dst = std::move(t);
  }
  const auto n_gates = get<std::uint64_t>(in);
  if (n_gates != model.gates().size()) fail(ErrorKind::kCheckpoint, "checkpoint: gate count mismatch");
  for (auto& g : model.gates()) {
    const auto mode = get<std::uint8_t>(in);
    if (mode != static_cast<std::uint8_t>(g.mode)) fail(ErrorKind::kCheckpoint, "checkpoint: gate mode mismatch");
    g.static_alpha = get<double>(in);
    g.static_beta = get<double>(in);
    Tensor cf = get_tensor(in), cx = get_tensor(in);
    if (!cf.same_shape(g.cache_f) || !cx.same_shape(g.cache_x))
      fail(ErrorKind::kCheckpoint, "checkpoint: gate cache shape mismatch");
    g.cache_f = std::move(cf);
    g.cache_x = std::move(cx);
  }
  return model;
}

Tagger load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kCheckpoint, "checkpoint: cannot open '" + path + "'");
  return load_checkpoint(in);
}

}  // namespace hreb
