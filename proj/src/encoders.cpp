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

#include "hreb/encoders.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <unordered_map>

#include "hreb/error.hpp"
#include "hreb/ops.hpp"

namespace hreb::enc {

Tensor init_embedding(std::size_t vocab_size, std::size_t dim, Rng& rng) {
  Tensor t = uniform_tensor({vocab_size, dim}, -0.1, 0.1, rng);
  for (std::size_t j = 0; j < dim && vocab_size > 0; ++j) t.at(kPadId, j) = 0.0;
  return t;
}

Var embed_tokens(Var table, std::span<const int> ids) { return gather_rows(table, ids, kPadId); }

LoadedEmbedding load_embedding_file(const std::string& path, std::span<const std::string> id_to_token,
                                    std::size_t dim, Rng& rng, std::size_t reserved) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kData, "embedding_file: cannot open '" + path + "'");
  LoadedEmbedding out;
  out.table = init_embedding(id_to_token.size(), dim, rng);

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = reserved; i < id_to_token.size(); ++i) index.emplace(id_to_token[i], i);

  std::string line;
  std::size_t lineno = 0, count = 0, file_dim = 0;
  if (!std::getline(in, line)) fail(ErrorKind::kData, path + ":1: missing header");
  ++lineno;
  {
    std::istringstream hs(line);
    if (!(hs >> count >> file_dim)) fail(ErrorKind::kData, path + ":1: header must be 'count dim'");
  }
  if (file_dim != dim)
    fail(ErrorKind::kConfig, path + ": embedding dim " + std::to_string(file_dim) + " != d_model " +
                                 std::to_string(dim));

  std::vector<bool> seen(id_to_token.size(), false);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    std::vector<double> v;
    double x;
    while (ls >> x) v.push_back(x);
    if (!ls.eof() || v.size() != dim)
      fail(ErrorKind::kData, path + ":" + std::to_string(lineno) + ": expected token and " +
                                 std::to_string(dim) + " numbers");
    ++rows;
    auto it = index.find(token);
    if (it == index.end()) continue;
    for (std::size_t j = 0; j < dim; ++j) out.table.at(it->second, j) = v[j];
    if (!seen[it->second]) {
      seen[it->second] = true;
      ++out.hits;
    }
  }
  if (rows != count)
    fail(ErrorKind::kData, path + ": header announces " + std::to_string(count) + " rows, found " +
                               std::to_string(rows));
  const std::size_t denom = id_to_token.size() > reserved ? id_to_token.size() - reserved : 0;
  out.coverage = denom ? static_cast<double>(out.hits) / static_cast<double>(denom) : 0.0;
  return out;
}

namespace {

struct LstmCache {
  // Per processed step (in processing order): gate activations, cell, tanh(cell).
  std::vector<double> i, f, g, o, c, tc;
};

}  // namespace

Var lstm_direction(Var x, Var w_ih, Var w_hh, Var bias, std::size_t length, bool reverse) {
  const Tensor& xv = x.value();
  const Tensor& wi = w_ih.value();
  const Tensor& wh = w_hh.value();
  const Tensor& bv = bias.value();
  const std::size_t seq = xv.rows(), d = xv.cols(), h = wh.rows();
  require(wi.rows() == d && wi.cols() == 4 * h && wh.cols() == 4 * h && bv.size() == 4 * h,
          ErrorKind::kDimension, "lstm: weight shapes do not match input " + shape_str(xv.shape()));
  require(length <= seq, ErrorKind::kContract, "lstm: length exceeds sequence");

  auto cache = std::make_shared<LstmCache>();
  for (auto* v : {&cache->i, &cache->f, &cache->g, &cache->o, &cache->c, &cache->tc}) v->assign(length * h, 0.0);
  Tensor out({seq, h});
  std::vector<double> a(4 * h), hp(h, 0.0), cp(h, 0.0);
  for (std::size_t s = 0; s < length; ++s) {
    const std::size_t t = reverse ? length - 1 - s : s;
    for (std::size_t k = 0; k < 4 * h; ++k) a[k] = bv[k];
    for (std::size_t r = 0; r < d; ++r) {
      const double xr = xv[t * d + r];
      if (xr == 0.0) continue;
      for (std::size_t k = 0; k < 4 * h; ++k) a[k] += xr * wi[r * 4 * h + k];
    }
    for (std::size_t r = 0; r < h; ++r) {
      const double hr = hp[r];
      if (hr == 0.0) continue;
      for (std::size_t k = 0; k < 4 * h; ++k) a[k] += hr * wh[r * 4 * h + k];
    }
    for (std::size_t j = 0; j < h; ++j) {
      const double ig = scalar::sigmoid(a[j]);
      const double fg = scalar::sigmoid(a[h + j]);
      const double gg = std::tanh(a[2 * h + j]);
      const double og = scalar::sigmoid(a[3 * h + j]);
      const double c = fg * cp[j] + ig * gg;
      const double tc = std::tanh(c);
      const std::size_t q = s * h + j;
      cache->i[q] = ig;
      cache->f[q] = fg;
      cache->g[q] = gg;
      cache->o[q] = og;
      cache->c[q] = c;
      cache->tc[q] = tc;
      cp[j] = c;
      hp[j] = og * tc;
      out[t * h + j] = hp[j];
    }
  }

  Tensor hidden = out;
  return x.tape->record(
      "lstm", std::move(out), {x, w_ih, w_hh, bias},
      [x, w_ih, w_hh, bias, cache, hidden, length, reverse, seq, d, h](Tape& tp, const Tensor& g) {
        const Tensor& xv = tp.value(x.id);
        const Tensor& wi = tp.value(w_ih.id);
        const Tensor& wh = tp.value(w_hh.id);
        Tensor gx({seq, d}), gwi(wi.shape()), gwh(wh.shape()), gb({1, 4 * h});
        std::vector<double> dh_next(h, 0.0), dc_next(h, 0.0), da(4 * h);
        for (std::size_t s = length; s-- > 0;) {
          const std::size_t t = reverse ? length - 1 - s : s;
          for (std::size_t j = 0; j < h; ++j) {
            const std::size_t q = s * h + j;
            const double ig = cache->i[q], fg = cache->f[q], gg = cache->g[q], og = cache->o[q];
            const double tc = cache->tc[q];
            const double c_prev = s > 0 ? cache->c[q - h] : 0.0;
            const double dh = g[t * h + j] + dh_next[j];
            const double dc = dh * og * (1.0 - tc * tc) + dc_next[j];
            da[j] = dc * gg * ig * (1.0 - ig);
            da[h + j] = dc * c_prev * fg * (1.0 - fg);
            da[2 * h + j] = dc * ig * (1.0 - gg * gg);
            da[3 * h + j] = dh * tc * og * (1.0 - og);
            dc_next[j] = dc * fg;
          }
          // Parameter and input gradients for this step.
          for (std::size_t k = 0; k < 4 * h; ++k) gb[k] += da[k];
          for (std::size_t r = 0; r < d; ++r) {
            const double xr = xv[t * d + r];
            double acc = 0.0;
            for (std::size_t k = 0; k < 4 * h; ++k) {
              gwi[r * 4 * h + k] += xr * da[k];
              acc += da[k] * wi[r * 4 * h + k];
            }
            gx[t * d + r] = acc;
          }
          const std::size_t t_prev = reverse ? t + 1 : t - 1;
          for (std::size_t r = 0; r < h; ++r) {
            const double hr = s > 0 ? hidden[t_prev * h + r] : 0.0;
            double acc = 0.0;
            for (std::size_t k = 0; k < 4 * h; ++k) {
              gwh[r * 4 * h + k] += hr * da[k];
              acc += da[k] * wh[r * 4 * h + k];
            }
            dh_next[r] = acc;
          }
        }
        tp.accumulate(x.id, gx);
        tp.accumulate(w_ih.id, gwi);
        tp.accumulate(w_hh.id, gwh);
        tp.accumulate(bias.id, gb);
      });
}

void BiLstm::init(ParamStore& params, Rng& rng) const {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_));
  for (const char* dir : {".fwd", ".bwd"}) {
    params.add(prefix_ + dir + ".w_ih", uniform_tensor({d_in_, 4 * hidden_}, -bound, bound, rng));
    params.add(prefix_ + dir + ".w_hh", uniform_tensor({hidden_, 4 * hidden_}, -bound, bound, rng));
    Tensor b({1, 4 * hidden_});
    // Forget gate bias 1 keeps early gradients flowing.
    for (std::size_t j = hidden_; j < 2 * hidden_; ++j) b[j] = 1.0;
    params.add(prefix_ + dir + ".bias", std::move(b));
  }
}

Var BiLstm::forward(Tape& tape, const ParamStore& params, Var x, std::size_t length) const {
  require(x.cols() == d_in_, ErrorKind::kDimension,
          "bilstm: input width " + std::to_string(x.cols()) + " != " + std::to_string(d_in_));
  auto run = [&](const std::string& dir, bool reverse) {
    return lstm_direction(x, params.bind(tape, prefix_ + dir + ".w_ih"), params.bind(tape, prefix_ + dir + ".w_hh"),
                          params.bind(tape, prefix_ + dir + ".bias"), length, reverse);
  };
  return concat_cols(run(".fwd", false), run(".bwd", true));
}

}  // namespace hreb::enc
