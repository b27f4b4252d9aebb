// Copyright 2026  The dsvae Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "dsvae/losses.hpp"
#include "dsvae/ops.hpp"
#include "oracles.hpp"

namespace oracle {

struct GradCase {
  std::string name;
  ScalarFn fn;
  std::vector<DTensor> inputs;
};

using CaseFactory = std::function<GradCase(std::mt19937_64&)>;

/// Reduces any output to a scalar through a fixed random weighting so every
/// Jacobian row is exercised.
inline DVar project(const DVar& y) {
  std::mt19937_64 gen(0x5eed);
  DTape& tape = *y.tape();
  const DVar w = tape.constant(random_tensor(gen, y.shape()));
  return dsvae::ad::sum(y * w);
}

inline DTensor avoiding(std::mt19937_64& gen, dsvae::ad::Shape shape,
                        std::vector<double> kinks, double lo, double hi,
                        double gap = 0.05) {
  std::uniform_real_distribution<double> u(lo, hi);
  DTensor t(std::move(shape));
  for (double& v : t.data()) {
    for (;;) {
      v = u(gen);
      bool ok = true;
      for (double k : kinks) ok = ok && std::abs(v - k) > gap;
      if (ok) break;
    }
  }
  return t;
}

inline std::vector<int> random_labels(std::mt19937_64& gen, std::size_t n) {
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(gen() % 2);
  y[0] = 0;
  if (n > 1) y[1] = 1;
  return y;
}

inline std::vector<std::pair<std::string, CaseFactory>> op_cases() {
  namespace ad = dsvae::ad;
  using ad::UnaryKind;
  std::vector<std::pair<std::string, CaseFactory>> c;
  auto unary = [&c](std::string name, UnaryKind kind, double p, double p2,
                    std::vector<double> kinks, double lo, double hi) {
    c.emplace_back(name, [=](std::mt19937_64& g) {
      return GradCase{name,
                      [=](DTape&, const std::vector<DVar>& v) {
                        return project(ad::map_unary(ad::UnaryOp{kind, p, p2}, v[0]));
                      },
                      {avoiding(g, {3, 4}, kinks, lo, hi)}};
    });
  };
  unary("relu", UnaryKind::kRelu, 0, 0, {0.0}, -1, 1);
  unary("leaky_relu", UnaryKind::kLeakyRelu, 0.2, 0, {0.0}, -1, 1);
  unary("sigmoid", UnaryKind::kSigmoid, 0, 0, {}, -3, 3);
  unary("exp", UnaryKind::kExp, 0, 0, {}, -2, 2);
  unary("log", UnaryKind::kLog, 0, 0, {}, 0.2, 3);
  unary("square", UnaryKind::kSquare, 0, 0, {}, -2, 2);
  unary("sqrt", UnaryKind::kSqrt, 0, 0, {}, 0.2, 3);
  unary("negate", UnaryKind::kNegate, 0, 0, {}, -1, 1);
  unary("scale", UnaryKind::kScale, -1.7, 0, {}, -1, 1);
  unary("add_scalar", UnaryKind::kAddScalar, 0.3, 0, {}, -1, 1);
  unary("abs", UnaryKind::kAbs, 0, 0, {0.0}, -1, 1);
  unary("clamp", UnaryKind::kClamp, -0.5, 0.5, {-0.5, 0.5}, -1, 1);

  auto binary = [&c](std::string name, ad::BinaryKind kind, ad::Shape sb) {
    c.emplace_back(name, [=](std::mt19937_64& g) {
      return GradCase{name,
                      [=](DTape&, const std::vector<DVar>& v) {
                        return project(ad::zip_binary(kind, v[0], v[1]));
                      },
                      {random_tensor(g, {3, 4}),
                       kind == ad::BinaryKind::kDiv ? avoiding(g, sb, {0.0}, -2, 2, 0.3)
                                                    : random_tensor(g, sb)}};
    });
  };
  binary("add", ad::BinaryKind::kAdd, {3, 4});
  binary("sub", ad::BinaryKind::kSub, {3, 4});
  binary("mul", ad::BinaryKind::kMul, {3, 4});
  binary("div", ad::BinaryKind::kDiv, {3, 4});
  binary("mul_broadcast", ad::BinaryKind::kMul, {1});
  binary("div_broadcast", ad::BinaryKind::kDiv, {1});

  c.emplace_back("matmul", [](std::mt19937_64& g) {
    return GradCase{"matmul",
                    [](DTape&, const std::vector<DVar>& v) {
                      return project(ad::matmul(v[0], v[1]));
                    },
                    {random_tensor(g, {3, 4}), random_tensor(g, {4, 2})}};
  });
  c.emplace_back("transpose", [](std::mt19937_64& g) {
    return GradCase{"transpose",
                    [](DTape&, const std::vector<DVar>& v) {
                      return project(ad::transpose(v[0]));
                    },
                    {random_tensor(g, {3, 5})}};
  });
  for (std::size_t stride : {1, 2}) {
    for (std::size_t pad : {0, 1}) {
      const std::string name =
          "conv2d_s" + std::to_string(stride) + "_p" + std::to_string(pad);
      c.emplace_back(name, [=](std::mt19937_64& g) {
        return GradCase{name,
                        [=](DTape&, const std::vector<DVar>& v) {
                          return project(ad::conv2d(v[0], v[1], stride, pad));
                        },
                        {random_tensor(g, {2, 2, 5, 6}), random_tensor(g, {3, 2, 3, 3})}};
      });
    }
  }
  c.emplace_back("conv2d_transpose", [](std::mt19937_64& g) {
    return GradCase{"conv2d_transpose",
                    [](DTape&, const std::vector<DVar>& v) {
                      return project(ad::conv2d_transpose(v[0], v[1], 2, 1));
                    },
                    {random_tensor(g, {2, 2, 3, 4}), random_tensor(g, {2, 3, 4, 4})}};
  });
  c.emplace_back("conv2d_transpose_k3", [](std::mt19937_64& g) {
    return GradCase{"conv2d_transpose_k3",
                    [](DTape&, const std::vector<DVar>& v) {
                      return project(ad::conv2d_transpose(v[0], v[1], 1, 1));
                    },
                    {random_tensor(g, {1, 2, 3, 3}), random_tensor(g, {2, 2, 3, 3})}};
  });
  c.emplace_back("sum_all", [](std::mt19937_64& g) {
    return GradCase{"sum_all",
                    [](DTape&, const std::vector<DVar>& v) {
                      return ad::scale(ad::sum(ad::square(v[0])), 0.5);
                    },
                    {random_tensor(g, {2, 3, 2})}};
  });
  c.emplace_back("sum_axis", [](std::mt19937_64& g) {
    return GradCase{"sum_axis",
                    [](DTape&, const std::vector<DVar>& v) {
                      return project(
                          ad::reduce(ad::ReduceKind::kSum, v[0], std::vector<std::size_t>{1}));
                    },
                    {random_tensor(g, {2, 3, 2})}};
  });
  c.emplace_back("mean_axes", [](std::mt19937_64& g) {
    return GradCase{"mean_axes",
                    [](DTape&, const std::vector<DVar>& v) {
                      return project(ad::reduce(ad::ReduceKind::kMean, v[0],
                                                std::vector<std::size_t>{0, 2}));
                    },
                    {random_tensor(g, {2, 3, 4})}};
  });
  c.emplace_back("reshape", [](std::mt19937_64& g) {
    return GradCase{"reshape",
                    [](DTape&, const std::vector<DVar>& v) {
                      return project(ad::reshape(v[0], {4, 3}));
                    },
                    {random_tensor(g, {2, 6})}};
  });
  c.emplace_back("add_bias", [](std::mt19937_64& g) {
    return GradCase{"add_bias",
                    [](DTape&, const std::vector<DVar>& v) {
                      return project(ad::add_bias(v[0], v[1]));
                    },
                    {random_tensor(g, {2, 3, 2, 2}), random_tensor(g, {3})}};
  });
  c.emplace_back("concat", [](std::mt19937_64& g) {
    return GradCase{"concat",
                    [](DTape&, const std::vector<DVar>& v) {
                      return project(ad::concat(v[0], v[1], 1));
                    },
                    {random_tensor(g, {3, 2}), random_tensor(g, {3, 4})}};
  });
  c.emplace_back("normalize_rows", [](std::mt19937_64& g) {
    return GradCase{"normalize_rows",
                    [](DTape&, const std::vector<DVar>& v) {
                      return project(ad::normalize_rows(v[0]));
                    },
                    {random_away_from_zero(g, {3, 4}, 0.5)}};
  });
  c.emplace_back("cross_entropy", [](std::mt19937_64& g) {
    auto labels = std::make_shared<std::vector<int>>(std::vector<int>{0, 2, 1, 2});
    return GradCase{"cross_entropy",
                    [labels](DTape&, const std::vector<DVar>& v) {
                      return ad::cross_entropy(v[0], std::span<const int>(*labels));
                    },
                    {random_tensor(g, {4, 3}, -2, 2)}};
  });
  c.emplace_back("linear", [](std::mt19937_64& g) {
    return GradCase{"linear",
                    [](DTape&, const std::vector<DVar>& v) {
                      return project(ad::linear(v[0], v[1], v[2]));
                    },
                    {random_tensor(g, {3, 4}), random_tensor(g, {2, 4}),
                     random_tensor(g, {2})}};
  });
  return c;
}

inline std::vector<std::pair<std::string, CaseFactory>> loss_cases() {
  namespace loss = dsvae::loss;
  std::vector<std::pair<std::string, CaseFactory>> c;
  c.emplace_back("recon_loss", [](std::mt19937_64& g) {
    return GradCase{"recon_loss",
                    [](DTape&, const std::vector<DVar>& v) {
                      return loss::recon_loss(v[0], v[1]);
                    },
                    {random_tensor(g, {2, 1, 3, 4}), random_tensor(g, {2, 1, 3, 4})}};
  });
  c.emplace_back("kl_loss", [](std::mt19937_64& g) {
    return GradCase{"kl_loss",
                    [](DTape&, const std::vector<DVar>& v) {
                      return loss::kl_loss(v[0], v[1]);
                    },
                    {random_tensor(g, {3, 4}), random_tensor(g, {3, 4})}};
  });
  c.emplace_back("cosface_loss", [](std::mt19937_64& g) {
    auto labels = std::make_shared<std::vector<int>>(random_labels(g, 4));
    return GradCase{"cosface_loss",
                    [labels](DTape&, const std::vector<DVar>& v) {
                      return loss::cosface_loss(v[0], std::span<const int>(*labels), v[1],
                                                30.0, 0.35);
                    },
                    {random_tensor(g, {4, 4}, -3, 3), random_tensor(g, {2, 4}, -3, 3)}};
  });
  c.emplace_back("concentration_loss", [](std::mt19937_64& g) {
    auto labels = std::make_shared<std::vector<int>>(random_labels(g, 3));
    return GradCase{"concentration_loss",
                    [labels](DTape&, const std::vector<DVar>& v) {
                      return loss::concentration_loss(v[0], std::span<const int>(*labels));
                    },
                    {avoiding(g, {3, 1, 2, 3}, {0.0}, -1, 1)}};
  });
  c.emplace_back("bce_loss", [](std::mt19937_64& g) {
    auto labels = std::make_shared<std::vector<int>>(random_labels(g, 5));
    return GradCase{"bce_loss",
                    [labels](DTape&, const std::vector<DVar>& v) {
                      return loss::bce_loss(v[0], std::span<const int>(*labels));
                    },
                    {random_tensor(g, {5}, 0.15, 0.85)}};
  });
  return c;
}

}  // namespace oracle
