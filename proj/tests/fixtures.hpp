#ifndef CNNLAB_TESTS_FIXTURES_HPP_
#define CNNLAB_TESTS_FIXTURES_HPP_

#include "cnnlab/arch.hpp"

// Shared reference architectures. Hand-derived facts used across the suites:
//   arch_a1: 8x8x1 input, pool 2, one 3x3 stride-1 layer with 2 maps, 4
//            outputs; feature map 6x6, pooled 3x3, d = 90, theta(main) = 116,
//            theta(supplement) = 92.
//   arch_a2: 22x22x1 input, pool 2, layers (3,1,2) and (4,2,2), 3 outputs;
//            maps 20x20 -> pooled 10x10, then 4x4 -> pooled 2x2.
inline cnnlab::Architecture arch_a1() {
  cnnlab::Architecture a;
  a.input_rows = a.input_cols = 8;
  a.input_channels = 1;
  a.pool = 2;
  a.layers.push_back({3, 1, 2, 1.0, 2});
  a.output_dim = 4;
  a.output_b = 1.0;
  a.output_rank = 4;
  return a;
}

inline cnnlab::Architecture arch_a2() {
  cnnlab::Architecture a;
  a.input_rows = a.input_cols = 22;
  a.input_channels = 1;
  a.pool = 2;
  a.layers.push_back({3, 1, 2, 1.0, 2});
  a.layers.push_back({4, 2, 2, 1.0, 2});
  a.output_dim = 3;
  a.output_b = 1.0;
  a.output_rank = 3;
  return a;
}

#endif  // CNNLAB_TESTS_FIXTURES_HPP_
