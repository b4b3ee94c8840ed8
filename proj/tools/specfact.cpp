// tools/specfact.cpp
//
// Copyright 2026 The specfact Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>

int main() {
  std::printf("specfact: command-line surface under construction\n");
  return 0;
}
