// Copyright 2026 The Savanna Authors
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

#ifndef SAVANNA_SRC_SVM_INTERNAL_HPP_
#define SAVANNA_SRC_SVM_INTERNAL_HPP_

#include <cstdint>
#include <span>

#include "savanna/detector.hpp"

namespace savanna::detail {

// Exact solver for one example (row singleton_row, label sign) against
// other_rows of the opposite label. Requires c_singleton >= c_other * n.
LinearModel solve_singleton(Matrix const& data, Eigen::Index singleton_row,
                            std::span<Eigen::Index const> other_rows,
                            double sign, double c_singleton, double c_other,
                            double kkt_tol, double tol, int max_epochs,
                            std::uint64_t seed);

}  // namespace savanna::detail

#endif  // SAVANNA_SRC_SVM_INTERNAL_HPP_
