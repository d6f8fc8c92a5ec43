// Copyright 2026 The DSPC Authors
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

#pragma once

#include "dspc/common.hpp"

namespace dspc {

/// Best fitting rate (1 - ||y - y_hat|| / ||y - mean(y)||) * 100, floored at
/// zero. Rows are time steps, columns channels; norms are Frobenius, the
/// mean is per channel. A constant measured series makes the rate undefined
/// and throws.
double bfr_percent(const Mat& measured, const Mat& simulated);

/// Tracking performance (1 - ||r - y|| / ||r - mean(r)||) * 100 against a
/// reference series; same conventions as bfr_percent. Throws when the
/// reference is constant.
double tracking_percent(const Mat& reference, const Mat& output);

}  // namespace dspc
