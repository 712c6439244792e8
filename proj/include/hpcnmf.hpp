/*
 * Copyright 2026 The hpcnmf Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


// Umbrella header.

#ifndef HPCNMF_HPCNMF_HPP
#define HPCNMF_HPCNMF_HPP

#include "hpcnmf/bench.hpp"
#include "hpcnmf/cluster.hpp"
#include "hpcnmf/common.hpp"
#include "hpcnmf/cost_model.hpp"
#include "hpcnmf/data_io.hpp"
#include "hpcnmf/grid.hpp"
#include "hpcnmf/matrix.hpp"
#include "hpcnmf/nls.hpp"
#include "hpcnmf/nmf.hpp"
#include "hpcnmf/random.hpp"
#include "hpcnmf/report.hpp"

#endif  // HPCNMF_HPCNMF_HPP
