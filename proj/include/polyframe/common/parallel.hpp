// Copyright 2026 The Polyframe Authors.
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

#include <cstddef>
#include <functional>

namespace polyframe {

// Worker count for a request of `threads` (0 = hardware concurrency), never
// more than `n` and at least 1.
std::size_t worker_count(std::size_t threads, std::size_t n);

// Runs `fn(worker, i)` for every i in [0, n). Worker w handles indices
// i with i % workers == w, in increasing order. The first exception thrown by
// any worker is rethrown on the calling thread.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace polyframe
