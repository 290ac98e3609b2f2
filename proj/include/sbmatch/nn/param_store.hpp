// Copyright 2026 The sbmatch Authors
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

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sbmatch/error.hpp"

namespace sbm::nn {

// One trainable array with its gradient and Adam state. All four arrays share
// `shape`.
template <class T>
struct ParamEntry {
    std::string name;
    std::vector<int> shape;
    std::vector<T> value;
    std::vector<T> grad;
    std::vector<T> moment1;
    std::vector<T> moment2;
    std::int64_t step = 0;

    std::size_t size() const { return value.size(); }
};

template <class T>
class ParamStore {
public:
    // Adds a zero-filled entry. Names must be unique.
    ParamEntry<T>& add(const std::string& name, std::vector<int> shape) {
        SBM_REQUIRE(!index_.contains(name), "ParamStore: duplicate entry '" + name + "'");
        std::size_t n = 1;
        for (int d : shape) {
            SBM_REQUIRE(d > 0, "ParamStore: non-positive dimension in '" + name + "'");
            n *= static_cast<std::size_t>(d);
        }
        ParamEntry<T> e;
        e.name = name;
        e.shape = std::move(shape);
        e.value.assign(n, T(0));
        e.grad.assign(n, T(0));
        e.moment1.assign(n, T(0));
        e.moment2.assign(n, T(0));
        index_.emplace(name, entries_.size());
        entries_.push_back(std::move(e));
        return entries_.back();
    }

    const ParamEntry<T>* find(std::string_view name) const {
        auto it = index_.find(std::string(name));
        return it == index_.end() ? nullptr : &entries_[it->second];
    }
    ParamEntry<T>* find(std::string_view name) {
        auto it = index_.find(std::string(name));
        return it == index_.end() ? nullptr : &entries_[it->second];
    }
    const ParamEntry<T>& at(std::string_view name) const {
        const auto* e = find(name);
        SBM_REQUIRE(e != nullptr, "ParamStore: missing entry '" + std::string(name) + "'");
        return *e;
    }
    ParamEntry<T>& at(std::string_view name) {
        auto* e = find(name);
        SBM_REQUIRE(e != nullptr, "ParamStore: missing entry '" + std::string(name) + "'");
        return *e;
    }

    std::vector<ParamEntry<T>>& entries() { return entries_; }
    const std::vector<ParamEntry<T>>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }

    std::size_t total_size() const {
        std::size_t n = 0;
        for (const auto& e : entries_) n += e.size();
        return n;
    }

    void zero_grad() {
        for (auto& e : entries_) std::fill(e.grad.begin(), e.grad.end(), T(0));
    }

    template <class U>
    ParamStore<U> cast() const {
        ParamStore<U> out;
        for (const auto& e : entries_) {
            auto& o = out.add(e.name, e.shape);
            o.value.assign(e.value.begin(), e.value.end());
            o.grad.assign(e.grad.begin(), e.grad.end());
            o.moment1.assign(e.moment1.begin(), e.moment1.end());
            o.moment2.assign(e.moment2.begin(), e.moment2.end());
            o.step = e.step;
        }
        return out;
    }

private:
    std::vector<ParamEntry<T>> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace sbm::nn
