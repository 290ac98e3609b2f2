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

#include <stdexcept>
#include <string>

namespace sbm {

// Violated precondition of a library call (bad shape, out-of-range ref, ...).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// File could not be read, written, or decoded.
class IoError : public std::runtime_error {
public:
    IoError(const std::string& path, const std::string& what)
        : std::runtime_error(path + ": " + what), path_(path) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

// Malformed checkpoint / manifest contents.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration key or value.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define SBM_REQUIRE(cond, msg)                                 \
    do {                                                       \
        if (!(cond)) throw ::sbm::ContractError(msg);          \
    } while (0)

}  // namespace sbm
