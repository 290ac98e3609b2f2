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

// Command-line front end. Subcommands: synth, train-match, train-refine,
// denoise, eval, ablate, dump-scores.

#include <iosfwd>

namespace sbm {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,       // unexpected runtime error
    kExitUsage = 2,         // unknown flag, missing or malformed argument
    kExitConfig = 3,        // config file or setting rejected
    kExitIo = 4,            // missing or unreadable file (checkpoint, image, directory)
    kExitFormat = 5,        // corrupt checkpoint, manifest or digest mismatch
    kExitContract = 6,      // inputs violate a library precondition
};

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sbm
