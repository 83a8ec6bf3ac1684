// Copyright 2026 The pcflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "pcflow/activation.hpp"
#include "pcflow/activity.hpp"
#include "pcflow/checkpoint.hpp"
#include "pcflow/dataio.hpp"
#include "pcflow/energy.hpp"
#include "pcflow/error.hpp"
#include "pcflow/inference.hpp"
#include "pcflow/network.hpp"
#include "pcflow/optim.hpp"
#include "pcflow/theory.hpp"
#include "pcflow/trainer.hpp"
